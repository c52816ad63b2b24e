#include "protip/remote_oracle.hpp"

#include "protip/error.hpp"
#include "protip/protocol.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>

namespace protip {

namespace {

[[noreturn]] void unavailable(const std::string& what) { throw Error(ErrorCode::OracleUnavailable, what); }

void write_all(int fd, const std::string& data, bool socket) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                 : ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            unavailable(std::string("write to oracle failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string read_line(int fd, std::string& buffer) {
    for (;;) {
        if (auto nl = buffer.find('\n'); nl != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        char chunk[4096];
        const ssize_t n = ::read(fd, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            unavailable(std::string("read from oracle failed: ") + std::strerror(errno));
        }
        if (n == 0) unavailable("oracle closed the connection");
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace

SubprocessTransport::SubprocessTransport(const std::string& command) {
    // A dead child must surface as OracleUnavailable, not as SIGPIPE.
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) unavailable("pipe() failed");
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        unavailable("pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) unavailable("fork() failed");
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

SubprocessTransport::~SubprocessTransport() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        // Closing stdin asks a well-behaved server to exit; give it a moment, then kill.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) != 0) return;
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
    }
}

void SubprocessTransport::send_line(const std::string& line) { write_all(to_child_, line + "\n", false); }

std::string SubprocessTransport::recv_line() { return read_line(from_child_, buffer_); }

TcpTransport::TcpTransport(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidInput, "tcp address must be host:port");
    const std::string host = address.substr(0, colon);
    const std::string port = address.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
        unavailable("cannot resolve " + address);
    }
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
        const int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) unavailable("cannot connect to " + address);
}

TcpTransport::~TcpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send_line(const std::string& line) { write_all(fd_, line + "\n", true); }

std::string TcpTransport::recv_line() { return read_line(fd_, buffer_); }

namespace {

protocol::OracleResponse round_trip(LineTransport& transport, const protocol::OracleRequest& req) {
    transport.send_line(protocol::encode(req));
    protocol::OracleResponse resp;
    try {
        resp = protocol::decode_response(transport.recv_line());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::OracleUnavailable) throw;
        unavailable(std::string("bad oracle response: ") + e.what());
    }
    if (!resp.id || *resp.id != req.id) {
        unavailable("oracle response id mismatch for request " + std::to_string(req.id));
    }
    if (!resp.ok) unavailable("oracle error for " + req.op + ": " + resp.error);
    return resp;
}

}  // namespace

semgate::EmbeddingVector RemoteOracle::embed(const std::string& text) {
    std::lock_guard lock(mu_);
    protocol::OracleRequest req;
    req.id = next_id_++;
    req.op = "embed";
    req.text = text;
    auto resp = round_trip(*transport_, req);
    try {
        return semgate::EmbeddingVector(std::move(resp.embedding));
    } catch (const Error& e) {
        unavailable(std::string("bad embedding from oracle: ") + e.what());
    }
}

std::vector<double> RemoteOracle::score(const ScoreRequest& request) {
    std::lock_guard lock(mu_);
    protocol::OracleRequest req;
    req.id = next_id_++;
    req.op = "score";
    req.prompt = request.prompt;
    req.caption = request.caption;
    req.count = request.count;
    req.seed = request.seed;
    auto resp = round_trip(*transport_, req);
    if (static_cast<int>(resp.scores.size()) != request.count) {
        unavailable("oracle returned " + std::to_string(resp.scores.size()) + " scores, expected " +
                    std::to_string(request.count));
    }
    for (double s : resp.scores) {
        if (!(s >= 0.0 && s <= 100.0)) unavailable("oracle score outside [0,100]");
    }
    return std::move(resp.scores);
}

TcpOracleServer::TcpOracleServer(GeneratorOracle& oracle, std::uint16_t port) : oracle_(oracle) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) unavailable("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 4) != 0) {
        ::close(listen_fd_);
        unavailable(std::string("cannot listen: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpOracleServer::~TcpOracleServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpOracleServer::serve_one() {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) unavailable("accept() failed");
    std::string buffer;
    try {
        for (;;) {
            std::string line = read_line(fd, buffer);
            if (line.empty()) continue;
            write_all(fd, protocol::handle_line(oracle_, line) + "\n", true);
        }
    } catch (const Error&) {
        // peer closed
    }
    ::close(fd);
}

}  // namespace protip
