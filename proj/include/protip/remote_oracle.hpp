#pragma once

// Generator oracles reached over the NDJSON protocol: a spawned subprocess
// (stdin/stdout) or a TCP peer.

#include "protip/oracle.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

namespace protip {

class LineTransport {
public:
    virtual ~LineTransport() = default;
    // Both throw OracleUnavailable when the peer is gone.
    virtual void send_line(const std::string& line) = 0;
    virtual std::string recv_line() = 0;
};

// Runs `command` through /bin/sh -c with its stdin/stdout connected to us.
class SubprocessTransport : public LineTransport {
public:
    explicit SubprocessTransport(const std::string& command);
    ~SubprocessTransport() override;
    SubprocessTransport(const SubprocessTransport&) = delete;
    SubprocessTransport& operator=(const SubprocessTransport&) = delete;

    void send_line(const std::string& line) override;
    std::string recv_line() override;

private:
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

class TcpTransport : public LineTransport {
public:
    // `address` is "host:port".
    explicit TcpTransport(const std::string& address);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    void send_line(const std::string& line) override;
    std::string recv_line() override;

private:
    int fd_ = -1;
    std::string buffer_;
};

// One request in flight at a time; responses are matched by id.
class RemoteOracle : public GeneratorOracle {
public:
    explicit RemoteOracle(std::unique_ptr<LineTransport> transport) : transport_(std::move(transport)) {}

    semgate::EmbeddingVector embed(const std::string& text) override;
    std::vector<double> score(const ScoreRequest& request) override;

private:
    std::unique_ptr<LineTransport> transport_;
    std::mutex mu_;
    std::int64_t next_id_ = 1;
};

// Listens on 127.0.0.1; port 0 picks an ephemeral port.
class TcpOracleServer {
public:
    explicit TcpOracleServer(GeneratorOracle& oracle, std::uint16_t port = 0);
    ~TcpOracleServer();
    TcpOracleServer(const TcpOracleServer&) = delete;
    TcpOracleServer& operator=(const TcpOracleServer&) = delete;

    std::uint16_t port() const { return port_; }
    // Accepts one connection and serves it until the peer closes.
    void serve_one();

private:
    GeneratorOracle& oracle_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace protip
