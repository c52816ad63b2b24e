#include "protip/protocol.hpp"

#include "protip/error.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace protip {

namespace {
using nlohmann::json;
}

std::unique_ptr<FileOracle> FileOracle::parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("file oracle: ") + e.what());
    }
    PROTIP_REQUIRE(doc.is_object(), ErrorCode::InvalidInput, "file oracle: expected a JSON object");
    auto out = std::make_unique<FileOracle>();
    try {
        if (doc.contains("texts")) {
            for (auto& [text, values] : doc.at("texts").items()) {
                out->texts_.emplace(text, semgate::EmbeddingVector(values.get<std::vector<double>>()));
            }
        }
        if (doc.contains("scores")) {
            for (auto& [key, values] : doc.at("scores").items()) {
                out->scores_.emplace(key, values.get<std::vector<double>>());
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("file oracle: ") + e.what());
    }
    return out;
}

std::unique_ptr<FileOracle> FileOracle::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    PROTIP_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open oracle file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

semgate::EmbeddingVector FileOracle::embed(const std::string& text) {
    auto it = texts_.find(text);
    if (it == texts_.end()) throw Error(ErrorCode::OracleUnavailable, "file oracle has no embedding for '" + text + "'");
    return it->second;
}

std::vector<double> FileOracle::score(const ScoreRequest& request) {
    std::lock_guard lock(mu_);
    auto it = scores_.find(request.prompt);
    if (it == scores_.end()) {
        throw Error(ErrorCode::OracleUnavailable, "file oracle has no scores for '" + request.prompt + "'");
    }
    auto& pos = cursor_[request.prompt];
    const auto need = static_cast<std::size_t>(request.count);
    if (pos + need > it->second.size()) {
        throw Error(ErrorCode::OracleUnavailable, "file oracle ran out of scores for '" + request.prompt + "'");
    }
    std::vector<double> out(it->second.begin() + static_cast<std::ptrdiff_t>(pos),
                            it->second.begin() + static_cast<std::ptrdiff_t>(pos + need));
    pos += need;
    return out;
}

namespace protocol {

std::string encode(const OracleRequest& r) {
    json j;
    j["id"] = r.id;
    j["op"] = r.op;
    if (r.op == "embed") {
        j["text"] = r.text;
    } else if (r.op == "score") {
        j["prompt"] = r.prompt;
        j["caption"] = r.caption;
        j["count"] = r.count;
        j["seed"] = r.seed;
    }
    return j.dump();
}

std::string encode(const OracleResponse& r) {
    json j;
    j["id"] = r.id ? json(*r.id) : json(nullptr);
    j["ok"] = r.ok;
    if (r.ok) {
        if (!r.embedding.empty()) j["embedding"] = r.embedding;
        if (!r.scores.empty() || r.embedding.empty()) j["scores"] = r.scores;
    } else {
        j["error"] = r.error;
    }
    return j.dump();
}

OracleRequest decode_request(std::string_view line) {
    try {
        const json j = json::parse(line);
        OracleRequest r;
        r.id = j.at("id").get<std::int64_t>();
        r.op = j.at("op").get<std::string>();
        r.text = j.value("text", std::string{});
        r.prompt = j.value("prompt", std::string{});
        r.caption = j.value("caption", std::string{});
        r.count = j.value("count", 0);
        r.seed = j.value("seed", std::uint64_t{0});
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed request: ") + e.what());
    }
}

OracleResponse decode_response(std::string_view line) {
    try {
        const json j = json::parse(line);
        OracleResponse r;
        if (j.contains("id") && !j.at("id").is_null()) r.id = j.at("id").get<std::int64_t>();
        r.ok = j.at("ok").get<bool>();
        if (j.contains("embedding")) r.embedding = j.at("embedding").get<std::vector<double>>();
        if (j.contains("scores")) r.scores = j.at("scores").get<std::vector<double>>();
        r.error = j.value("error", std::string{});
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed response: ") + e.what());
    }
}

OracleResponse handle(GeneratorOracle& oracle, const OracleRequest& request) {
    OracleResponse r;
    r.id = request.id;
    try {
        if (request.op == "embed") {
            const auto e = oracle.embed(request.text);
            r.embedding.assign(e.values().begin(), e.values().end());
            r.ok = true;
        } else if (request.op == "score") {
            if (request.count < 1) {
                r.error = "count must be >= 1";
                return r;
            }
            r.scores = oracle.score({request.prompt, request.caption, request.count, request.seed});
            r.ok = true;
        } else {
            r.error = "unsupported_op";
        }
    } catch (const std::exception& e) {
        r.ok = false;
        r.embedding.clear();
        r.scores.clear();
        r.error = e.what();
    }
    return r;
}

std::string handle_line(GeneratorOracle& oracle, std::string_view line) {
    OracleRequest req;
    try {
        req = decode_request(line);
    } catch (const Error&) {
        OracleResponse bad;
        // Echo the id when the line is JSON with a usable id.
        try {
            const json j = json::parse(line);
            if (j.is_object() && j.contains("id") && j.at("id").is_number_integer()) bad.id = j.at("id").get<std::int64_t>();
        } catch (const json::exception&) {
        }
        bad.error = "parse";
        return encode(bad);
    }
    return encode(handle(oracle, req));
}

void serve(GeneratorOracle& oracle, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        out << handle_line(oracle, line) << '\n';
        out.flush();
    }
}

}  // namespace protocol
}  // namespace protip
