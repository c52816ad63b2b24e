#pragma once

// Newline-delimited JSON wire format spoken with external generator oracles.
//   request:  {"id":1,"op":"embed","text":"..."}
//             {"id":2,"op":"score","prompt":"...","caption":"...","count":12,"seed":7}
//   response: {"id":1,"ok":true,"embedding":[...]} | {"id":2,"ok":true,"scores":[...]}
//             {"id":3,"ok":false,"error":"unsupported_op"}

#include "protip/oracle.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protip::protocol {

struct OracleRequest {
    std::int64_t id = 0;
    std::string op;
    std::string text;
    std::string prompt;
    std::string caption;
    int count = 0;
    std::uint64_t seed = 0;
};

struct OracleResponse {
    std::optional<std::int64_t> id;  // absent when the request line could not be parsed
    bool ok = false;
    std::vector<double> embedding;
    std::vector<double> scores;
    std::string error;
};

// Single line, no trailing newline.
std::string encode(const OracleRequest& request);
std::string encode(const OracleResponse& response);

// Throw InvalidInput on malformed lines.
OracleRequest decode_request(std::string_view line);
OracleResponse decode_response(std::string_view line);

// Server side: answers one request from an in-process oracle. Never throws.
OracleResponse handle(GeneratorOracle& oracle, const OracleRequest& request);
// Parses, dispatches and encodes one line; malformed input yields error "parse".
std::string handle_line(GeneratorOracle& oracle, std::string_view line);

// Reads requests until EOF, writing one response per line and flushing after each.
void serve(GeneratorOracle& oracle, std::istream& in, std::ostream& out);

}  // namespace protip::protocol
