#pragma once

// Everything needed to reproduce a verification run, with a JSON form that
// is embedded in every run summary.

#include "protip/concentration.hpp"
#include "protip/gsdesign.hpp"
#include "protip/oracle.hpp"
#include "protip/semgate.hpp"
#include "protip/seqtrial.hpp"
#include "protip/textpert.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace protip {

struct RunConfig {
    std::string prompt;
    std::optional<std::uint64_t> seed;  // required; there is no clock-based default
    std::string oracle;                 // sim:<cfg>, subprocess:<cmd>, tcp:<host:port>, file:<path>
    std::string output_dir = ".";

    gsdesign::DesignInput design;
    textpert::PerturbationSpec perturbation;
    std::string keyboard_path;  // empty: built-in QWERTY map
    // Absent: no gating, every perturbation is kept (cosine >= -1).
    std::optional<double> gamma;
    concentration::VerificationTarget target;

    seqtrial::TestPolicy policy = seqtrial::TestPolicy::FixedWelch;
    bool regenerate_original = false;
    std::string defender;  // empty, "identity" or "dict:<path>"

    semgate::GateConfig gate() const { return {gamma.value_or(-1.0)}; }
    // Perturbation spec with the run seed folded in.
    textpert::PerturbationSpec perturbation_spec() const;
    std::uint64_t oracle_seed() const;

    // Throws InvalidInput.
    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
};

// PROTIP_ORACLE, when set and non-empty, replaces the configured selector.
std::string resolve_oracle_selector(const std::string& configured);

// Builds an oracle from a selector. sim: takes a config file path or inline
// JSON (empty for the default scenario).
std::unique_ptr<GeneratorOracle> make_oracle(const std::string& selector);

}  // namespace protip
