#pragma once

// End-to-end verification: perturb, gate, run the inner trial, update the
// adaptive bound, and stop on pass, fail, or exhaustion of the perturbation space.

#include "protip/concentration.hpp"
#include "protip/defenders.hpp"
#include "protip/gsdesign.hpp"
#include "protip/oracle.hpp"
#include "protip/semgate.hpp"
#include "protip/seqtrial.hpp"
#include "protip/textpert.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace protip::verifier {

struct TraceRow {
    long index = 0;  // draw number, gated-out draws included
    std::string perturbed_text;
    double similarity = 0.0;
    bool gated = false;  // true when rejected by the similarity gate
    std::optional<int> indicator;
    int stopped_at = 0;
    std::vector<double> p_values;
    double mu_hat = 0.0;
    double epsilon = 0.0;
    double lower_bound = 0.0;
    std::string decision;
};

struct VerifyOptions {
    std::uint64_t seed = 0;  // oracle request seeds
    seqtrial::TestPolicy policy = seqtrial::TestPolicy::FixedWelch;
    bool regenerate_original = false;
    std::optional<defenders::Defender> defender;
    long max_gated_out = -1;  // -1: 10 * j_max (or 10 * n_fixed for baselines)
    std::function<void(const TraceRow&)> on_row;
};

enum class VerdictStatus { Pass, Fail };

std::string_view to_string(VerdictStatus s);

struct Verdict {
    VerdictStatus status = VerdictStatus::Fail;
    concentration::RobustnessEstimate estimate;
    long perturbations_used = 0;
    long gated_out = 0;
    // Per stage: {H0 rejected (AE), H0 accepted (non-AE)}; entries sum to perturbations_used.
    std::vector<std::array<long, 2>> per_stage_counts;
    bool exhausted = false;
    std::vector<TraceRow> trace;
};

// Flushes trace rows through options.on_row as they are produced, so a run
// aborted by OracleUnavailable leaves its partial trace behind.
Verdict verify(const std::string& prompt, const concentration::VerificationTarget& target,
               const gsdesign::DesignPlan& plan, const textpert::PerturbationSpec& spec,
               const semgate::GateConfig& gate_cfg, GeneratorOracle& oracle, const VerifyOptions& options = {});

struct BaselineResult {
    concentration::RobustnessEstimate estimate;
    std::vector<std::array<long, 2>> per_stage_counts;
    long gated_out = 0;
    std::vector<TraceRow> trace;
};

// Fixed number of gated perturbations, full-depth trials without early stopping,
// normality-adaptive test choice, fixed-n Hoeffding interval.
// Throws ExhaustedPerturbations if n_fixed fresh perturbations cannot be drawn.
BaselineResult baseline_run(const std::string& prompt, long n_fixed, double sigma, const gsdesign::DesignPlan& plan,
                            const textpert::PerturbationSpec& spec, const semgate::GateConfig& gate_cfg,
                            GeneratorOracle& oracle, const VerifyOptions& options = {});

concentration::RobustnessEstimate baseline_estimate(const std::string& prompt, long n_fixed, double sigma,
                                                    const gsdesign::DesignPlan& plan,
                                                    const textpert::PerturbationSpec& spec,
                                                    const semgate::GateConfig& gate_cfg, GeneratorOracle& oracle,
                                                    const VerifyOptions& options = {});

struct BaselineConfig {
    long n_fixed = 1000;
    double sigma = 0.05;
    gsdesign::DesignPlan plan;
    textpert::PerturbationSpec spec;
    semgate::GateConfig gate;
    VerifyOptions options;  // options.defender is overridden per entry
};

// Baseline per defender on identical perturbation streams, ordered by mu_hat
// descending with ties broken by name.
std::vector<std::pair<std::string, concentration::RobustnessEstimate>> rank_defenders(
    const std::string& prompt, const std::vector<defenders::Defender>& defenders, const BaselineConfig& config,
    GeneratorOracle& oracle);

// CSV with a header row; text fields quoted.
void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceRow& row);

}  // namespace protip::verifier
