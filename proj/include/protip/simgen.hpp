#pragma once

// Simulated generator oracle with known ground truth and Monte Carlo
// operating characteristics of the inner and outer loops.

#include "protip/concentration.hpp"
#include "protip/gsdesign.hpp"
#include "protip/oracle.hpp"
#include "protip/rng.hpp"
#include "protip/semgate.hpp"
#include "protip/seqtrial.hpp"
#include "protip/textpert.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace protip::simgen {

enum class ScoreFamily { Normal, LogNormal, Mixture };

std::string_view to_string(ScoreFamily f);
ScoreFamily family_from_string(std::string_view name);

struct SimOracleConfig {
    double base_mean = 31.0;
    double base_sd = 3.0;
    double ae_shift = 0.5;     // downward mean shift of AE outputs, in base_sd units
    double ae_fraction = 0.0;  // probability a perturbed text is an AE
    ScoreFamily family = ScoreFamily::Normal;
    std::uint64_t seed = 0;
    // 0: every text embeds to the same vector (similarity 1). Otherwise a
    // hashed perturbation of that norm is mixed in per text.
    double embed_noise = 0.0;
    std::size_t embed_dim = 16;

    void validate() const;
    std::string to_json() const;
    static SimOracleConfig from_json(const std::string& text);
    static SimOracleConfig load(const std::string& path);
};

// n draws, mean shifted down by ae_shift * base_sd when is_ae, clamped to [0,100].
std::vector<double> sim_scores(const SimOracleConfig& cfg, bool is_ae, int n, Rng& rng);

class SimOracle : public GeneratorOracle {
public:
    explicit SimOracle(SimOracleConfig cfg);

    semgate::EmbeddingVector embed(const std::string& text) override;
    std::vector<double> score(const ScoreRequest& request) override;

    // AE status of a generation prompt scored against `caption`; the caption
    // itself is never an AE. Fixed per text once drawn.
    bool is_ae(const std::string& prompt, const std::string& caption);

    const SimOracleConfig& config() const { return cfg_; }
    long score_requests() const;

private:
    SimOracleConfig cfg_;
    mutable std::mutex mu_;
    std::map<std::string, bool> status_;
    long score_requests_ = 0;
};

enum class TrialModel {
    // Draw scores and run the actual inner trial on the plan's integer stage sizes.
    Scores,
    // Draw the canonical stage z-statistics directly at the design's information levels.
    Canonical,
};

std::string_view to_string(TrialModel m);
TrialModel model_from_string(std::string_view name);

struct OCOptions {
    TrialModel model = TrialModel::Scores;
    seqtrial::TestPolicy policy = seqtrial::TestPolicy::FixedWelch;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct OCReport {
    long trials = 0;
    TrialModel model = TrialModel::Scores;
    std::vector<double> efficacy_by_stage;  // K; final-stage rejections at K
    std::vector<double> futility_by_stage;  // K-1
    double final_accept = 0.0;
    double rejection_rate = 0.0;  // indicator 0
    double type1_rate = 0.0;      // rejections among non-AE trials
    double type2_rate = 0.0;      // acceptances among AE trials
    long ae_trials = 0;
    double mean_subjects = 0.0;   // images over both groups
    std::vector<double> efficacy_mcse;
    std::vector<double> futility_mcse;
    double rejection_mcse = 0.0;
    double mean_subjects_mcse = 0.0;

    std::string to_json() const;
    std::string to_csv() const;
};

inline constexpr long kMinOCTrials = 1000;

double mcse(double p, long trials);

// Throws InvalidInput when trials < kMinOCTrials.
OCReport mc_operating_characteristics(const gsdesign::DesignPlan& plan, const SimOracleConfig& scenario, long trials,
                                      const OCOptions& options = {});

// Robustness implied by the scenario under the design: the expected indicator
// mean, from the canonical crossing probabilities.
double implied_robustness(const gsdesign::DesignPlan& plan, const SimOracleConfig& scenario);

// ae_fraction giving implied_robustness == target (clamped to [0,1]).
double calibrate_ae_fraction(const gsdesign::DesignPlan& plan, SimOracleConfig scenario, double target);

struct VerificationOC {
    long runs = 0;
    long passes = 0;
    std::vector<long> perturbations_used;
    std::vector<bool> passed;
    double mean_perturbations = 0.0;
};

struct MCVerifyOptions {
    std::uint64_t seed = 0;
    // Fresh original-prompt scores per perturbation keep the indicators
    // independent; a shared original sample correlates them within a run.
    bool regenerate_original = true;
    seqtrial::TestPolicy policy = seqtrial::TestPolicy::FixedWelch;
    unsigned threads = 0;
};

// Repeated end-to-end verify runs of a simulated oracle with per-run seeds.
VerificationOC mc_verification(const std::string& prompt, const concentration::VerificationTarget& target,
                               const gsdesign::DesignPlan& plan, const textpert::PerturbationSpec& spec,
                               const semgate::GateConfig& gate, const SimOracleConfig& scenario, long runs,
                               const MCVerifyOptions& options = {});

}  // namespace protip::simgen
