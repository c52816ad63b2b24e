#pragma once

// Group-sequential design with Pocock-type alpha and beta spending, one-sided,
// non-binding futility. Boundaries are solved by recursive numerical integration
// of the stage sub-densities of the canonical joint normal process.

#include <cstddef>
#include <vector>

namespace protip::gsdesign {

// Lan-DeMets Pocock-type spending: total * ln(1 + (e - 1) t).
double pocock_spend(double t, double total);

enum class StageSizing {
    // n_k = round(max_subjects / 2 * t_k) per group, cumulative.
    RoundedCumulative,
    // n_k = k * ceil(max_subjects / (2 K)) per group.
    UniformCeil,
};

struct DesignInput {
    int stages = 5;
    std::vector<double> info_rates;  // empty: equally spaced
    double alpha = 0.05;
    double beta = 0.30;
    double effect = 0.5;
    double sd = 1.0;
    StageSizing sizing = StageSizing::RoundedCumulative;
};

struct DesignPlan {
    int stages = 0;
    std::vector<double> info_rates;
    double alpha = 0.0;
    double beta = 0.0;
    double effect = 0.0;
    double sd = 1.0;
    StageSizing sizing = StageSizing::RoundedCumulative;

    std::vector<double> alpha_spend;   // cumulative, K
    std::vector<double> beta_spend;    // cumulative, K
    std::vector<double> efficacy_z;    // K
    std::vector<double> futility_z;    // K-1
    std::vector<double> stage_levels;  // one-sided p thresholds, K
    std::vector<double> futility_p;    // one-sided p-value scale, K-1
    std::vector<double> power;         // cumulative rejection probability under H1, K

    double shift = 0.0;        // (drift at full information)^2 under H1
    double fixed_shift = 0.0;  // (z_{1-alpha} + z_{1-beta})^2
    double inflation = 1.0;    // shift / fixed_shift

    double fixed_subjects = 0.0;       // fixed-sample two-sample t-test total
    double max_subjects_normal = 0.0;  // total on the normal-approximation scale
    double max_subjects = 0.0;         // total, t-corrected
    double expected_subjects_h0 = 0.0;
    double expected_subjects_h1 = 0.0;

    std::vector<int> cumulative_per_group;  // realized per-group sample size through stage k

    double drift_h1() const;
    int per_group_increment(int stage) const;  // stage is 1-based
    int max_per_group() const { return cumulative_per_group.back(); }
};

// Throws InvalidInput on bad parameters and NumericalFailure when a boundary
// cannot be bracketed or the root-finder does not converge.
DesignPlan build_plan(const DesignInput& input);

struct ExitProbabilities {
    double drift = 0.0;  // expected z at full information
    std::vector<double> efficacy_by_stage;  // K
    std::vector<double> futility_by_stage;  // K-1
    double final_accept = 0.0;              // reach stage K and accept

    double total_efficacy() const;
    double total_futility() const;
};

// Exit probabilities with both boundaries active, for the given drift
// (0 is H0, plan.drift_h1() is the design alternative).
ExitProbabilities crossing_probabilities(const DesignPlan& plan, double drift);

// Expected total subjects given exit probabilities, on the fractional design scale.
double expected_subjects(const DesignPlan& plan, const ExitProbabilities& exits);

namespace detail {

// Grid resolution: spacing of 4001 nodes over +-8 standard units.
inline constexpr double kGridSpacing = 16.0 / 4000.0;
inline constexpr double kRootTolerance = 1e-10;

}  // namespace detail

}  // namespace protip::gsdesign
