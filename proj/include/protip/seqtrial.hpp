#pragma once

// Inner loop: a staged two-sample trial with efficacy and futility stopping
// that decides whether one perturbation is an adversarial example.

#include "protip/gsdesign.hpp"
#include "protip/stattests.hpp"

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace protip::seqtrial {

enum class DecisionKind { Continue, StopEfficacy, StopFutility, FinalReject, FinalAccept };

std::string_view to_string(DecisionKind kind);

struct InterimDecision {
    DecisionKind kind = DecisionKind::Continue;
    int stage = 1;  // 1-based
    double p_value = 0.5;
    double z = 0.0;
    stattests::TestKind test = stattests::TestKind::WelchT;
};

struct AEIndicator {
    int indicator = 1;  // 1: H0 accepted (not an AE), 0: H0 rejected
    int stopped_at = 0;
    std::vector<InterimDecision> decisions;
    int images_used_per_group = 0;
};

// Comparisons are made on the p-value scale: p < stage level rejects,
// p > futility p-bound accepts early. Stage is 1-based.
InterimDecision interim_decide(const stattests::TestResult& result, int stage, const gsdesign::DesignPlan& plan);

enum class TestPolicy { FixedWelch, NormalityAdaptive };

std::string_view to_string(TestPolicy policy);
TestPolicy policy_from_string(std::string_view name);

struct TrialOptions {
    TestPolicy policy = TestPolicy::FixedWelch;
    bool early_stopping = true;
    double normality_level = 0.05;
};

// Returns `count` fresh scores for the given 1-based stage.
using ScoreSupplier = std::function<std::vector<double>(int stage, int count)>;

// Welch t, or under NormalityAdaptive: Welch when both samples pass the K^2
// check at `normality_level`, Mann-Whitney U otherwise.
stattests::TestResult run_test(std::span<const double> original, std::span<const double> perturbed,
                               TestPolicy policy, double normality_level = 0.05);

// Supplier failures propagate unchanged; a short batch is reported as OracleUnavailable.
AEIndicator run_trial(const ScoreSupplier& original, const ScoreSupplier& perturbed,
                      const gsdesign::DesignPlan& plan, const TrialOptions& options = {});

}  // namespace protip::seqtrial
