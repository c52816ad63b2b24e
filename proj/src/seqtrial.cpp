#include "protip/seqtrial.hpp"

#include "protip/error.hpp"

namespace protip::seqtrial {

std::string_view to_string(DecisionKind kind) {
    switch (kind) {
        case DecisionKind::Continue: return "continue";
        case DecisionKind::StopEfficacy: return "stop_efficacy";
        case DecisionKind::StopFutility: return "stop_futility";
        case DecisionKind::FinalReject: return "final_reject";
        case DecisionKind::FinalAccept: return "final_accept";
    }
    return "unknown";
}

std::string_view to_string(TestPolicy policy) {
    return policy == TestPolicy::FixedWelch ? "fixed_welch" : "normality_adaptive";
}

TestPolicy policy_from_string(std::string_view name) {
    if (name == "fixed_welch") return TestPolicy::FixedWelch;
    if (name == "normality_adaptive") return TestPolicy::NormalityAdaptive;
    throw Error(ErrorCode::InvalidInput, "unknown test policy '" + std::string(name) + "'");
}

InterimDecision interim_decide(const stattests::TestResult& result, int stage, const gsdesign::DesignPlan& plan) {
    PROTIP_REQUIRE(stage >= 1 && stage <= plan.stages, ErrorCode::InvalidInput, "stage out of range");
    const auto k = static_cast<std::size_t>(stage - 1);
    InterimDecision d;
    d.stage = stage;
    d.p_value = result.p_one_sided;
    d.z = result.z_equivalent;
    d.test = result.kind;
    const bool last = stage == plan.stages;
    if (last) {
        d.kind = result.p_one_sided < plan.stage_levels[k] ? DecisionKind::FinalReject : DecisionKind::FinalAccept;
    } else if (result.p_one_sided < plan.stage_levels[k]) {
        d.kind = DecisionKind::StopEfficacy;
    } else if (result.p_one_sided > plan.futility_p[k]) {
        d.kind = DecisionKind::StopFutility;
    } else {
        d.kind = DecisionKind::Continue;
    }
    return d;
}

stattests::TestResult run_test(std::span<const double> original, std::span<const double> perturbed,
                               TestPolicy policy, double normality_level) {
    if (policy == TestPolicy::FixedWelch) return stattests::welch_t(original, perturbed);
    auto passes = [&](std::span<const double> s) {
        try {
            return stattests::normality_k2(s).p >= normality_level;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::InsufficientSample || e.code() == ErrorCode::DegenerateSample) return false;
            throw;
        }
    };
    if (passes(original) && passes(perturbed)) return stattests::welch_t(original, perturbed);
    return stattests::mann_whitney_u(original, perturbed);
}

namespace {

void append_batch(std::vector<double>& into, const ScoreSupplier& supplier, int stage, int count, const char* who) {
    auto batch = supplier(stage, count);
    if (static_cast<int>(batch.size()) != count) {
        throw Error(ErrorCode::OracleUnavailable, std::string(who) + " supplier returned " +
                                                      std::to_string(batch.size()) + " scores, expected " +
                                                      std::to_string(count));
    }
    into.insert(into.end(), batch.begin(), batch.end());
}

bool is_terminal(DecisionKind k) { return k != DecisionKind::Continue; }

}  // namespace

AEIndicator run_trial(const ScoreSupplier& original, const ScoreSupplier& perturbed,
                      const gsdesign::DesignPlan& plan, const TrialOptions& options) {
    PROTIP_REQUIRE(plan.stages >= 1 && plan.cumulative_per_group.size() == static_cast<std::size_t>(plan.stages),
                   ErrorCode::InvalidInput, "plan has no stage sizes");
    AEIndicator out;
    std::vector<double> orig_scores;
    std::vector<double> pert_scores;
    const InterimDecision* verdict = nullptr;
    for (int stage = 1; stage <= plan.stages; ++stage) {
        const int m = plan.per_group_increment(stage);
        append_batch(orig_scores, original, stage, m, "original");
        append_batch(pert_scores, perturbed, stage, m, "perturbed");
        const auto result = run_test(orig_scores, pert_scores, options.policy, options.normality_level);
        out.decisions.push_back(interim_decide(result, stage, plan));
        if (options.early_stopping && is_terminal(out.decisions.back().kind)) {
            verdict = &out.decisions.back();
            break;
        }
    }
    if (verdict == nullptr) verdict = &out.decisions.back();
    out.stopped_at = static_cast<int>(out.decisions.size());
    out.images_used_per_group = plan.cumulative_per_group[static_cast<std::size_t>(out.stopped_at - 1)];
    const auto kind = verdict->kind;
    out.indicator = (kind == DecisionKind::StopFutility || kind == DecisionKind::FinalAccept) ? 1 : 0;
    return out;
}

}  // namespace protip::seqtrial
