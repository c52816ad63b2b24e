#include "protip/defenders.hpp"
#include "protip/error.hpp"
#include "protip/simgen.hpp"
#include "protip/verifier.hpp"

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

using namespace protip;
using namespace protip::verifier;

namespace {

const std::string kPrompt = "A white dog sitting on a wooden bench in the park under a tree";

const gsdesign::DesignPlan& plan() {
    static const gsdesign::DesignPlan p = gsdesign::build_plan({});
    return p;
}

simgen::SimOracleConfig scenario_for(double robustness, std::uint64_t seed) {
    simgen::SimOracleConfig c;
    c.seed = seed;
    c.ae_fraction = simgen::calibrate_ae_fraction(plan(), c, robustness);
    return c;
}

// Wraps an oracle and records every score request; optionally fails after a budget.
class RecordingOracle : public GeneratorOracle {
public:
    explicit RecordingOracle(GeneratorOracle& inner, long fail_after = -1) : inner_(inner), fail_after_(fail_after) {}

    semgate::EmbeddingVector embed(const std::string& text) override { return inner_.embed(text); }
    std::vector<double> score(const ScoreRequest& r) override {
        if (fail_after_ >= 0 && static_cast<long>(requests.size()) >= fail_after_)
            throw Error(ErrorCode::OracleUnavailable, "budget exhausted");
        requests.push_back(r);
        return inner_.score(r);
    }

    std::vector<ScoreRequest> requests;

private:
    GeneratorOracle& inner_;
    long fail_after_;
};

std::string trace_csv(const Verdict& v) {
    std::ostringstream os;
    write_trace_header(os);
    for (const auto& r : v.trace) write_trace_row(os, r);
    return os.str();
}

long count_sum(const std::vector<std::array<long, 2>>& c) {
    long s = 0;
    for (const auto& x : c) s += x[0] + x[1];
    return s;
}

textpert::PerturbationSpec spec_with(std::uint64_t seed) {
    textpert::PerturbationSpec s;
    s.seed = seed;
    return s;
}

}  // namespace

TEST(Verify, HighRobustnessPasses) {
    const concentration::VerificationTarget target{0.8, 0.05, 400};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        simgen::SimOracle oracle(scenario_for(0.95, seed));
        VerifyOptions opts;
        opts.seed = seed;
        opts.regenerate_original = true;
        const auto v = verify(kPrompt, target, plan(), spec_with(seed), {-1.0}, oracle, opts);
        if (v.status == VerdictStatus::Pass) {
            EXPECT_GE(v.estimate.lower_bound, target.b_l);
            // Never before the all-ones stopping point of the adaptive bound.
            EXPECT_GE(v.perturbations_used, 146);
        }
        EXPECT_LE(v.perturbations_used, target.j_max);
        EXPECT_EQ(count_sum(v.per_stage_counts), v.perturbations_used);
        EXPECT_EQ(v.estimate.n, v.perturbations_used);
    }
}

TEST(Verify, LowRobustnessFailsAtJmax) {
    simgen::SimOracle oracle(scenario_for(0.5, 3));
    VerifyOptions opts;
    opts.seed = 3;
    const auto v = verify(kPrompt, {0.8, 0.05, 400}, plan(), spec_with(3), {-1.0}, oracle, opts);
    EXPECT_EQ(v.status, VerdictStatus::Fail);
    EXPECT_EQ(v.perturbations_used, 400);
    EXPECT_FALSE(v.exhausted);
    EXPECT_LT(v.estimate.mu_hat, 0.8);
}

TEST(Verify, ByteIdenticalReruns) {
    auto once = [] {
        simgen::SimOracle oracle(scenario_for(0.9, 8));
        VerifyOptions opts;
        opts.seed = 8;
        return verify(kPrompt, {0.8, 0.05, 120}, plan(), spec_with(8), {-1.0}, oracle, opts);
    };
    const auto a = once(), b = once();
    EXPECT_EQ(trace_csv(a), trace_csv(b));
    EXPECT_EQ(a.estimate.successes, b.estimate.successes);
    EXPECT_EQ(a.per_stage_counts, b.per_stage_counts);
}

TEST(Verify, IdentityDefenderChangesNothing) {
    auto run = [](bool with_identity) {
        simgen::SimOracle oracle(scenario_for(0.8, 9));
        VerifyOptions opts;
        opts.seed = 9;
        if (with_identity) opts.defender = defenders::identity();
        return verify(kPrompt, {0.8, 0.05, 150}, plan(), spec_with(9), {-1.0}, oracle, opts);
    };
    EXPECT_EQ(trace_csv(run(false)), trace_csv(run(true)));
}

TEST(Verify, GatedPerturbationsAreNeverScored) {
    auto cfg = scenario_for(0.9, 10);
    cfg.embed_noise = 0.6;
    simgen::SimOracle inner(cfg);
    RecordingOracle oracle(inner);
    VerifyOptions opts;
    opts.seed = 10;
    // With noise 0.6 in 16 dimensions similarities spread around 1/(1+0.36).
    const auto v = verify(kPrompt, {0.8, 0.05, 60}, plan(), spec_with(10), {0.74}, oracle, opts);
    ASSERT_GT(v.gated_out, 0);
    ASSERT_GT(v.perturbations_used, 0);
    std::set<std::string> scored;
    for (const auto& r : oracle.requests) scored.insert(r.prompt);
    long gated_rows = 0;
    for (const auto& row : v.trace) {
        if (row.gated) {
            ++gated_rows;
            EXPECT_LT(row.similarity, 0.74);
            EXPECT_FALSE(row.indicator.has_value());
            EXPECT_EQ(scored.count(row.perturbed_text), 0u);
        } else {
            EXPECT_GE(row.similarity, 0.74);
        }
    }
    EXPECT_EQ(gated_rows, v.gated_out);
    EXPECT_EQ(count_sum(v.per_stage_counts), v.perturbations_used);
}

TEST(Verify, DefenderOnlyTouchesGenerationPrompt) {
    simgen::SimOracle inner(scenario_for(0.9, 11));
    RecordingOracle oracle(inner);
    VerifyOptions opts;
    opts.seed = 11;
    opts.defender = defenders::Defender{"upper", [](const std::string& s) { return s + "!"; }};
    verify(kPrompt, {0.8, 0.05, 20}, plan(), spec_with(11), {-1.0}, oracle, opts);
    for (const auto& r : oracle.requests) {
        EXPECT_EQ(r.caption, kPrompt);
        if (r.prompt != kPrompt) EXPECT_EQ(r.prompt.back(), '!');
    }
}

TEST(Verify, OriginalScoresAreDrawnOnce) {
    simgen::SimOracle inner(scenario_for(0.9, 12));
    RecordingOracle oracle(inner);
    VerifyOptions opts;
    opts.seed = 12;
    verify(kPrompt, {0.8, 0.05, 30}, plan(), spec_with(12), {-1.0}, oracle, opts);
    long originals = 0;
    for (const auto& r : oracle.requests) {
        if (r.prompt == kPrompt) {
            ++originals;
            EXPECT_EQ(r.count, plan().max_per_group());
        }
    }
    EXPECT_EQ(originals, 1);
}

TEST(Verify, OracleFailureAbortsWithPartialTrace) {
    simgen::SimOracle inner(scenario_for(0.9, 13));
    RecordingOracle oracle(inner, 40);
    std::vector<TraceRow> rows;
    VerifyOptions opts;
    opts.seed = 13;
    opts.on_row = [&](const TraceRow& r) { rows.push_back(r); };
    try {
        verify(kPrompt, {0.8, 0.05, 400}, plan(), spec_with(13), {-1.0}, oracle, opts);
        FAIL() << "expected OracleUnavailable";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OracleUnavailable);
    }
    EXPECT_FALSE(rows.empty());
}

TEST(Verify, ExhaustedPerturbationSpaceFails) {
    simgen::SimOracle oracle(scenario_for(0.99, 14));
    textpert::PerturbationSpec spec;
    spec.methods = {textpert::PerturbationMethod::Substitute};
    spec.alphabet = "ac";
    const auto v = verify("b", {0.8, 0.05, 400}, plan(), spec, {-1.0}, oracle, {});
    EXPECT_EQ(v.status, VerdictStatus::Fail);
    EXPECT_TRUE(v.exhausted);
    EXPECT_EQ(v.perturbations_used, 2);
}

TEST(Verify, GateCapMarksExhaustion) {
    auto cfg = scenario_for(0.9, 15);
    cfg.embed_noise = 0.6;
    simgen::SimOracle oracle(cfg);
    VerifyOptions opts;
    opts.max_gated_out = 5;
    const auto v = verify(kPrompt, {0.8, 0.05, 400}, plan(), spec_with(15), {0.999}, oracle, opts);
    EXPECT_TRUE(v.exhausted);
    EXPECT_EQ(v.gated_out, 5);
    EXPECT_EQ(v.status, VerdictStatus::Fail);
}

TEST(Baseline, FixedEpsilon) {
    simgen::SimOracle oracle(scenario_for(0.9, 16));
    const auto r = baseline_run(kPrompt, 1000, 0.05, plan(), spec_with(16), {-1.0}, oracle, {});
    EXPECT_EQ(r.estimate.n, 1000);
    EXPECT_NEAR(r.estimate.epsilon, 0.04295, 1e-4);
    EXPECT_EQ(r.estimate.bound, concentration::BoundKind::Hoeffding);
    EXPECT_EQ(count_sum(r.per_stage_counts), 1000);
    // Full-depth trials: every decision is made at the last stage.
    for (std::size_t k = 0; k + 1 < r.per_stage_counts.size(); ++k) EXPECT_EQ(count_sum({r.per_stage_counts[k]}), 0);
}

// Ground truth for full-depth trials: a level-a5 one-sided t-test on 59 per
// group rejects non-AE pairs at rate a5 and AE pairs at its power.
TEST(Baseline, EstimateConcentratesOnGroundTruth) {
    const auto& p = plan();
    const double n = p.max_per_group(), df = 2 * n - 2, level = p.stage_levels.back();
    const double crit = boost::math::quantile(boost::math::complement(boost::math::students_t(df), level));
    const double power =
        boost::math::cdf(boost::math::complement(boost::math::non_central_t(df, 0.5 * std::sqrt(n / 2)), crit));
    const double r_ae = 1 - power, r_clean = 1 - level;
    const double fraction = (r_clean - 0.9) / (r_clean - r_ae);
    int inside = 0;
    const int runs = 20;
    for (int i = 0; i < runs; ++i) {
        simgen::SimOracleConfig c;
        c.seed = 100 + i;
        c.ae_fraction = fraction;
        simgen::SimOracle oracle(c);
        VerifyOptions opts;
        opts.seed = 200 + i;
        opts.regenerate_original = true;
        const auto r = baseline_run(kPrompt, 1000, 0.05, p, spec_with(300 + i), {-1.0}, oracle, opts);
        inside += r.estimate.mu_hat >= 0.87 && r.estimate.mu_hat <= 0.93;
    }
    EXPECT_GE(inside, 19);
}

TEST(Baseline, TooFewPerturbations) {
    simgen::SimOracle oracle(scenario_for(0.9, 17));
    textpert::PerturbationSpec spec;
    spec.methods = {textpert::PerturbationMethod::Substitute};
    spec.alphabet = "ac";
    try {
        baseline_run("b", 10, 0.05, plan(), spec, {-1.0}, oracle, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ExhaustedPerturbations);
    }
}

TEST(RankDefenders, IdentityMatchesBaseline) {
    simgen::SimOracle oracle(scenario_for(0.8, 18));
    BaselineConfig cfg;
    cfg.n_fixed = 150;
    cfg.plan = plan();
    cfg.spec = spec_with(18);
    cfg.gate = {-1.0};
    const auto ranked = rank_defenders(kPrompt, {defenders::identity()}, cfg, oracle);
    ASSERT_EQ(ranked.size(), 1u);
    simgen::SimOracle fresh(scenario_for(0.8, 18));
    const auto base = baseline_estimate(kPrompt, 150, cfg.sigma, plan(), cfg.spec, cfg.gate, fresh, {});
    EXPECT_EQ(ranked[0].second.successes, base.successes);
}

TEST(RankDefenders, PerfectCorrectorRanksFirst) {
    simgen::SimOracle oracle(scenario_for(0.6, 19));
    BaselineConfig cfg;
    cfg.n_fixed = 150;
    cfg.plan = plan();
    cfg.spec = spec_with(19);
    cfg.gate = {-1.0};
    cfg.options.regenerate_original = true;
    const defenders::Defender perfect{"perfect", [](const std::string&) { return kPrompt; }};
    const auto ranked = rank_defenders(kPrompt, {defenders::identity(), perfect}, cfg, oracle);
    EXPECT_EQ(ranked[0].first, "perfect");
    EXPECT_GE(ranked[0].second.mu_hat, 0.95);
    EXPECT_LT(ranked[1].second.mu_hat, ranked[0].second.mu_hat);
}

TEST(RankDefenders, TiesBreakByName) {
    simgen::SimOracle oracle(scenario_for(0.8, 20));
    BaselineConfig cfg;
    cfg.n_fixed = 100;
    cfg.plan = plan();
    cfg.spec = spec_with(20);
    cfg.gate = {-1.0};
    auto copy = defenders::identity();
    copy.name = "identity-copy";
    const auto ranked = rank_defenders(kPrompt, {copy, defenders::identity()}, cfg, oracle);
    ASSERT_EQ(ranked.size(), 2u);
    EXPECT_EQ(ranked[0].first, "identity");
    EXPECT_EQ(ranked[1].first, "identity-copy");
    EXPECT_EQ(ranked[0].second.successes, ranked[1].second.successes);
}
