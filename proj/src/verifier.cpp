#include "protip/verifier.hpp"

#include "protip/error.hpp"
#include "protip/rng.hpp"

#include <algorithm>
#include <exception>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace protip::verifier {

namespace {

using concentration::BoundKind;
using concentration::Decision;
using concentration::RobustnessEstimate;

constexpr std::uint64_t kOriginalStream = 2;
constexpr std::uint64_t kPerturbedStream = 3;
constexpr std::uint64_t kRegeneratedStream = 4;

std::vector<double> score_or_unavailable(GeneratorOracle& oracle, const ScoreRequest& req) {
    try {
        return oracle.score(req);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::OracleUnavailable) throw;
        throw Error(ErrorCode::OracleUnavailable, std::string("score request failed: ") + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::OracleUnavailable, std::string("score request failed: ") + e.what());
    }
}

struct StepOutcome {
    bool stop = false;
    double mu_hat = 0.0;
    double epsilon = 0.0;
    double lower_bound = 0.0;
    std::string decision;
};

struct LoopOutcome {
    long tested = 0;
    long gated_out = 0;
    bool exhausted = false;
    std::vector<std::array<long, 2>> per_stage_counts;
    std::vector<TraceRow> trace;
};

// Draws perturbations until `step` asks to stop or the perturbation space runs dry.
LoopOutcome run_loop(const std::string& prompt, const gsdesign::DesignPlan& plan,
                     const textpert::PerturbationSpec& spec, const semgate::GateConfig& gate_cfg,
                     GeneratorOracle& oracle, const VerifyOptions& options, const seqtrial::TrialOptions& trial,
                     long max_gated_out, const std::function<StepOutcome(int)>& step) {
    gate_cfg.validate();
    spec.validate();
    LoopOutcome out;
    out.per_stage_counts.assign(static_cast<std::size_t>(plan.stages), {0, 0});

    semgate::EmbeddingVector original_emb;
    try {
        original_emb = oracle.embed(prompt);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::OracleUnavailable) throw;
        throw Error(ErrorCode::OracleUnavailable, std::string("embedding failed: ") + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::OracleUnavailable, std::string("embedding failed: ") + e.what());
    }

    std::vector<double> original_cache;
    auto original_slice = [&](int stage, int count) {
        if (original_cache.empty()) {
            original_cache = score_or_unavailable(
                oracle, {prompt, prompt, plan.max_per_group(), derive_seed(options.seed, kOriginalStream)});
            if (static_cast<int>(original_cache.size()) != plan.max_per_group())
                throw Error(ErrorCode::OracleUnavailable, "oracle returned a short original batch");
        }
        const int begin = plan.cumulative_per_group[static_cast<std::size_t>(stage - 1)] - count;
        return std::vector<double>(original_cache.begin() + begin, original_cache.begin() + begin + count);
    };

    Rng rng(spec.seed);
    std::set<std::string> seen;
    long draw = 0;
    for (;;) {
        if (max_gated_out >= 0 && out.gated_out >= max_gated_out) {
            out.exhausted = true;
            break;
        }
        textpert::PerturbedText pert;
        try {
            pert = textpert::perturb_once(prompt, spec, seen, rng);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ExhaustedPerturbations) throw;
            out.exhausted = true;
            break;
        }
        seen.insert(pert.text);
        const long index = draw++;

        TraceRow row;
        row.index = index;
        row.perturbed_text = pert.text;
        const auto g = semgate::gate(original_emb, pert.text, gate_cfg, oracle);
        row.similarity = g.similarity;
        if (!g.valid) {
            row.gated = true;
            row.decision = "gated";
            ++out.gated_out;
            if (options.on_row) options.on_row(row);
            out.trace.push_back(std::move(row));
            continue;
        }

        const std::string generation_prompt = options.defender ? options.defender->transform(pert.text) : pert.text;
        seqtrial::ScoreSupplier orig_supplier;
        if (options.regenerate_original) {
            orig_supplier = [&, index](int stage, int count) {
                return score_or_unavailable(
                    oracle, {prompt, prompt, count,
                             derive_seed(options.seed, kRegeneratedStream, static_cast<std::uint64_t>(index) * 64 + stage)});
            };
        } else {
            orig_supplier = original_slice;
        }
        seqtrial::ScoreSupplier pert_supplier = [&, index](int stage, int count) {
            return score_or_unavailable(
                oracle, {generation_prompt, prompt, count,
                         derive_seed(options.seed, kPerturbedStream, static_cast<std::uint64_t>(index) * 64 + stage)});
        };

        const auto ae = seqtrial::run_trial(orig_supplier, pert_supplier, plan, trial);
        ++out.tested;
        auto& cell = out.per_stage_counts[static_cast<std::size_t>(ae.stopped_at - 1)];
        ++cell[ae.indicator == 0 ? 0 : 1];

        row.indicator = ae.indicator;
        row.stopped_at = ae.stopped_at;
        for (const auto& d : ae.decisions) row.p_values.push_back(d.p_value);
        const auto s = step(ae.indicator);
        row.mu_hat = s.mu_hat;
        row.epsilon = s.epsilon;
        row.lower_bound = s.lower_bound;
        row.decision = s.decision;
        if (options.on_row) options.on_row(row);
        out.trace.push_back(std::move(row));
        if (s.stop) break;
    }
    return out;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string_view to_string(VerdictStatus s) { return s == VerdictStatus::Pass ? "pass" : "fail"; }

Verdict verify(const std::string& prompt, const concentration::VerificationTarget& target,
               const gsdesign::DesignPlan& plan, const textpert::PerturbationSpec& spec,
               const semgate::GateConfig& gate_cfg, GeneratorOracle& oracle, const VerifyOptions& options) {
    target.validate();
    seqtrial::TrialOptions trial;
    trial.policy = options.policy;
    trial.early_stopping = true;

    Verdict verdict;
    verdict.estimate = RobustnessEstimate::make(0, 0, target.sigma, BoundKind::Adaptive);
    Decision last = Decision::Continue;
    auto step = [&](int indicator) {
        auto [next, d] = concentration::update_and_decide(verdict.estimate, indicator, target);
        verdict.estimate = next;
        last = d;
        return StepOutcome{d != Decision::Continue, next.mu_hat, next.epsilon, next.lower_bound,
                           std::string(concentration::to_string(d))};
    };
    const long max_gated = options.max_gated_out >= 0 ? options.max_gated_out : 10 * target.j_max;
    auto loop = run_loop(prompt, plan, spec, gate_cfg, oracle, options, trial, max_gated, step);

    verdict.status = last == Decision::Pass ? VerdictStatus::Pass : VerdictStatus::Fail;
    verdict.perturbations_used = loop.tested;
    verdict.gated_out = loop.gated_out;
    verdict.per_stage_counts = std::move(loop.per_stage_counts);
    verdict.exhausted = loop.exhausted && last == Decision::Continue;
    verdict.trace = std::move(loop.trace);
    return verdict;
}

BaselineResult baseline_run(const std::string& prompt, long n_fixed, double sigma, const gsdesign::DesignPlan& plan,
                            const textpert::PerturbationSpec& spec, const semgate::GateConfig& gate_cfg,
                            GeneratorOracle& oracle, const VerifyOptions& options) {
    PROTIP_REQUIRE(n_fixed >= 1, ErrorCode::InvalidInput, "n_fixed must be >= 1");
    PROTIP_REQUIRE(sigma > 0.0 && sigma < 1.0, ErrorCode::InvalidInput, "sigma must lie in (0,1)");
    seqtrial::TrialOptions trial;
    trial.policy = seqtrial::TestPolicy::NormalityAdaptive;
    trial.early_stopping = false;

    long successes = 0;
    long n = 0;
    auto step = [&](int indicator) {
        successes += indicator;
        ++n;
        const auto est = RobustnessEstimate::make(successes, n, sigma, BoundKind::Hoeffding);
        const bool done = n >= n_fixed;
        return StepOutcome{done, est.mu_hat, est.epsilon, est.lower_bound, done ? "done" : "continue"};
    };
    const long max_gated = options.max_gated_out >= 0 ? options.max_gated_out : 10 * n_fixed;
    auto loop = run_loop(prompt, plan, spec, gate_cfg, oracle, options, trial, max_gated, step);
    if (n < n_fixed) {
        throw Error(ErrorCode::ExhaustedPerturbations,
                    "only " + std::to_string(n) + " of " + std::to_string(n_fixed) + " perturbations could be drawn");
    }
    BaselineResult out;
    out.estimate = RobustnessEstimate::make(successes, n, sigma, BoundKind::Hoeffding);
    out.per_stage_counts = std::move(loop.per_stage_counts);
    out.gated_out = loop.gated_out;
    out.trace = std::move(loop.trace);
    return out;
}

concentration::RobustnessEstimate baseline_estimate(const std::string& prompt, long n_fixed, double sigma,
                                                    const gsdesign::DesignPlan& plan,
                                                    const textpert::PerturbationSpec& spec,
                                                    const semgate::GateConfig& gate_cfg, GeneratorOracle& oracle,
                                                    const VerifyOptions& options) {
    return baseline_run(prompt, n_fixed, sigma, plan, spec, gate_cfg, oracle, options).estimate;
}

std::vector<std::pair<std::string, concentration::RobustnessEstimate>> rank_defenders(
    const std::string& prompt, const std::vector<defenders::Defender>& defenders, const BaselineConfig& config,
    GeneratorOracle& oracle) {
    PROTIP_REQUIRE(!defenders.empty(), ErrorCode::InvalidInput, "no defenders to rank");
    std::vector<std::pair<std::string, concentration::RobustnessEstimate>> out;
    for (const auto& d : defenders) {
        VerifyOptions opts = config.options;
        opts.defender = d;
        out.emplace_back(d.name, baseline_estimate(prompt, config.n_fixed, config.sigma, config.plan, config.spec,
                                                   config.gate, oracle, opts));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second.mu_hat != b.second.mu_hat) return a.second.mu_hat > b.second.mu_hat;
        return a.first < b.first;
    });
    return out;
}

void write_trace_header(std::ostream& out) {
    out << "index,perturbed_text,similarity,gated,indicator,stopped_at,p_values,mu_hat,epsilon,lower_bound,decision\n";
}

void write_trace_row(std::ostream& out, const TraceRow& row) {
    std::ostringstream ps;
    ps << std::setprecision(17);
    for (std::size_t i = 0; i < row.p_values.size(); ++i) {
        if (i) ps << ';';
        ps << row.p_values[i];
    }
    std::ostringstream line;
    line << std::setprecision(17);
    line << row.index << ',' << csv_quote(row.perturbed_text) << ',' << row.similarity << ',' << (row.gated ? 1 : 0)
         << ',';
    if (row.indicator) line << *row.indicator;
    line << ',';
    if (!row.gated) line << row.stopped_at;
    line << ',' << ps.str() << ',';
    if (!row.gated) line << row.mu_hat << ',' << row.epsilon << ',' << row.lower_bound;
    else line << ",,";
    line << ',' << row.decision << '\n';
    out << line.str();
    out.flush();
}

}  // namespace protip::verifier
