#include "protip/simgen.hpp"

#include "protip/error.hpp"
#include "protip/verifier.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

namespace protip::simgen {

namespace {

using nlohmann::json;

unsigned resolve_threads(unsigned requested, long work) {
    unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::clamp<long>(static_cast<long>(t), 1, std::max<long>(1, work)));
}

// Runs body(begin, end, slot) over [0, n) split into contiguous chunks.
template <class Body>
void parallel_chunks(long n, unsigned threads, Body body) {
    if (threads <= 1) {
        body(0L, n, 0u);
        return;
    }
    std::vector<std::thread> pool;
    const long chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const long begin = std::min<long>(n, static_cast<long>(t) * chunk);
        const long end = std::min<long>(n, begin + chunk);
        pool.emplace_back([=, &body] { body(begin, end, t); });
    }
    for (auto& th : pool) th.join();
}

struct Tally {
    std::vector<long> efficacy;
    std::vector<long> futility;
    long final_accept = 0;
    long ae_trials = 0;
    long ae_accepts = 0;
    long non_ae_rejects = 0;
    // Trials ending at each stage; subject totals follow from these exactly,
    // so the report does not depend on how trials were split across threads.
    std::vector<long> stopped;

    explicit Tally(int K)
        : efficacy(static_cast<std::size_t>(K), 0),
          futility(static_cast<std::size_t>(K - 1), 0),
          stopped(static_cast<std::size_t>(K), 0) {}

    void merge(const Tally& o) {
        for (std::size_t i = 0; i < efficacy.size(); ++i) efficacy[i] += o.efficacy[i];
        for (std::size_t i = 0; i < futility.size(); ++i) futility[i] += o.futility[i];
        final_accept += o.final_accept;
        ae_trials += o.ae_trials;
        ae_accepts += o.ae_accepts;
        non_ae_rejects += o.non_ae_rejects;
        for (std::size_t i = 0; i < stopped.size(); ++i) stopped[i] += o.stopped[i];
    }

    void record(const seqtrial::InterimDecision& d, bool is_ae) {
        const auto k = static_cast<std::size_t>(d.stage - 1);
        switch (d.kind) {
            case seqtrial::DecisionKind::StopEfficacy:
            case seqtrial::DecisionKind::FinalReject: ++efficacy[k]; break;
            case seqtrial::DecisionKind::StopFutility: ++futility[k]; break;
            case seqtrial::DecisionKind::FinalAccept: ++final_accept; break;
            case seqtrial::DecisionKind::Continue: break;
        }
        const bool rejected =
            d.kind == seqtrial::DecisionKind::StopEfficacy || d.kind == seqtrial::DecisionKind::FinalReject;
        if (is_ae) {
            ++ae_trials;
            if (!rejected) ++ae_accepts;
        } else if (rejected) {
            ++non_ae_rejects;
        }
        ++stopped[k];
    }
};

double ae_drift(const gsdesign::DesignPlan& plan, const SimOracleConfig& cfg) {
    return cfg.ae_shift / (plan.effect / plan.sd) * plan.drift_h1();
}

seqtrial::InterimDecision canonical_trial(const gsdesign::DesignPlan& plan, double drift, Rng& rng) {
    std::normal_distribution<double> nd;
    double s = 0.0;
    double t_prev = 0.0;
    seqtrial::InterimDecision d;
    for (int k = 1; k <= plan.stages; ++k) {
        const double t = plan.info_rates[static_cast<std::size_t>(k - 1)];
        const double dt = t - t_prev;
        s += drift * dt + std::sqrt(dt) * nd(rng);
        t_prev = t;
        stattests::TestResult r;
        r.statistic = s / std::sqrt(t);
        r.z_equivalent = r.statistic;
        r.p_one_sided = 0.5 * std::erfc(r.statistic / std::numbers::sqrt2);
        d = seqtrial::interim_decide(r, k, plan);
        if (d.kind != seqtrial::DecisionKind::Continue) break;
    }
    return d;
}

}  // namespace

std::string_view to_string(ScoreFamily f) {
    switch (f) {
        case ScoreFamily::Normal: return "normal";
        case ScoreFamily::LogNormal: return "lognormal";
        case ScoreFamily::Mixture: return "mixture";
    }
    return "unknown";
}

ScoreFamily family_from_string(std::string_view name) {
    if (name == "normal") return ScoreFamily::Normal;
    if (name == "lognormal") return ScoreFamily::LogNormal;
    if (name == "mixture") return ScoreFamily::Mixture;
    throw Error(ErrorCode::InvalidInput, "unknown score family '" + std::string(name) + "'");
}

std::string_view to_string(TrialModel m) { return m == TrialModel::Scores ? "scores" : "canonical"; }

TrialModel model_from_string(std::string_view name) {
    if (name == "scores") return TrialModel::Scores;
    if (name == "canonical") return TrialModel::Canonical;
    throw Error(ErrorCode::InvalidInput, "unknown trial model '" + std::string(name) + "'");
}

void SimOracleConfig::validate() const {
    PROTIP_REQUIRE(std::isfinite(base_mean), ErrorCode::InvalidInput, "base_mean must be finite");
    PROTIP_REQUIRE(std::isfinite(base_sd) && base_sd > 0.0, ErrorCode::InvalidInput, "base_sd must be > 0");
    PROTIP_REQUIRE(std::isfinite(ae_shift), ErrorCode::InvalidInput, "ae_shift must be finite");
    PROTIP_REQUIRE(ae_fraction >= 0.0 && ae_fraction <= 1.0, ErrorCode::InvalidInput, "ae_fraction must lie in [0,1]");
    PROTIP_REQUIRE(embed_noise >= 0.0 && std::isfinite(embed_noise), ErrorCode::InvalidInput, "embed_noise must be >= 0");
    PROTIP_REQUIRE(embed_dim >= 2, ErrorCode::InvalidInput, "embed_dim must be >= 2");
    PROTIP_REQUIRE(family != ScoreFamily::LogNormal || base_mean > 0.0, ErrorCode::InvalidInput,
                   "lognormal scores need base_mean > 0");
}

std::string SimOracleConfig::to_json() const {
    json j{{"base_mean", base_mean}, {"base_sd", base_sd},         {"ae_shift", ae_shift},
           {"ae_fraction", ae_fraction}, {"distribution", std::string(simgen::to_string(family))},
           {"seed", seed},           {"embed_noise", embed_noise}, {"embed_dim", embed_dim}};
    return j.dump();
}

SimOracleConfig SimOracleConfig::from_json(const std::string& text) {
    SimOracleConfig c;
    try {
        const json j = json::parse(text);
        c.base_mean = j.value("base_mean", c.base_mean);
        c.base_sd = j.value("base_sd", c.base_sd);
        c.ae_shift = j.value("ae_shift", c.ae_shift);
        c.ae_fraction = j.value("ae_fraction", c.ae_fraction);
        c.family = family_from_string(j.value("distribution", std::string("normal")));
        c.seed = j.value("seed", c.seed);
        c.embed_noise = j.value("embed_noise", c.embed_noise);
        c.embed_dim = j.value("embed_dim", c.embed_dim);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("sim oracle config: ") + e.what());
    }
    c.validate();
    return c;
}

SimOracleConfig SimOracleConfig::load(const std::string& path) {
    std::ifstream in(path);
    PROTIP_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open sim oracle config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<double> sim_scores(const SimOracleConfig& cfg, bool is_ae, int n, Rng& rng) {
    PROTIP_REQUIRE(n >= 1, ErrorCode::InvalidInput, "score count must be >= 1");
    const double shift = is_ae ? cfg.ae_shift * cfg.base_sd : 0.0;
    std::vector<double> out(static_cast<std::size_t>(n));
    switch (cfg.family) {
        case ScoreFamily::Normal: {
            std::normal_distribution<double> nd(cfg.base_mean - shift, cfg.base_sd);
            for (auto& x : out) x = nd(rng);
            break;
        }
        case ScoreFamily::LogNormal: {
            const double cv2 = (cfg.base_sd / cfg.base_mean) * (cfg.base_sd / cfg.base_mean);
            const double s2 = std::log1p(cv2);
            std::lognormal_distribution<double> ld(std::log(cfg.base_mean) - 0.5 * s2, std::sqrt(s2));
            for (auto& x : out) x = ld(rng) - shift;
            break;
        }
        case ScoreFamily::Mixture: {
            // Two components at mean -+ 0.8 sd with sd 0.6 sd: overall mean and sd preserved.
            std::bernoulli_distribution coin(0.5);
            std::normal_distribution<double> nd(0.0, 0.6 * cfg.base_sd);
            for (auto& x : out) {
                const double centre = cfg.base_mean + (coin(rng) ? 0.8 : -0.8) * cfg.base_sd;
                x = centre + nd(rng) - shift;
            }
            break;
        }
    }
    for (auto& x : out) x = std::clamp(x, 0.0, 100.0);
    return out;
}

SimOracle::SimOracle(SimOracleConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

semgate::EmbeddingVector SimOracle::embed(const std::string& text) {
    std::vector<double> v(cfg_.embed_dim, 0.0);
    v[0] = 1.0;
    if (cfg_.embed_noise > 0.0) {
        Rng rng(derive_seed(cfg_.seed, 0xE3BED, hash_text(text)));
        std::normal_distribution<double> nd;
        std::vector<double> noise(cfg_.embed_dim);
        double ss = 0.0;
        for (auto& x : noise) {
            x = nd(rng);
            ss += x * x;
        }
        const double scale = cfg_.embed_noise / std::sqrt(ss);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * noise[i];
    }
    return semgate::EmbeddingVector(std::move(v));
}

bool SimOracle::is_ae(const std::string& prompt, const std::string& caption) {
    if (prompt == caption) return false;
    std::lock_guard lock(mu_);
    if (auto it = status_.find(prompt); it != status_.end()) return it->second;
    Rng rng(derive_seed(cfg_.seed, 0xAE, hash_text(prompt)));
    const bool ae = std::bernoulli_distribution(cfg_.ae_fraction)(rng);
    status_.emplace(prompt, ae);
    return ae;
}

std::vector<double> SimOracle::score(const ScoreRequest& request) {
    PROTIP_REQUIRE(request.count >= 1, ErrorCode::InvalidInput, "score count must be >= 1");
    const bool ae = is_ae(request.prompt, request.caption);
    {
        std::lock_guard lock(mu_);
        ++score_requests_;
    }
    Rng rng(derive_seed(cfg_.seed, request.seed, hash_text(request.prompt)));
    return sim_scores(cfg_, ae, request.count, rng);
}

long SimOracle::score_requests() const {
    std::lock_guard lock(mu_);
    return score_requests_;
}

double mcse(double p, long trials) {
    if (trials <= 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

OCReport mc_operating_characteristics(const gsdesign::DesignPlan& plan, const SimOracleConfig& scenario, long trials,
                                      const OCOptions& options) {
    PROTIP_REQUIRE(trials >= kMinOCTrials, ErrorCode::InvalidInput,
                   "at least " + std::to_string(kMinOCTrials) + " trials required");
    scenario.validate();
    const int K = plan.stages;
    const unsigned threads = resolve_threads(options.threads, trials / 256 + 1);
    std::vector<Tally> tallies(threads, Tally(K));
    const double drift_ae = ae_drift(plan, scenario);

    parallel_chunks(trials, threads, [&](long begin, long end, unsigned slot) {
        Tally& tally = tallies[slot];
        seqtrial::TrialOptions trial;
        trial.policy = options.policy;
        for (long i = begin; i < end; ++i) {
            Rng rng(derive_seed(scenario.seed, static_cast<std::uint64_t>(i)));
            const bool ae = std::bernoulli_distribution(scenario.ae_fraction)(rng);
            if (options.model == TrialModel::Canonical) {
                const auto d = canonical_trial(plan, ae ? drift_ae : 0.0, rng);
                tally.record(d, ae);
            } else {
                seqtrial::ScoreSupplier orig = [&](int, int count) { return sim_scores(scenario, false, count, rng); };
                seqtrial::ScoreSupplier pert = [&](int, int count) { return sim_scores(scenario, ae, count, rng); };
                const auto res = seqtrial::run_trial(orig, pert, plan, trial);
                tally.record(res.decisions.back(), ae);
            }
        }
    });
    Tally total(K);
    for (const auto& t : tallies) total.merge(t);

    OCReport r;
    r.trials = trials;
    r.model = options.model;
    const double n = static_cast<double>(trials);
    long rejects = 0;
    for (long c : total.efficacy) {
        r.efficacy_by_stage.push_back(static_cast<double>(c) / n);
        r.efficacy_mcse.push_back(mcse(static_cast<double>(c) / n, trials));
        rejects += c;
    }
    for (long c : total.futility) {
        r.futility_by_stage.push_back(static_cast<double>(c) / n);
        r.futility_mcse.push_back(mcse(static_cast<double>(c) / n, trials));
    }
    r.final_accept = static_cast<double>(total.final_accept) / n;
    r.rejection_rate = static_cast<double>(rejects) / n;
    r.rejection_mcse = mcse(r.rejection_rate, trials);
    r.ae_trials = total.ae_trials;
    const long non_ae = trials - total.ae_trials;
    r.type1_rate = non_ae > 0 ? static_cast<double>(total.non_ae_rejects) / static_cast<double>(non_ae) : 0.0;
    r.type2_rate = total.ae_trials > 0 ? static_cast<double>(total.ae_accepts) / static_cast<double>(total.ae_trials) : 0.0;
    double subjects = 0.0, subjects_sq = 0.0;
    for (int k = 0; k < K; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        // Images over both groups for a trial ending at stage k+1.
        const double used = options.model == TrialModel::Canonical ? plan.max_subjects * plan.info_rates[kk]
                                                                   : 2.0 * plan.cumulative_per_group[kk];
        subjects += used * static_cast<double>(total.stopped[kk]);
        subjects_sq += used * used * static_cast<double>(total.stopped[kk]);
    }
    r.mean_subjects = subjects / n;
    const double var = std::max(0.0, subjects_sq / n - r.mean_subjects * r.mean_subjects);
    r.mean_subjects_mcse = std::sqrt(var / n);
    return r;
}

std::string OCReport::to_json() const {
    json j{{"trials", trials},
           {"model", std::string(simgen::to_string(model))},
           {"efficacy_by_stage", efficacy_by_stage},
           {"futility_by_stage", futility_by_stage},
           {"final_accept", final_accept},
           {"rejection_rate", rejection_rate},
           {"type1_rate", type1_rate},
           {"type2_rate", type2_rate},
           {"ae_trials", ae_trials},
           {"mean_subjects", mean_subjects},
           {"efficacy_mcse", efficacy_mcse},
           {"futility_mcse", futility_mcse},
           {"rejection_mcse", rejection_mcse},
           {"mean_subjects_mcse", mean_subjects_mcse}};
    return j.dump(2);
}

std::string OCReport::to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "stage,efficacy,efficacy_mcse,futility,futility_mcse\n";
    for (std::size_t k = 0; k < efficacy_by_stage.size(); ++k) {
        os << k + 1 << ',' << efficacy_by_stage[k] << ',' << efficacy_mcse[k] << ',';
        if (k < futility_by_stage.size()) os << futility_by_stage[k] << ',' << futility_mcse[k];
        else os << final_accept << ',' << mcse(final_accept, trials);
        os << '\n';
    }
    return os.str();
}

double implied_robustness(const gsdesign::DesignPlan& plan, const SimOracleConfig& scenario) {
    const double r0 = 1.0 - gsdesign::crossing_probabilities(plan, 0.0).total_efficacy();
    const double r1 = 1.0 - gsdesign::crossing_probabilities(plan, ae_drift(plan, scenario)).total_efficacy();
    return (1.0 - scenario.ae_fraction) * r0 + scenario.ae_fraction * r1;
}

double calibrate_ae_fraction(const gsdesign::DesignPlan& plan, SimOracleConfig scenario, double target) {
    scenario.ae_fraction = 0.0;
    const double r0 = implied_robustness(plan, scenario);
    scenario.ae_fraction = 1.0;
    const double r1 = implied_robustness(plan, scenario);
    if (r0 == r1) return 0.0;
    return std::clamp((r0 - target) / (r0 - r1), 0.0, 1.0);
}

VerificationOC mc_verification(const std::string& prompt, const concentration::VerificationTarget& target,
                               const gsdesign::DesignPlan& plan, const textpert::PerturbationSpec& spec,
                               const semgate::GateConfig& gate, const SimOracleConfig& scenario, long runs,
                               const MCVerifyOptions& options) {
    const std::uint64_t seed = options.seed;
    PROTIP_REQUIRE(runs >= 1, ErrorCode::InvalidInput, "runs must be >= 1");
    VerificationOC out;
    out.runs = runs;
    out.perturbations_used.assign(static_cast<std::size_t>(runs), 0);
    out.passed.assign(static_cast<std::size_t>(runs), false);
    parallel_chunks(runs, resolve_threads(options.threads, runs), [&](long begin, long end, unsigned) {
        for (long i = begin; i < end; ++i) {
            SimOracleConfig cfg = scenario;
            cfg.seed = derive_seed(seed, 1, static_cast<std::uint64_t>(i));
            SimOracle oracle(cfg);
            textpert::PerturbationSpec s = spec;
            s.seed = derive_seed(seed, 2, static_cast<std::uint64_t>(i));
            verifier::VerifyOptions opts;
            opts.seed = derive_seed(seed, 3, static_cast<std::uint64_t>(i));
            opts.regenerate_original = options.regenerate_original;
            opts.policy = options.policy;
            const auto v = verifier::verify(prompt, target, plan, s, gate, oracle, opts);
            out.perturbations_used[static_cast<std::size_t>(i)] = v.perturbations_used;
            out.passed[static_cast<std::size_t>(i)] = v.status == verifier::VerdictStatus::Pass;
        }
    });
    double sum = 0.0;
    for (long i = 0; i < runs; ++i) {
        out.passes += out.passed[static_cast<std::size_t>(i)];
        sum += static_cast<double>(out.perturbations_used[static_cast<std::size_t>(i)]);
    }
    out.mean_perturbations = sum / static_cast<double>(runs);
    return out;
}

}  // namespace protip::simgen
