// protip: design inspection, verification runs, baselines, defender ranking,
// Monte Carlo studies, perturbation emission and a simulated oracle server.
//
// Exit codes: 0 pass, 1 fail, 2 usage or invalid input, 3 oracle failure,
// 4 anything else.

#include "protip/defenders.hpp"
#include "protip/error.hpp"
#include "protip/gsdesign.hpp"
#include "protip/protocol.hpp"
#include "protip/remote_oracle.hpp"
#include "protip/run_config.hpp"
#include "protip/simgen.hpp"
#include "protip/verifier.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace protip;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitOracle = 3;
constexpr int kExitOther = 4;

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::InvalidInput: return kExitUsage;
        case ErrorCode::OracleUnavailable: return kExitOracle;
        default: return kExitOther;
    }
}

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            PROTIP_REQUIRE(used == item.size(), ErrorCode::InvalidInput, "bad number '" + item + "'");
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidInput, "bad number '" + item + "'");
        }
    }
    return out;
}

std::vector<textpert::PerturbationMethod> parse_methods(const std::string& csv) {
    std::vector<textpert::PerturbationMethod> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(textpert::method_from_string(item));
    return out;
}

json plan_json(const gsdesign::DesignPlan& p) {
    return json{{"stages", p.stages},
                {"info_rates", p.info_rates},
                {"alpha", p.alpha},
                {"beta", p.beta},
                {"effect", p.effect},
                {"sd", p.sd},
                {"alpha_spend", p.alpha_spend},
                {"beta_spend", p.beta_spend},
                {"efficacy_z", p.efficacy_z},
                {"futility_z", p.futility_z},
                {"stage_levels", p.stage_levels},
                {"futility_p", p.futility_p},
                {"power", p.power},
                {"shift", p.shift},
                {"fixed_shift", p.fixed_shift},
                {"inflation", p.inflation},
                {"fixed_subjects", p.fixed_subjects},
                {"max_subjects_normal", p.max_subjects_normal},
                {"max_subjects", p.max_subjects},
                {"expected_subjects_h0", p.expected_subjects_h0},
                {"expected_subjects_h1", p.expected_subjects_h1},
                {"cumulative_per_group", p.cumulative_per_group}};
}

json estimate_json(const concentration::RobustnessEstimate& e) {
    return json{{"n", e.n},
                {"successes", e.successes},
                {"mu_hat", e.mu_hat},
                {"sigma", e.sigma},
                {"epsilon", e.epsilon},
                {"lower_bound", e.lower_bound},
                {"bound", e.bound == concentration::BoundKind::Adaptive ? "adaptive" : "hoeffding"}};
}

void print_design_table(const gsdesign::DesignPlan& p, std::ostream& os) {
    os << std::fixed;
    os << "stage  info   eff_z    fut_z    level     fut_p     cum_alpha cum_beta  power    n/group  subjects\n";
    for (int k = 0; k < p.stages; ++k) {
        const auto i = static_cast<std::size_t>(k);
        os << std::setw(5) << k + 1 << "  " << std::setprecision(3) << p.info_rates[i] << "  " << std::setprecision(4)
           << std::setw(7) << p.efficacy_z[i] << "  ";
        if (i < p.futility_z.size()) os << std::setw(7) << p.futility_z[i] << "  ";
        else os << "      -  ";
        os << std::setprecision(5) << p.stage_levels[i] << "  ";
        if (i < p.futility_p.size()) os << p.futility_p[i] << "  ";
        else os << "      -  ";
        os << p.alpha_spend[i] << "   " << p.beta_spend[i] << "   " << std::setprecision(4) << p.power[i] << "  "
           << std::setw(7) << p.cumulative_per_group[i] << "  " << std::setprecision(2)
           << p.max_subjects * p.info_rates[i] << '\n';
    }
    os << std::setprecision(4) << "max subjects " << p.max_subjects << " (normal scale " << p.max_subjects_normal
       << ", fixed design " << p.fixed_subjects << "), inflation " << p.inflation << '\n'
       << "expected subjects H0 " << std::setprecision(2) << p.expected_subjects_h0 << ", H1 " << p.expected_subjects_h1
       << '\n';
    os.unsetf(std::ios::floatfield);
}

// Optional overrides layered onto a base RunConfig (defaults or --config).
struct RunFlags {
    std::string config_path;
    std::optional<std::string> prompt, oracle, out, defender, policy, methods, keyboard, info_rates, sizing, alphabet;
    std::optional<std::uint64_t> seed;
    std::optional<double> target, sigma, gamma, rate, alpha, beta, effect, sd;
    std::optional<long> jmax;
    std::optional<int> stages;
    bool regenerate = false;

    void add_to(CLI::App& cmd, bool with_target) {
        cmd.add_option("--config", config_path, "JSON run config or a previous summary.json");
        cmd.add_option("--prompt", prompt, "prompt under verification");
        cmd.add_option("--seed", seed, "run seed");
        cmd.add_option("--oracle", oracle, "sim:<cfg>, subprocess:<cmd>, tcp:<host:port> or file:<path>");
        cmd.add_option("--out", out, "output directory");
        if (with_target) {
            cmd.add_option("--target", target, "robustness lower bound to verify");
            cmd.add_option("--jmax", jmax, "maximum number of perturbations");
        }
        cmd.add_option("--sigma", sigma, "confidence parameter");
        cmd.add_option("--gamma", gamma, "similarity gate threshold");
        cmd.add_option("--rate", rate, "perturbation rate");
        cmd.add_option("--methods", methods, "comma separated perturbation methods");
        cmd.add_option("--alphabet", alphabet, "insertion/substitution alphabet");
        cmd.add_option("--keyboard", keyboard, "keyboard adjacency file");
        cmd.add_option("--policy", policy, "fixed_welch or normality_adaptive");
        cmd.add_option("--defender", defender, "identity or dict:<word list>");
        cmd.add_option("--stages", stages, "number of stages");
        cmd.add_option("--info-rates", info_rates, "comma separated information rates");
        cmd.add_option("--alpha", alpha, "one-sided type I error");
        cmd.add_option("--beta", beta, "type II error");
        cmd.add_option("--effect", effect, "design effect");
        cmd.add_option("--sd", sd, "design standard deviation");
        cmd.add_option("--sizing", sizing, "rounded_cumulative or uniform_ceil");
        cmd.add_flag("--regenerate-original", regenerate, "draw fresh original scores per perturbation");
    }

    RunConfig resolve() const {
        RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        if (prompt) c.prompt = *prompt;
        if (seed) c.seed = *seed;
        if (oracle) c.oracle = *oracle;
        if (out) c.output_dir = *out;
        if (target) c.target.b_l = *target;
        if (sigma) c.target.sigma = *sigma;
        if (jmax) c.target.j_max = *jmax;
        if (gamma) c.gamma = *gamma;
        if (rate) c.perturbation.rate = *rate;
        if (methods) c.perturbation.methods = parse_methods(*methods);
        if (alphabet) c.perturbation.alphabet = *alphabet;
        if (keyboard) {
            c.keyboard_path = *keyboard;
            c.perturbation.keyboard = textpert::KeyboardMap::load(*keyboard);
        }
        if (policy) c.policy = seqtrial::policy_from_string(*policy);
        if (defender) c.defender = *defender;
        if (stages) c.design.stages = *stages;
        if (info_rates) c.design.info_rates = parse_doubles(*info_rates);
        if (alpha) c.design.alpha = *alpha;
        if (beta) c.design.beta = *beta;
        if (effect) c.design.effect = *effect;
        if (sd) c.design.sd = *sd;
        if (sizing) {
            if (*sizing == "uniform_ceil") c.design.sizing = gsdesign::StageSizing::UniformCeil;
            else if (*sizing == "rounded_cumulative") c.design.sizing = gsdesign::StageSizing::RoundedCumulative;
            else throw Error(ErrorCode::InvalidInput, "unknown stage sizing '" + *sizing + "'");
        }
        if (regenerate) c.regenerate_original = true;
        c.oracle = resolve_oracle_selector(c.oracle);
        c.validate();
        return c;
    }
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    PROTIP_REQUIRE(os.good(), ErrorCode::InvalidInput, "cannot write " + path.string());
    return os;
}

verifier::VerifyOptions options_for(const RunConfig& c) {
    verifier::VerifyOptions o;
    o.seed = c.oracle_seed();
    o.policy = c.policy;
    o.regenerate_original = c.regenerate_original;
    if (!c.defender.empty()) o.defender = defenders::from_spec(c.defender);
    return o;
}

json counts_json(const std::vector<std::array<long, 2>>& counts) {
    json arr = json::array();
    for (const auto& c : counts) arr.push_back({{"ae", c[0]}, {"non_ae", c[1]}});
    return arr;
}

int cmd_design(const gsdesign::DesignInput& in) {
    const auto plan = gsdesign::build_plan(in);
    print_design_table(plan, std::cout);
    std::cout << plan_json(plan).dump(2) << '\n';
    return kExitPass;
}

int cmd_verify(const RunFlags& flags) {
    const RunConfig cfg = flags.resolve();
    const auto plan = gsdesign::build_plan(cfg.design);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);

    auto trace = open_out(dir / "trace.csv");
    auto curve = open_out(dir / "curve.csv");
    verifier::write_trace_header(trace);
    curve << "n,mu_hat,epsilon,lower_bound\n" << std::setprecision(17);
    long n = 0;
    verifier::VerifyOptions opts = options_for(cfg);
    opts.on_row = [&](const verifier::TraceRow& row) {
        verifier::write_trace_row(trace, row);
        if (!row.gated) curve << ++n << ',' << row.mu_hat << ',' << row.epsilon << ',' << row.lower_bound << '\n';
    };

    json summary{{"config", json::parse(cfg.to_json())}, {"plan", plan_json(plan)}};
    int code = kExitOther;
    try {
        auto oracle = make_oracle(cfg.oracle);
        const auto v =
            verifier::verify(cfg.prompt, cfg.target, plan, cfg.perturbation_spec(), cfg.gate(), *oracle, opts);
        summary["status"] = std::string(verifier::to_string(v.status));
        summary["estimate"] = estimate_json(v.estimate);
        summary["lower_bound"] = v.estimate.lower_bound;
        summary["perturbations_used"] = v.perturbations_used;
        summary["gated_out"] = v.gated_out;
        summary["exhausted"] = v.exhausted;
        summary["per_stage_counts"] = counts_json(v.per_stage_counts);
        code = v.status == verifier::VerdictStatus::Pass ? kExitPass : kExitFail;
    } catch (const Error& e) {
        summary["status"] = "error";
        summary["error"] = e.what();
        code = exit_code_for(e);
        std::cerr << "protip: " << e.what() << '\n';
    }
    auto s = open_out(dir / "summary.json");
    s << summary.dump(2) << '\n';
    std::cout << "status " << summary["status"].get<std::string>();
    if (summary.contains("estimate"))
        std::cout << "  n " << summary["estimate"]["n"] << "  mu_hat " << summary["estimate"]["mu_hat"]
                  << "  lower_bound " << summary["lower_bound"];
    std::cout << '\n';
    return code;
}

int cmd_baseline(const RunFlags& flags, long n_fixed) {
    RunConfig cfg = flags.resolve();
    const auto plan = gsdesign::build_plan(cfg.design);
    auto oracle = make_oracle(cfg.oracle);
    const auto r = verifier::baseline_run(cfg.prompt, n_fixed, cfg.target.sigma, plan, cfg.perturbation_spec(),
                                          cfg.gate(), *oracle, options_for(cfg));
    json out{{"config", json::parse(cfg.to_json())},
             {"n_fixed", n_fixed},
             {"estimate", estimate_json(r.estimate)},
             {"gated_out", r.gated_out},
             {"per_stage_counts", counts_json(r.per_stage_counts)}};
    const bool pass = r.estimate.raw_lower_bound() >= cfg.target.b_l;
    out["status"] = pass ? "pass" : "fail";
    fs::create_directories(cfg.output_dir);
    auto s = open_out(fs::path(cfg.output_dir) / "baseline.json");
    s << out.dump(2) << '\n';
    std::cout << out.dump(2) << '\n';
    return pass ? kExitPass : kExitFail;
}

int cmd_rank(const RunFlags& flags, long n_fixed, const std::vector<std::string>& specs) {
    RunConfig cfg = flags.resolve();
    PROTIP_REQUIRE(!specs.empty(), ErrorCode::InvalidInput, "at least one --defender-spec is required");
    verifier::BaselineConfig bc;
    bc.n_fixed = n_fixed;
    bc.sigma = cfg.target.sigma;
    bc.plan = gsdesign::build_plan(cfg.design);
    bc.spec = cfg.perturbation_spec();
    bc.gate = cfg.gate();
    bc.options = options_for(cfg);
    std::vector<defenders::Defender> ds;
    for (const auto& s : specs) ds.push_back(defenders::from_spec(s));
    auto oracle = make_oracle(cfg.oracle);
    const auto ranking = verifier::rank_defenders(cfg.prompt, ds, bc, *oracle);
    json arr = json::array();
    for (const auto& [name, est] : ranking) {
        json e = estimate_json(est);
        e["defender"] = name;
        arr.push_back(e);
        std::cout << std::left << std::setw(24) << name << " mu_hat " << est.mu_hat << "  lower_bound "
                  << est.lower_bound << '\n';
    }
    fs::create_directories(cfg.output_dir);
    auto s = open_out(fs::path(cfg.output_dir) / "ranking.json");
    s << arr.dump(2) << '\n';
    return kExitPass;
}

int cmd_simulate(const std::string& scenario_path, long trials, const std::string& model, const std::string& policy,
                 unsigned threads, const std::string& design_json, const std::string& csv_path) {
    const auto scenario = scenario_path.empty() ? simgen::SimOracleConfig{} : simgen::SimOracleConfig::load(scenario_path);
    PROTIP_REQUIRE(trials >= simgen::kMinOCTrials, ErrorCode::InvalidInput,
                   "--trials must be at least " + std::to_string(simgen::kMinOCTrials));
    gsdesign::DesignInput in;
    if (!design_json.empty()) {
        RunConfig c = RunConfig::load(design_json);
        in = c.design;
    }
    const auto plan = gsdesign::build_plan(in);
    simgen::OCOptions opts;
    opts.model = simgen::model_from_string(model);
    opts.policy = seqtrial::policy_from_string(policy);
    opts.threads = threads;
    const auto report = simgen::mc_operating_characteristics(plan, scenario, trials, opts);
    std::cout << report.to_json() << '\n';
    if (csv_path.empty()) {
        std::cout << '\n' << report.to_csv();
    } else {
        auto os = open_out(csv_path);
        os << report.to_csv();
    }
    return kExitPass;
}

int cmd_perturb(const std::string& text, double rate, int count, std::uint64_t seed, const std::string& methods,
                const std::string& oracle_selector) {
    textpert::PerturbationSpec spec;
    spec.rate = rate;
    spec.seed = seed;
    if (!methods.empty()) spec.methods = parse_methods(methods);
    spec.validate();
    PROTIP_REQUIRE(count >= 1, ErrorCode::InvalidInput, "--count must be >= 1");

    std::unique_ptr<semgate::EmbeddingProvider> provider;
    if (oracle_selector.empty()) provider = std::make_unique<semgate::StubProvider>(seed);
    else provider = make_oracle(oracle_selector);
    const auto original = provider->embed(text);

    Rng rng(spec.seed);
    std::set<std::string> seen;
    std::cout << std::fixed << std::setprecision(6);
    for (int i = 0; i < count; ++i) {
        const auto p = textpert::perturb_once(text, spec, seen, rng);
        seen.insert(p.text);
        const double s = semgate::cosine(original, provider->embed(p.text));
        std::cout << s << '\t' << p.text << '\n';
    }
    return kExitPass;
}

int cmd_serve(const std::string& scenario, const std::string& file, int listen) {
    std::unique_ptr<GeneratorOracle> oracle;
    if (!file.empty()) oracle = FileOracle::load(file);
    else oracle = make_oracle("sim:" + scenario);
    if (listen < 0) {
        protocol::serve(*oracle, std::cin, std::cout);
        return kExitPass;
    }
    TcpOracleServer server(*oracle, static_cast<std::uint16_t>(listen));
    std::cout << "listening 127.0.0.1:" << server.port() << std::endl;
    for (;;) server.serve_one();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic robustness verification for text-to-image prompts"};
    app.require_subcommand(1);

    gsdesign::DesignInput design_in;
    std::string design_rates;
    std::string design_sizing = "rounded_cumulative";
    auto* design = app.add_subcommand("design", "print the group-sequential plan");
    design->add_option("--stages", design_in.stages, "number of stages");
    design->add_option("--alpha", design_in.alpha, "one-sided type I error");
    design->add_option("--beta", design_in.beta, "type II error");
    design->add_option("--effect", design_in.effect, "design effect");
    design->add_option("--sd", design_in.sd, "design standard deviation");
    design->add_option("--info-rates", design_rates, "comma separated information rates");
    design->add_option("--sizing", design_sizing, "rounded_cumulative or uniform_ceil");

    RunFlags verify_flags;
    auto* verify = app.add_subcommand("verify", "adaptive verification of a robustness target");
    verify_flags.add_to(*verify, true);

    RunFlags baseline_flags;
    long baseline_n = 1000;
    auto* baseline = app.add_subcommand("baseline", "fixed-size estimate with a Hoeffding interval");
    baseline_flags.add_to(*baseline, true);
    baseline->add_option("--n-fixed", baseline_n, "number of perturbations");

    RunFlags rank_flags;
    long rank_n = 1000;
    std::vector<std::string> rank_specs;
    auto* rank = app.add_subcommand("rank", "rank defenders by baseline robustness");
    rank_flags.add_to(*rank, false);
    rank->add_option("--n-fixed", rank_n, "perturbations per defender");
    rank->add_option("--defender-spec", rank_specs, "identity or dict:<word list>, repeatable");

    std::string sim_scenario, sim_model = "scores", sim_policy = "fixed_welch", sim_design, sim_csv;
    long sim_trials = 100000;
    unsigned sim_threads = 0;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo operating characteristics");
    simulate->add_option("--scenario", sim_scenario, "simulated oracle config");
    simulate->add_option("--trials", sim_trials, "number of simulated trials");
    simulate->add_option("--model", sim_model, "scores or canonical");
    simulate->add_option("--policy", sim_policy, "fixed_welch or normality_adaptive");
    simulate->add_option("--threads", sim_threads, "worker threads, 0 for all cores");
    simulate->add_option("--design", sim_design, "run config supplying the design");
    simulate->add_option("--csv", sim_csv, "write the per-stage CSV here instead of stdout");

    std::string pert_text, pert_methods, pert_oracle;
    double pert_rate = 0.1;
    int pert_count = 1;
    std::uint64_t pert_seed = 0;
    auto* perturb = app.add_subcommand("perturb", "emit distinct perturbations with their similarity");
    perturb->add_option("text", pert_text, "text to perturb")->required();
    perturb->add_option("--rate", pert_rate, "perturbation rate");
    perturb->add_option("--count", pert_count, "number of perturbations");
    perturb->add_option("--seed", pert_seed, "seed")->required();
    perturb->add_option("--methods", pert_methods, "comma separated methods");
    perturb->add_option("--oracle", pert_oracle, "oracle used for embeddings (default: hashed stub)");

    std::string serve_scenario, serve_file;
    int serve_port = -1;
    auto* serve_cmd = app.add_subcommand("serve", "serve an oracle over stdio or TCP");
    serve_cmd->add_option("--scenario", serve_scenario, "simulated oracle config file or inline JSON");
    serve_cmd->add_option("--file", serve_file, "serve a file oracle instead");
    serve_cmd->add_option("--listen", serve_port, "TCP port on 127.0.0.1 (0 picks one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (*design) {
            if (!design_rates.empty()) design_in.info_rates = parse_doubles(design_rates);
            if (design_sizing == "uniform_ceil") design_in.sizing = gsdesign::StageSizing::UniformCeil;
            else if (design_sizing != "rounded_cumulative")
                throw Error(ErrorCode::InvalidInput, "unknown stage sizing '" + design_sizing + "'");
            return cmd_design(design_in);
        }
        if (*verify) return cmd_verify(verify_flags);
        if (*baseline) return cmd_baseline(baseline_flags, baseline_n);
        if (*rank) return cmd_rank(rank_flags, rank_n, rank_specs);
        if (*simulate)
            return cmd_simulate(sim_scenario, sim_trials, sim_model, sim_policy, sim_threads, sim_design, sim_csv);
        if (*perturb) return cmd_perturb(pert_text, pert_rate, pert_count, pert_seed, pert_methods, pert_oracle);
        if (*serve_cmd) return cmd_serve(serve_scenario, serve_file, serve_port);
    } catch (const Error& e) {
        std::cerr << "protip: " << e.what() << '\n';
        if (e.code() == ErrorCode::InvalidInput) std::cerr << app.help();
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "protip: " << e.what() << '\n';
        return kExitOther;
    }
    return kExitUsage;
}
