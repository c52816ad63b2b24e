#include "protip/run_config.hpp"

#include "protip/error.hpp"
#include "protip/remote_oracle.hpp"
#include "protip/rng.hpp"
#include "protip/simgen.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace protip {

namespace {

using nlohmann::json;

std::string_view sizing_name(gsdesign::StageSizing s) {
    return s == gsdesign::StageSizing::UniformCeil ? "uniform_ceil" : "rounded_cumulative";
}

gsdesign::StageSizing sizing_from(const std::string& s) {
    if (s == "uniform_ceil") return gsdesign::StageSizing::UniformCeil;
    if (s == "rounded_cumulative") return gsdesign::StageSizing::RoundedCumulative;
    throw Error(ErrorCode::InvalidInput, "unknown stage sizing '" + s + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    PROTIP_REQUIRE(in.good(), ErrorCode::InvalidInput, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

textpert::PerturbationSpec RunConfig::perturbation_spec() const {
    textpert::PerturbationSpec s = perturbation;
    s.seed = derive_seed(seed.value_or(0), 1);
    return s;
}

std::uint64_t RunConfig::oracle_seed() const { return derive_seed(seed.value_or(0), 2); }

void RunConfig::validate() const {
    PROTIP_REQUIRE(seed.has_value(), ErrorCode::InvalidInput, "a seed is required");
    PROTIP_REQUIRE(!oracle.empty(), ErrorCode::InvalidInput, "an oracle selector is required");
    PROTIP_REQUIRE(!prompt.empty(), ErrorCode::InvalidInput, "prompt must not be empty");
    perturbation.validate();
    gate().validate();
    target.validate();
}

std::string RunConfig::to_json() const {
    json methods = json::array();
    for (auto m : perturbation.methods) methods.push_back(std::string(textpert::to_string(m)));
    json j{
        {"prompt", prompt},
        {"seed", seed ? json(*seed) : json(nullptr)},
        {"oracle", oracle},
        {"output_dir", output_dir},
        {"design",
         {{"stages", design.stages},
          {"info_rates", design.info_rates},
          {"alpha", design.alpha},
          {"beta", design.beta},
          {"effect", design.effect},
          {"sd", design.sd},
          {"sizing", std::string(sizing_name(design.sizing))}}},
        {"perturbation",
         {{"rate", perturbation.rate},
          {"methods", methods},
          {"alphabet", perturbation.alphabet},
          {"keyboard", keyboard_path}}},
        {"gate", {{"gamma", gamma ? json(*gamma) : json(nullptr)}}},
        {"target", {{"lower_bound", target.b_l}, {"sigma", target.sigma}, {"j_max", target.j_max}}},
        {"policy", std::string(seqtrial::to_string(policy))},
        {"regenerate_original", regenerate_original},
        {"defender", defender},
    };
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    try {
        json j = json::parse(text);
        if (j.contains("config")) j = j.at("config");  // a run summary
        c.prompt = j.value("prompt", c.prompt);
        if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
        c.oracle = j.value("oracle", c.oracle);
        c.output_dir = j.value("output_dir", c.output_dir);
        if (j.contains("design")) {
            const auto& d = j["design"];
            c.design.stages = d.value("stages", c.design.stages);
            c.design.info_rates = d.value("info_rates", c.design.info_rates);
            c.design.alpha = d.value("alpha", c.design.alpha);
            c.design.beta = d.value("beta", c.design.beta);
            c.design.effect = d.value("effect", c.design.effect);
            c.design.sd = d.value("sd", c.design.sd);
            c.design.sizing = sizing_from(d.value("sizing", std::string(sizing_name(c.design.sizing))));
        }
        if (j.contains("perturbation")) {
            const auto& p = j["perturbation"];
            c.perturbation.rate = p.value("rate", c.perturbation.rate);
            if (p.contains("methods")) {
                c.perturbation.methods.clear();
                for (const auto& m : p["methods"]) c.perturbation.methods.push_back(textpert::method_from_string(m.get<std::string>()));
            }
            c.perturbation.alphabet = p.value("alphabet", c.perturbation.alphabet);
            c.keyboard_path = p.value("keyboard", std::string());
            if (!c.keyboard_path.empty()) c.perturbation.keyboard = textpert::KeyboardMap::load(c.keyboard_path);
        }
        if (j.contains("gate") && j["gate"].contains("gamma") && !j["gate"]["gamma"].is_null())
            c.gamma = j["gate"]["gamma"].get<double>();
        if (j.contains("target")) {
            const auto& t = j["target"];
            c.target.b_l = t.value("lower_bound", c.target.b_l);
            c.target.sigma = t.value("sigma", c.target.sigma);
            c.target.j_max = t.value("j_max", c.target.j_max);
        }
        c.policy = seqtrial::policy_from_string(j.value("policy", std::string(seqtrial::to_string(c.policy))));
        c.regenerate_original = j.value("regenerate_original", c.regenerate_original);
        c.defender = j.value("defender", c.defender);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_json(read_file(path)); }

std::string resolve_oracle_selector(const std::string& configured) {
    const char* env = std::getenv("PROTIP_ORACLE");
    if (env && *env) return env;
    return configured;
}

std::unique_ptr<GeneratorOracle> make_oracle(const std::string& selector) {
    const auto colon = selector.find(':');
    PROTIP_REQUIRE(colon != std::string::npos, ErrorCode::InvalidInput, "oracle selector needs a kind: '" + selector + "'");
    const std::string kind = selector.substr(0, colon);
    const std::string arg = selector.substr(colon + 1);
    if (kind == "sim") {
        simgen::SimOracleConfig cfg;
        if (arg.empty()) cfg = simgen::SimOracleConfig{};
        else if (arg.front() == '{') cfg = simgen::SimOracleConfig::from_json(arg);
        else cfg = simgen::SimOracleConfig::load(arg);
        return std::make_unique<simgen::SimOracle>(cfg);
    }
    if (kind == "file") return FileOracle::load(arg);
    if (kind == "subprocess") {
        PROTIP_REQUIRE(!arg.empty(), ErrorCode::InvalidInput, "subprocess oracle needs a command");
        return std::make_unique<RemoteOracle>(std::make_unique<SubprocessTransport>(arg));
    }
    if (kind == "tcp") return std::make_unique<RemoteOracle>(std::make_unique<TcpTransport>(arg));
    throw Error(ErrorCode::InvalidInput, "unknown oracle kind '" + kind + "'");
}

}  // namespace protip
