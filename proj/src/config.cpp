#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "metacmi/harness.hpp"

namespace metacmi {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object())
        throw std::invalid_argument(where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("unknown key '" + key + "' in " + where);
}

std::vector<std::size_t> size_list(const json& j, const std::string& where)
{
    std::vector<std::size_t> out;
    if (j.is_number_unsigned()) {
        out.push_back(j.get<std::size_t>());
        return out;
    }
    if (!j.is_array())
        throw std::invalid_argument(where + " must be a positive integer or a list of them");
    for (const auto& v : j) {
        if (!v.is_number_unsigned())
            throw std::invalid_argument(where + " entries must be positive integers");
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

std::size_t positive(const json& j, const std::string& where)
{
    if (!j.is_number_unsigned())
        throw std::invalid_argument(where + " must be a nonnegative integer");
    return j.get<std::size_t>();
}

DiscreteEnvironment environment_from_config(const json& j, const std::string& base_dir)
{
    if (!j.is_object())
        throw std::invalid_argument("environment must be an object");
    if (j.contains("preset")) {
        check_keys(j, {"preset", "noise"}, "environment");
        return preset_environment(j.at("preset").get<std::string>(), j.value("noise", 0.0));
    }
    if (j.contains("file")) {
        check_keys(j, {"file"}, "environment");
        std::filesystem::path p = j.at("file").get<std::string>();
        if (p.is_relative())
            p = std::filesystem::path(base_dir) / p;
        return load_environment(p.string());
    }
    return environment_from_json(j);
}

} // namespace

EstimatorMode parse_estimator_mode(const std::string& name)
{
    if (name == "auto")
        return EstimatorMode::automatic;
    if (name == "exact")
        return EstimatorMode::exact;
    if (name == "mc")
        return EstimatorMode::monte_carlo;
    throw std::invalid_argument("unknown estimator mode '" + name + "' (expected auto, exact or mc)");
}

std::string to_string(EstimatorMode mode)
{
    switch (mode) {
    case EstimatorMode::automatic:
        return "auto";
    case EstimatorMode::exact:
        return "exact";
    case EstimatorMode::monte_carlo:
        return "mc";
    }
    return "auto";
}

void validate(const ExperimentConfig& cfg)
{
    validate(cfg.environment);
    if (cfg.n_values.empty() || cfg.n_tilde_values.empty())
        throw std::invalid_argument("dims grid must be nonempty");
    for (auto n : cfg.n_values)
        if (n == 0)
            throw std::invalid_argument("n must be positive");
    for (auto n : cfg.n_tilde_values)
        if (n == 0)
            throw std::invalid_argument("n_tilde must be positive");
    if (cfg.estimator.n_outer == 0)
        throw std::invalid_argument("n_outer must be at least 1");
    if (cfg.estimator.n_inner < 2)
        throw std::invalid_argument("n_inner must be at least 2");
    if (cfg.estimator.bins < 2 || cfg.estimator.bins > 256)
        throw std::invalid_argument("bins must lie in [2, 256]");
    if (cfg.deltas.empty())
        throw std::invalid_argument("delta list must be nonempty");
    for (double d : cfg.deltas)
        if (!(d > 0.0 && d < 1.0))
            throw std::invalid_argument("delta values must lie in (0, 1)");
}

ExperimentConfig config_from_json(const json& j, const std::string& base_dir)
{
    check_keys(j, {"environment", "dims", "learners", "estimator", "delta", "constants", "master_seed", "output_dir"},
               "config");
    if (!j.contains("environment"))
        throw std::invalid_argument("config requires an environment");
    ExperimentConfig cfg;
    cfg.environment = environment_from_config(j.at("environment"), base_dir);
    cfg.environment_source = j.at("environment");

    if (j.contains("dims")) {
        const auto& d = j.at("dims");
        check_keys(d, {"n", "n_tilde"}, "dims");
        if (d.contains("n"))
            cfg.n_values = size_list(d.at("n"), "dims.n");
        if (d.contains("n_tilde"))
            cfg.n_tilde_values = size_list(d.at("n_tilde"), "dims.n_tilde");
    }
    if (j.contains("learners")) {
        const auto& l = j.at("learners");
        check_keys(l, {"kind", "tie_break"}, "learners");
        if (l.contains("kind")) {
            const auto kind = l.at("kind").get<std::string>();
            if (kind == "erm")
                cfg.learners.kind = LearnerKind::erm;
            else if (kind == "oracle")
                cfg.learners.kind = LearnerKind::oracle;
            else
                throw std::invalid_argument("unknown learner kind '" + kind + "'");
        }
        if (l.contains("tie_break"))
            cfg.learners.tie_break = parse_tie_break(l.at("tie_break").get<std::string>());
    }
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        check_keys(e, {"mode", "n_outer", "n_inner", "bins", "bootstrap", "exact_max_bits", "information_terms"},
                   "estimator");
        auto& s = cfg.estimator;
        if (e.contains("mode"))
            s.mode = parse_estimator_mode(e.at("mode").get<std::string>());
        if (e.contains("n_outer"))
            s.n_outer = positive(e.at("n_outer"), "estimator.n_outer");
        if (e.contains("n_inner"))
            s.n_inner = positive(e.at("n_inner"), "estimator.n_inner");
        if (e.contains("bins"))
            s.bins = positive(e.at("bins"), "estimator.bins");
        if (e.contains("bootstrap"))
            s.bootstrap = positive(e.at("bootstrap"), "estimator.bootstrap");
        if (e.contains("exact_max_bits"))
            s.exact_max_bits = positive(e.at("exact_max_bits"), "estimator.exact_max_bits");
        if (e.contains("information_terms"))
            s.information_terms = e.at("information_terms").get<bool>();
    }
    if (j.contains("delta")) {
        const auto& d = j.at("delta");
        cfg.deltas.clear();
        if (d.is_number())
            cfg.deltas.push_back(d.get<double>());
        else
            for (const auto& v : d)
                cfg.deltas.push_back(v.get<double>());
    }
    if (j.contains("constants")) {
        const auto& c = j.at("constants");
        check_keys(c, {"thm4_c1", "thm4_c2", "cor6_c1", "cor6_c2", "cor6_c3", "cor7_c1", "cor7_c2", "cor8"},
                   "constants");
        auto& k = cfg.constants;
        k.thm4_c1 = c.value("thm4_c1", k.thm4_c1);
        k.thm4_c2 = c.value("thm4_c2", k.thm4_c2);
        k.cor6.c1 = c.value("cor6_c1", k.cor6.c1);
        k.cor6.c2 = c.value("cor6_c2", k.cor6.c2);
        k.cor6.c3 = c.value("cor6_c3", k.cor6.c3);
        k.cor7.c1 = c.value("cor7_c1", k.cor7.c1);
        k.cor7.c2 = c.value("cor7_c2", k.cor7.c2);
        k.cor8 = c.value("cor8", k.cor8);
    }
    if (j.contains("master_seed"))
        cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir"))
        cfg.output_dir = j.at("output_dir").get<std::string>();
    validate(cfg);
    return cfg;
}

json to_json(const ExperimentConfig& cfg)
{
    json j;
    j["environment"] = cfg.environment_source.is_null() ? to_json(cfg.environment) : cfg.environment_source;
    j["dims"] = {{"n", cfg.n_values}, {"n_tilde", cfg.n_tilde_values}};
    j["learners"] = {{"kind", cfg.learners.kind == LearnerKind::erm ? "erm" : "oracle"},
                     {"tie_break", to_string(cfg.learners.tie_break)}};
    const auto& s = cfg.estimator;
    j["estimator"] = {{"mode", to_string(s.mode)},           {"n_outer", s.n_outer},
                      {"n_inner", s.n_inner},                {"bins", s.bins},
                      {"bootstrap", s.bootstrap},            {"exact_max_bits", s.exact_max_bits},
                      {"information_terms", s.information_terms}};
    j["delta"] = cfg.deltas;
    const auto& k = cfg.constants;
    j["constants"] = {{"thm4_c1", k.thm4_c1}, {"thm4_c2", k.thm4_c2}, {"cor6_c1", k.cor6.c1},
                      {"cor6_c2", k.cor6.c2}, {"cor6_c3", k.cor6.c3}, {"cor7_c1", k.cor7.c1},
                      {"cor7_c2", k.cor7.c2}, {"cor8", k.cor8}};
    j["master_seed"] = cfg.master_seed;
    j["output_dir"] = cfg.output_dir;
    return j;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    return config_from_json(j, base.empty() ? "." : base.string());
}

Learners make_learners(const ExperimentConfig& cfg)
{
    auto env = std::make_shared<const DiscreteEnvironment>(cfg.environment);
    if (cfg.learners.kind == LearnerKind::oracle)
        return make_oracle_learners(env);
    return make_erm_learners(env, cfg.learners.tie_break);
}

} // namespace metacmi
