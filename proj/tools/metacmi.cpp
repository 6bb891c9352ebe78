#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "metacmi/harness.hpp"

using namespace metacmi;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
    bool exact = false;
    bool mc = false;
};

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Override master_seed");
    app->add_option("--out", o.out, "Output directory (overrides output_dir)");
    app->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* ex = app->add_flag("--exact", o.exact, "Force exact mask enumeration");
    auto* mc = app->add_flag("--mc", o.mc, "Force Monte Carlo estimation");
    ex->excludes(mc);
}

ExperimentConfig resolve(const CommonOptions& o)
{
    ExperimentConfig cfg = load_config(o.config);
    if (o.seed)
        cfg.master_seed = *o.seed;
    if (!o.out.empty())
        cfg.output_dir = o.out;
    if (o.exact)
        cfg.estimator.mode = EstimatorMode::exact;
    if (o.mc)
        cfg.estimator.mode = EstimatorMode::monte_carlo;
    std::filesystem::create_directories(cfg.output_dir);
    return cfg;
}

std::string path_in(const ExperimentConfig& cfg, const std::string& name)
{
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

class Stopwatch {
public:
    ~Stopwatch()
    {
        const auto dt = std::chrono::steady_clock::now() - start_;
        std::cerr << "wall time " << std::chrono::duration<double>(dt).count() << " s\n";
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int simulate(const CommonOptions& o)
{
    Stopwatch sw;
    const auto cfg = resolve(o);
    nlohmann::json reports = nlohmann::json::array();
    for (std::size_t nt : cfg.n_tilde_values)
        for (std::size_t n : cfg.n_values)
            reports.push_back(to_json(run_experiment(cfg, Dims{nt, n}, o.jobs)));
    const nlohmann::json doc = {{"master_seed", cfg.master_seed}, {"config", to_json(cfg)}, {"reports", reports}};
    const auto path = path_in(cfg, "report.json");
    write_text(path, doc.dump(2) + "\n");
    std::cout << path << "\n";
    return 0;
}

int sweep(const CommonOptions& o)
{
    Stopwatch sw;
    const auto cfg = resolve(o);
    const SweepResult result = run_sweep(cfg, o.jobs);
    emit_csv(result.rows, path_in(cfg, "sweep.csv"));
    write_text(path_in(cfg, "slopes.json"), slopes_to_json(result, cfg.master_seed).dump(2) + "\n");
    std::cout << path_in(cfg, "sweep.csv") << "\n" << path_in(cfg, "slopes.json") << "\n";
    return 0;
}

int run_verify(const CommonOptions& o)
{
    Stopwatch sw;
    const auto cfg = resolve(o);
    const auto checks = verify(cfg, {}, o.jobs);
    bool ok = true;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        rows.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        ok = ok && c.passed;
    }
    write_text(path_in(cfg, "verify.json"),
               nlohmann::json{{"master_seed", cfg.master_seed}, {"passed", ok}, {"checks", rows}}.dump(2) + "\n");
    std::cout << (ok ? "all checks passed" : "some checks failed") << "\n";
    return ok ? 0 : 1;
}

int dims(const std::string& preset, const std::string& file)
{
    DiscreteEnvironment env;
    if (!file.empty())
        env = load_environment(file);
    else
        env = preset_environment(preset);
    const auto cert = certify_dimensions(env);
    std::cout << "environment " << env.name << "\n";
    std::cout << "representations " << env.representations.size() << " maps, range " << env.range_size()
              << ", natarajan_dim declared " << env.representations.natarajan_dim << " brute force "
              << cert.natarajan_dim << (cert.natarajan_matches ? " ok" : " MISMATCH") << "\n";
    std::cout << "task functions " << env.task_functions.size() << " maps, vc_dim declared "
              << env.task_functions.vc_dim << " brute force " << cert.vc_dim << (cert.vc_matches ? " ok" : " MISMATCH")
              << "\n";
    return cert.natarajan_matches && cert.vc_matches ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Information-theoretic meta-learning bounds: simulation and verification"};
    app.require_subcommand(1);

    CommonOptions sim_opts, sweep_opts, verify_opts;
    auto* sim = app.add_subcommand("simulate", "Run one config and write report.json");
    add_common(sim, sim_opts);
    auto* sw = app.add_subcommand("sweep", "Run the dims grid and write sweep.csv and slopes.json");
    add_common(sw, sweep_opts);
    auto* ver = app.add_subcommand("verify", "Check validity, orderings, coverage and lemmas");
    add_common(ver, verify_opts);

    std::string csv, svg, x = "n", title;
    std::vector<std::string> ys;
    bool linear = false;
    auto* plot = app.add_subcommand("plot", "Render columns of a sweep CSV as an SVG line chart");
    plot->add_option("--csv", csv, "Input CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", svg, "Output SVG path")->required();
    plot->add_option("--x", x, "x column");
    plot->add_option("--y", ys, "y columns")->delimiter(',');
    plot->add_option("--title", title, "Chart title");
    plot->add_flag("--linear", linear, "Linear instead of log-log axes");

    std::string preset = "thresholds", env_file;
    auto* dm = app.add_subcommand("dims", "Brute-force dimension certification of an environment");
    auto* p_opt = dm->add_option("--preset", preset, "Preset name");
    auto* e_opt = dm->add_option("--env", env_file, "Environment JSON file")->check(CLI::ExistingFile);
    p_opt->excludes(e_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return simulate(sim_opts);
        if (sw->parsed())
            return sweep(sweep_opts);
        if (ver->parsed())
            return run_verify(verify_opts);
        if (plot->parsed()) {
            if (ys.empty())
                ys = {"thm1", "thm2", "cor4_eq17"};
            PlotSpec spec{x, ys, !linear, !linear, title};
            emit_svg_plot(read_csv(csv), spec, svg);
            std::cout << svg << "\n";
            return 0;
        }
        if (dm->parsed())
            return dims(preset, env_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
