#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "metacmi/harness.hpp"
#include "metacmi/random.hpp"

using namespace metacmi;
using nlohmann::json;

namespace {

ExperimentConfig small_config(std::size_t n_outer = 4)
{
    ExperimentConfig cfg;
    cfg.environment = preset_environment("thresholds", 0.1);
    cfg.n_values = {2};
    cfg.n_tilde_values = {2};
    cfg.estimator.mode = EstimatorMode::exact;
    cfg.estimator.n_outer = n_outer;
    cfg.master_seed = 17;
    return cfg;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("config parsing is strict")
{
    const json ok = json::parse(R"({
        "environment": {"preset": "lookup", "noise": 0.05},
        "dims": {"n": [2, 3], "n_tilde": [2]},
        "learners": {"kind": "oracle"},
        "estimator": {"mode": "mc", "n_outer": 3, "n_inner": 50},
        "delta": 0.05,
        "constants": {"cor8": 2.0},
        "master_seed": 9})");
    const auto cfg = config_from_json(ok);
    CHECK(cfg.environment.name == preset_environment("lookup").name);
    CHECK(cfg.environment.tasks[0].noise == doctest::Approx(0.05));
    CHECK(cfg.n_values == std::vector<std::size_t>{2, 3});
    CHECK(cfg.learners.kind == LearnerKind::oracle);
    CHECK(cfg.estimator.mode == EstimatorMode::monte_carlo);
    CHECK(cfg.estimator.n_inner == 50);
    CHECK(cfg.deltas == std::vector<double>{0.05});
    CHECK(cfg.constants.cor8 == 2.0);
    CHECK(cfg.master_seed == 9);
    CHECK(config_from_json(to_json(cfg)).master_seed == 9);

    for (const char* bad : {R"({"environment": {"preset": "thresholds"}, "colour": 1})",
                            R"({"environment": {"preset": "thresholds"}, "estimator": {"mode": "fast"}})",
                            R"({"environment": {"preset": "thresholds"}, "estimator": {"n_innr": 5}})",
                            R"({"environment": {"preset": "thresholds"}, "delta": [1.5]})",
                            R"({"environment": {"preset": "thresholds"}, "dims": {"n": [0]}})",
                            R"({"dims": {"n": [2]}})"})
        CHECK_THROWS_AS(config_from_json(json::parse(bad)), std::invalid_argument);

    CHECK(parse_estimator_mode("auto") == EstimatorMode::automatic);
    CHECK(to_string(EstimatorMode::exact) == "exact");
    CHECK_THROWS_AS(parse_estimator_mode("x"), std::invalid_argument);
}

TEST_CASE("environment files resolve against the config directory")
{
    const auto dir = std::filesystem::temp_directory_path() / "metacmi_cfg_test";
    std::filesystem::create_directories(dir);
    save_environment(preset_environment("lookup", 0.2), (dir / "env.json").string());
    write_text((dir / "cfg.json").string(), R"({"environment": {"file": "env.json"}, "master_seed": 3})");
    const auto cfg = load_config((dir / "cfg.json").string());
    CHECK(to_json(cfg.environment) == to_json(preset_environment("lookup", 0.2)));
    std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for covers every index and rethrows")
{
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), 8, [&](std::size_t k) { hit[k] += 1; });
    for (int h : hit)
        CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 4,
                                 [](std::size_t k) {
                                     if (k == 7)
                                         throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("reports are identical across worker counts")
{
    const auto cfg = small_config(6);
    const auto a = to_json(run_experiment(cfg, Dims{2, 2}, 1));
    const auto b = to_json(run_experiment(cfg, Dims{2, 2}, 8));
    CHECK(a.dump() == b.dump());
    CHECK(a.dump() == to_json(run_experiment(cfg, Dims{2, 2}, 1)).dump());
}

TEST_CASE("report recomposes from module outputs")
{
    const auto cfg = small_config(3);
    const Dims dims{2, 2};
    const auto rep = run_experiment(cfg, dims, 2);
    const Learners learners = make_learners(cfg);

    std::vector<TermGrid> env, task, one;
    double train = 0.0, pop = 0.0, u = 0.0, w = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
        const auto seed = derive_seed(cfg.master_seed, tag("supersample"), dims.n_tilde, dims.n, d);
        const auto z = sample_supersample(cfg.environment, dims, seed);
        const auto e = enumerate_masks(z, learners);
        const auto t = ecmi_terms_exact(e);
        env.push_back(t.environment);
        task.push_back(t.task);
        one.push_back(t.one_step);
        const auto p = parametric_cmis_exact(e);
        u += p.representation_given_masks / 3.0;
        w += p.unobserved_hypothesis / 3.0;
        LearnerSeeds seeds;
        seeds.base.assign(dims.n_tilde, 0);
        for (std::uint64_t c = 0; c < e.configurations; ++c) {
            const auto m = masks_from_index(dims, c);
            const auto s = summarize(evaluate_losses(z, m, learners, seeds), m);
            train += s.train / (3.0 * e.configurations);
            pop += s.meta_population / (3.0 * e.configurations);
        }
    }
    CHECK(rep.train.value == doctest::Approx(train).epsilon(1e-12));
    CHECK(rep.meta_population.value == doctest::Approx(pop).epsilon(1e-12));
    CHECK(rep.thm1.value == doctest::Approx(thm1_two_step(env, task).value).epsilon(1e-12));
    CHECK(rep.thm2.value == doctest::Approx(thm2_one_step(one).value).epsilon(1e-12));
    CHECK(rep.cor1 == doctest::Approx(cor1(u, w, dims)).epsilon(1e-12));
    CHECK(rep.cor8 == doctest::Approx(cor8_excess_random(dims, 1, 1, 2, 0.1)).epsilon(1e-12));
    CHECK(rep.oracle_excess_risk.value == 0.0);
    CHECK(rep.min_excess_risk >= -1e-12);
    CHECK(std::abs(rep.gap.value) <= rep.thm2.value + 3.0 * rep.thm2.std_error);

    const auto j = to_json(rep);
    CHECK(j["n"] == 2);
    CHECK(j.dump().find("thm1") != std::string::npos);
}

TEST_CASE("data-ignoring learners reduce bounds to their closed forms")
{
    auto cfg = small_config(2);
    cfg.learners.kind = LearnerKind::oracle;
    const auto rep = run_experiment(cfg, Dims{2, 2});
    CHECK(rep.thm1.value == 0.0);
    CHECK(rep.thm2.value == 0.0);
    CHECK(rep.cor1 == 0.0);
    CHECK(rep.cor2.all_hypotheses == 0.0);
    CHECK(rep.thm3_one_step == doctest::Approx(3.0 * rep.train.value).epsilon(1e-9));
    CHECK(rep.excess_risk.value == 0.0);
    CHECK(rep.pointwise_kl.value == 0.0);
}

TEST_CASE("monte carlo path")
{
    auto cfg = small_config(2);
    cfg.estimator.mode = EstimatorMode::monte_carlo;
    cfg.estimator.n_inner = 200;
    cfg.estimator.bootstrap = 10;
    const auto rep = run_experiment(cfg, Dims{2, 2}, 2);
    CHECK(rep.method == EstimatorMethod::monte_carlo);
    CHECK(rep.has_terms);
    CHECK_FALSE(rep.has_parametric);
    CHECK(std::isnan(rep.cor1));
    CHECK(to_json(rep).dump() == to_json(run_experiment(cfg, Dims{2, 2}, 1)).dump());

    cfg.learners.tie_break = TieBreak::randomized;
    cfg.estimator.mode = EstimatorMode::exact;
    CHECK_THROWS_AS(run_experiment(cfg, Dims{2, 2}), std::invalid_argument);
    cfg.estimator.mode = EstimatorMode::automatic;
    CHECK(run_experiment(cfg, Dims{1, 1}).method == EstimatorMethod::monte_carlo);
}

TEST_CASE("coverage counting")
{
    const std::vector<double> gaps{0.1, -0.5, 0.2, 0.9};
    const std::vector<double> bounds{0.2, 0.4, std::numeric_limits<double>::infinity(), kNotComputed};
    const auto c = count_coverage(gaps, bounds);
    CHECK(c.draws == 3);
    CHECK(c.violations == 1);
    CHECK(c.rate == doctest::Approx(1.0 / 3.0));
    CHECK(c.ci_low <= c.rate);
    CHECK(c.ci_high >= c.rate);

    const std::vector<double> inf(4, std::numeric_limits<double>::infinity());
    CHECK(count_coverage(gaps, inf).rate == 0.0);
    CHECK_THROWS_AS(count_coverage(gaps, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("mean with error")
{
    const auto m = mean_with_error({1.0, 2.0, 3.0, 4.0});
    CHECK(m.value == 2.5);
    CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(std::isnan(mean_with_error({}).value));
}

TEST_CASE("log-log slope fit")
{
    const std::vector<double> x{2, 4, 8, 16};
    std::vector<double> y;
    for (double v : x)
        y.push_back(3.0 * std::pow(v, -0.5));
    const auto f = fit_log_log(x, y);
    CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.residual == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.points == 4);
    CHECK(std::isnan(fit_log_log(x, {1.0, 0.0, 1.0, 1.0}).slope));
    CHECK_THROWS_AS(fit_log_log({2.0, 2.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("sweep output")
{
    auto cfg = small_config(2);
    cfg.n_values = {1, 2, 3, 4};
    cfg.n_tilde_values = {1};
    const auto result = run_sweep(cfg, 4);
    CHECK(result.rows.size() == 4);
    CHECK_FALSE(result.slopes.empty());
    for (const auto& s : result.slopes)
        CHECK(s.axis == "n");

    const std::string csv = to_csv(result.rows);
    CHECK(csv == to_csv(run_sweep(cfg, 1).rows));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto table = parse_csv(csv);
    CHECK(table.header == csv_header());
    CHECK(table.rows.size() == 4);
    for (const auto& r : table.rows)
        CHECK(r.size() == csv_header().size());

    std::vector<SweepRow> three(result.rows.begin(), result.rows.begin() + 3);
    const auto path = (std::filesystem::temp_directory_path() / "metacmi_sweep_test.csv").string();
    emit_csv(three, path);
    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text == to_csv(three));
    std::filesystem::remove(path);

    const auto slopes = slopes_to_json(result, cfg.master_seed);
    CHECK(slopes["master_seed"] == cfg.master_seed);
    CHECK(slopes["fits"].size() == result.slopes.size());

    cfg.n_values = {2, 3};
    CHECK_THROWS_AS(run_sweep(cfg), std::invalid_argument);
    cfg.n_values = {2};
    CHECK_THROWS_AS(run_sweep(cfg), std::invalid_argument);
}

TEST_CASE("number formatting")
{
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(kNotComputed).empty());
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("svg rendering")
{
    const auto table = parse_csv("n,a,b\n2,1,0.5\n4,0.5,\n8,0.25,0.1\n");
    CHECK(table.rows[1][2].empty());
    const std::string svg = render_svg(table, {"n", {"a", "b"}, true, true, "t"});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg == render_svg(table, {"n", {"a", "b"}, true, true, "t"}));
    CHECK_THROWS_AS(render_svg(table, {"n", {}, true, true, ""}), std::invalid_argument);
    CHECK_THROWS_AS(render_svg(table, {"", {"a"}, true, true, ""}), std::invalid_argument);
    CHECK_THROWS_AS(render_svg(table, {"n", {"zzz"}, true, true, ""}), std::invalid_argument);
}

TEST_CASE("verify runs its checks")
{
    auto cfg = small_config(4);
    VerifyOptions opts;
    opts.lemma_trials = 50;
    const auto checks = verify(cfg, opts, 2);
    CHECK(checks.size() > 3);
    CHECK(checks.front().name == "information lemmas");
    CHECK(checks.front().passed);
}
