#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "metacmi/bounds.hpp"
#include "metacmi/environment.hpp"
#include "metacmi/info.hpp"
#include "metacmi/learners.hpp"
#include "metacmi/supersample.hpp"

namespace metacmi {

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

enum class EstimatorMode { automatic, exact, monte_carlo };

EstimatorMode parse_estimator_mode(const std::string& name);
std::string to_string(EstimatorMode mode);

struct EstimatorSettings {
    EstimatorMode mode = EstimatorMode::automatic;
    std::size_t n_outer = 50;
    std::size_t n_inner = 1000;
    std::size_t bins = 10;
    std::size_t bootstrap = 100;
    // automatic mode enumerates when mask_bits is at most this.
    std::size_t exact_max_bits = 12;
    // false skips the e-CMI estimates (losses, excess risk and closed forms only).
    bool information_terms = true;
};

enum class LearnerKind { erm, oracle };

struct LearnerSettings {
    LearnerKind kind = LearnerKind::erm;
    TieBreak tie_break = TieBreak::lexicographic;
};

struct BoundConstants {
    double thm4_c1 = kTwoRootTwo;
    double thm4_c2 = kTwoRootTwo;
    Cor6Constants cor6;
    Cor7Constants cor7;
    double cor8 = 4.0;
};

struct ExperimentConfig {
    DiscreteEnvironment environment;
    // Recorded description of where the environment came from.
    nlohmann::json environment_source;
    std::vector<std::size_t> n_values{2};
    std::vector<std::size_t> n_tilde_values{2};
    LearnerSettings learners;
    EstimatorSettings estimator;
    std::vector<double> deltas{0.1};
    BoundConstants constants;
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
};

void validate(const ExperimentConfig& cfg);

/*
 * Keys (all optional except environment):
 *   environment: {"preset": name, "noise": x} | {"file": path} | inline environment object
 *   dims: {"n": [..], "n_tilde": [..]}
 *   learners: {"kind": "erm"|"oracle", "tie_break": "lexicographic"|"randomized"}
 *   estimator: {"mode": "auto"|"exact"|"mc", "n_outer", "n_inner", "bins", "bootstrap",
 *               "exact_max_bits", "information_terms"}
 *   delta: [..]
 *   constants: {"thm4_c1", "thm4_c2", "cor6_c1", "cor6_c2", "cor6_c3", "cor7_c1", "cor7_c2", "cor8"}
 *   master_seed, output_dir
 * Unknown keys are errors. Relative file paths resolve against base_dir.
 */
ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

Learners make_learners(const ExperimentConfig& cfg);

// Runs body(0..count-1) on up to jobs threads; exceptions are rethrown in index order.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

struct Measured {
    double value = kNotComputed;
    double std_error = kNotComputed;
};

// Mean and standard error of the mean.
Measured mean_with_error(const std::vector<double>& xs);

struct Coverage {
    std::size_t draws = 0;
    std::size_t violations = 0;
    double rate = 0.0;
    // Wilson score interval at 95%.
    double ci_low = 0.0;
    double ci_high = 0.0;
};

Coverage count_coverage(const std::vector<double>& gaps, const std::vector<double>& bounds);

struct HighProbabilityResult {
    double delta = 0.1;
    Measured thm4, thm5, thm6, remark1;
    Coverage thm4_coverage, thm5_coverage, thm6_coverage, remark1_coverage;
};

// Everything measured on one outer draw of the supersample.
struct DrawRecord {
    std::uint64_t supersample_seed = 0;
    // Mask-averaged losses given z (exact), or the realized draw (Monte Carlo).
    LossSummary expected;
    LossSummary realized;
    // Exact path only.
    std::uint64_t realized_config = 0;
    double env_cmi = kNotComputed, task_cmi = kNotComputed, one_step_cmi = kNotComputed;
    double env_sqrt2 = kNotComputed, task_sqrt2 = kNotComputed, one_step_sqrt2 = kNotComputed;
    bool has_parametric = false;
    ParametricCmis parametric;
    double tensor_information = kNotComputed;
    bool has_pointwise = false;
    PointwiseKls kls;
    double excess_risk = 0.0;
    double oracle_excess_risk = 0.0;
};

struct BoundReport {
    Dims dims;
    EstimatorMethod method = EstimatorMethod::exact;
    std::size_t n_outer = 0;
    std::uint64_t master_seed = 0;

    Measured train, meta_population, gap, three_loss;
    Measured realized_train, realized_gap;
    double max_realized_train = 0.0;
    Measured env_cmi, task_cmi, one_step_cmi;

    BoundValue thm1, thm2;
    bool has_terms = false;
    double thm3_two_step = kNotComputed;
    double thm3_one_step = kNotComputed;

    bool has_parametric = false;
    Measured representation_given_masks, unobserved_hypothesis, all_hypotheses, chained;
    MixtureEntropies relaxed;
    double cor1 = kNotComputed;
    Cor2Chain cor2{kNotComputed, kNotComputed, kNotComputed};
    InterpolatingBound cor3{kNotComputed, kNotComputed};

    MinimaxPair cor4{kNotComputed, kNotComputed};
    double cor5 = kNotComputed;
    Cor6Result cor6{kNotComputed, kNotComputed, kNotComputed, kNotComputed};
    TaskDiversity diversity;
    double cor7 = kNotComputed;
    double cor8 = kNotComputed;

    Measured excess_risk, oracle_excess_risk;
    double min_excess_risk = 0.0;

    bool has_pointwise = false;
    Measured pointwise_kl, tensor_information, kl_minus_information;
    std::vector<HighProbabilityResult> high_probability;

    std::vector<DrawRecord> draws;
};

// Runs cfg.estimator.n_outer draws at the given dims. Output is independent of jobs.
BoundReport run_experiment(const ExperimentConfig& cfg, Dims dims, std::size_t jobs = 1);

nlohmann::json to_json(const BoundReport& report);

// Population-loss excess of the realized pair on each unobserved task over the oracle pair, averaged over pairs.
double realized_excess_risk(const DiscreteEnvironment& env, const MetaSupersample& z, const Masks& masks,
                            std::size_t representation, const std::vector<std::size_t>& task_functions);

// Flat row per grid point; columns are fixed by csv_header().
struct SweepRow {
    std::size_t n_tilde = 0;
    std::size_t n = 0;
    BoundReport report;
};

struct SlopeFit {
    std::string family;
    std::string axis; // "n" or "n_tilde"
    std::size_t fixed = 0;
    std::size_t points = 0;
    double slope = kNotComputed;
    double intercept = kNotComputed;
    double residual = kNotComputed; // root mean square of the fit residuals
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SlopeFit> slopes;
};

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs = 1);

// Least-squares fit of log(y) on log(x). Requires at least two points with positive finite values.
SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

std::vector<std::string> csv_header();
std::vector<std::string> csv_fields(const SweepRow& row);
// Shortest round-trip decimal; NaN gives an empty field.
std::string format_number(double v);
std::string to_csv(const std::vector<SweepRow>& rows);
void emit_csv(const std::vector<SweepRow>& rows, const std::string& path);
nlohmann::json slopes_to_json(const SweepResult& result, std::uint64_t master_seed);

struct PlotSpec {
    std::string x_column;
    std::vector<std::string> y_columns;
    bool log_x = true;
    bool log_y = true;
    std::string title;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);
std::string render_svg(const CsvTable& table, const PlotSpec& spec);
void emit_svg_plot(const CsvTable& table, const PlotSpec& spec, const std::string& path);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    std::size_t lemma_trials = 1000;
    double se_slack = 3.0;
    double tolerance = 1e-9;
};

// Average validity, relaxation orderings, coverage and lemma checks over the config grid.
std::vector<CheckResult> verify(const ExperimentConfig& cfg, const VerifyOptions& options = {}, std::size_t jobs = 1);

void write_text(const std::string& path, const std::string& text);

} // namespace metacmi
