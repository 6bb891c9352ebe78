#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "metacmi/learners.hpp"
#include "metacmi/supersample.hpp"

namespace metacmi {

// All information quantities are in nats.

using Outcome = std::vector<double>;

struct DiscreteDistribution {
    std::vector<Outcome> outcomes;
    std::vector<double> probabilities;

    static DiscreteDistribution point_mass(Outcome o) { return {{std::move(o)}, {1.0}}; }
};

void validate(const DiscreteDistribution& d);

// Returns +infinity when p puts mass outside the support of q.
double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q);

// p log(p/q) + (1-p) log((1-p)/(1-q)), +infinity when undefined.
double binary_kl(double p, double q);

// Counts or probabilities over (row value, column value) pairs, row-major.
struct JointHistogram {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;

    JointHistogram() = default;
    JointHistogram(std::size_t r, std::size_t c) : rows(r), cols(c), weights(r * c, 0.0) {}
    static JointHistogram from_rows(const std::vector<std::vector<double>>& m);

    double& at(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

double mutual_information(const JointHistogram& joint);

// Sum of stratum weights times stratum mutual information.
double conditional_mutual_information(std::span<const JointHistogram> strata, std::span<const double> weights);

enum class EstimatorMethod { exact, monte_carlo };

struct CmiEstimate {
    double value = 0.0;
    double std_error = 0.0;
    EstimatorMethod method = EstimatorMethod::exact;
    std::size_t n_outer = 1;
    std::size_t n_inner = 0;
    // Mutual information within each stratum of the conditioning bits (equal weights).
    std::vector<double> conditional_values;

    // Mean over strata of sqrt(2 I).
    double mean_sqrt2() const;
};

// Plug-in estimate over coded (a, b) samples with a bootstrap standard error.
CmiEstimate plugin_mi_from_samples(std::span<const std::pair<std::uint64_t, std::uint64_t>> samples,
                                   std::size_t bootstrap = 200, std::uint64_t seed = 0);

/*
 * Largest p in [0, m - q] with binary_kl(q, (q + p) / m) <= c, found by
 * bisection on the increasing branch p >= (m - 1) q.
 */
double invert_dm(int m, double q, double c);

enum class EcmiFamily { environment, task, one_step };

/*
 * One estimate per (i, j):
 *   environment: I(lambda^i_{j,S^i_j}; meta_i | z, S^i_j), strata = the two in-task bits
 *   task:        I(lambda^{i,unobs}_j; S^{i,unobs}_j | z, meta_i), strata = meta_i
 *   one_step:    I(lambda^i_j; (meta_i, S^{i,0}_j, S^{i,1}_j) | z), one stratum
 */
struct TermGrid {
    Dims dims;
    EcmiFamily family = EcmiFamily::environment;
    EstimatorMethod method = EstimatorMethod::exact;
    std::vector<CmiEstimate> cells;
    double mean_cmi = 0.0;
    double mean_cmi_se = 0.0;
    // Average over (i, j) of the per-cell mean over strata of sqrt(2 I).
    double mean_sqrt2 = 0.0;
    double mean_sqrt2_se = 0.0;

    const CmiEstimate& cell(std::size_t i, std::size_t j) const { return cells[i * dims.n + j]; }
};

struct EcmiTermSet {
    TermGrid environment;
    TermGrid task;
    TermGrid one_step;

    const TermGrid& get(EcmiFamily f) const;
};

inline constexpr std::size_t kMaxEnumerationBits = 24;

/*
 * Learner outputs and losses for every mask configuration at a fixed
 * supersample. Losses are stored as indices into a table of distinct values.
 */
struct MaskEnumeration {
    Dims dims;
    std::uint64_t configurations = 0;
    std::vector<double> symbols;
    std::vector<std::uint8_t> loss_symbols;
    std::vector<std::uint32_t> representation;
    std::vector<std::uint32_t> task_functions;

    const std::uint8_t* losses(std::uint64_t config) const
    {
        return loss_symbols.data() + config * dims.sample_count();
    }
    std::uint8_t symbol(std::uint64_t config, std::size_t i, std::size_t k, std::size_t j, std::size_t l) const
    {
        return losses(config)[dims.sample_slot(i, k, j, l)];
    }
    const std::uint32_t* hypotheses(std::uint64_t config) const
    {
        return task_functions.data() + config * dims.task_count();
    }
    bool mask_bit(std::uint64_t config, std::size_t i, std::size_t k, std::size_t j) const
    {
        return (config >> (dims.n_tilde + dims.in_task_slot(i, k, j))) & 1U;
    }
    bool meta_bit(std::uint64_t config, std::size_t i) const { return (config >> i) & 1U; }
};

// Requires deterministic learners and at most kMaxEnumerationBits mask bits.
MaskEnumeration enumerate_masks(const MetaSupersample& z, const Learners& learners, const LearnerSeeds& seeds = {});

EcmiTermSet ecmi_terms_exact(const MaskEnumeration& e);
TermGrid ecmi_terms_exact(const MetaSupersample& z, const Learners& learners, EcmiFamily family);

struct McOptions {
    std::size_t n_inner = 1000;
    std::size_t bins = 10;
    std::size_t bootstrap = 100;
    std::uint64_t seed = 0;
};

/*
 * Plug-in estimates over sampled masks and learner seeds, stratified on the
 * conditioning bits. Losses are binned into options.bins equal cells on [0,1].
 * Reported values are bootstrap bias-corrected and clipped at zero; std_error
 * is the bootstrap standard deviation.
 */
EcmiTermSet ecmi_terms_mc(const MetaSupersample& z, const Learners& learners, const McOptions& options);
TermGrid ecmi_terms_mc(const MetaSupersample& z, const Learners& learners, EcmiFamily family,
                       const McOptions& options);

struct ParametricCmis {
    // I(U; meta | z, S)
    double representation_given_masks = 0.0;
    // Average over i of I(W^{i,unobs}; S^{i,unobs} | z, meta_i)
    double unobserved_hypothesis = 0.0;
    // I((U, W); meta, S | z)
    double all_hypotheses = 0.0;
    // I(U; meta, S | z)
    double representation = 0.0;
    // Sum over i of I(W^i; S^i | z, U)
    double hypotheses_given_representation = 0.0;

    double chained() const { return representation + hypotheses_given_representation; }
};

ParametricCmis parametric_cmis_exact(const MaskEnumeration& e);

enum class ParametricTerm { representation_given_masks, unobserved_hypothesis, all_hypotheses, chained };

double parametric_cmi_exact(const MetaSupersample& z, const Learners& learners, ParametricTerm term);

// I(lambda; meta, S | z) for deterministic learners, i.e. the entropy of the full loss tensor.
double loss_tensor_information(const MaskEnumeration& e);

// Law of (U, W^i) under uniform masks at one supersample.
struct HypothesisLaw {
    std::map<std::uint32_t, double> representation;
    // Per pair i: (U, W^{i,0}, W^{i,1}) -> probability.
    std::vector<std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, double>> pairs;
};

HypothesisLaw hypothesis_law(const MaskEnumeration& e);

struct MixtureEntropies {
    double representation = 0.0;
    double hypotheses_given_representation = 0.0;
};

// Entropies of the equal-weight mixture of the given laws: H(U) and sum_i H(W^i | U).
MixtureEntropies mixture_entropies(std::span<const HypothesisLaw> laws);

struct LemmaReport {
    std::size_t trials = 0;
    std::size_t centered_violations = 0;
    std::size_t binary_kl_violations = 0;
    std::size_t independence_violations = 0;
    std::size_t averaging_violations = 0;
    double worst_margin = 0.0;

    std::size_t violations() const
    {
        return centered_violations + binary_kl_violations + independence_violations + averaging_violations;
    }
};

// Checks the four information inequalities used by the bounds on random joints.
LemmaReport verify_proof_lemmas(std::size_t trials, std::uint64_t seed);

} // namespace metacmi
