#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metacmi/environment.hpp"
#include "metacmi/info.hpp"
#include "metacmi/supersample.hpp"

namespace metacmi {

inline const double kTwoRootTwo = 2.0 * std::sqrt(2.0);

struct BoundValue {
    double value = 0.0;
    double std_error = 0.0;
    bool infinite = false;
};

// Expected-gap bounds from per-supersample term grids (one grid per outer draw, equal weights).
BoundValue thm1_two_step(std::span<const TermGrid> environment, std::span<const TermGrid> task);
BoundValue thm2_one_step(std::span<const TermGrid> one_step);

// Bounds on the meta-population loss, and on the three-loss sum for the one-step version.
double thm3_two_step(double train, double environment_cmi, double task_cmi);
double thm3_one_step(double train, double one_step_cmi);

// sqrt(2 I_U / n_tilde) + sqrt(2 I_W / n).
double cor1(double representation_given_masks, double unobserved_hypothesis, Dims dims);

struct Cor2Chain {
    double all_hypotheses = 0.0;
    double chained = 0.0;
    double mutual_information = 0.0;
};

Cor2Chain cor2(double all_hypotheses_cmi, double chained_cmi, const MixtureEntropies& relaxed, Dims dims);

struct InterpolatingBound {
    double exponential = 0.0;
    double linear = 0.0;
};

// Requires train == 0 within 1e-12; returns (4 - 4 exp(-c), 4c).
InterpolatingBound cor3_interpolating(double train, double cmi);

struct SauerShelah {
    double exact = 0.0;
    double log_exact = 0.0;
    double closed_form = 0.0;
    double log_closed_form = 0.0;
};

// Sum_{i<=d} C(m,i) C(N,2)^i and its closed-form upper bound.
SauerShelah sauer_shelah(std::size_t m, std::size_t d, std::size_t labels);

struct MinimaxPair {
    double two_step = 0.0;
    double one_step = 0.0;
};

// Requires 2n >= d_VC + 1 and 2 n_tilde >= d_N + 1.
MinimaxPair cor4_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels);
double cor5_interpolating_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels);

struct Cor6Constants {
    double c1 = kTwoRootTwo;
    double c2 = kTwoRootTwo;
    double c3 = kTwoRootTwo;
};

struct Cor6Result {
    // Simplified displays with the given constants.
    double two_step_display = 0.0;
    double one_step_display = 0.0;
    // Forms before constants are absorbed; these carry no free constants.
    double two_step = 0.0;
    double one_step = 0.0;
};

// Requires n, n_tilde >= 2.
Cor6Result cor6_high_prob_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels, double delta,
                                  const Cor6Constants& constants = {});

double hoeffding_term(double delta, std::size_t m);

double thm4_two_step(double kl_environment, double kl_task, Dims dims, double delta, double c1 = kTwoRootTwo,
                     double c2 = kTwoRootTwo);
double thm5_one_step(double kl, Dims dims, double delta);
// Per-sample-pair environment KLs (length n) and per-pair task KLs (length n_tilde).
double thm6_two_step(std::span<const double> environment_kls, std::span<const double> task_kls, Dims dims,
                     double delta);
double remark1_two_step(double kl_training_positions, double kl_task, Dims dims, double delta,
                        double c1 = kTwoRootTwo, double c2 = kTwoRootTwo);

struct TaskDiversity {
    double nu = 1.0;
    double epsilon = 0.0;
    std::size_t best_representation = 0;
};

/*
 * Smallest epsilon and largest nu such that for every representation h
 *   max_t [m(t,h) - m(t,h*)] <= (sum_t w_t [m(t,h) - m(t,h*)]) / nu + epsilon,
 * where m(t,h) is the oracle task loss. Weights default to the task distribution.
 */
TaskDiversity measure_task_diversity(const DiscreteEnvironment& env, std::span<const double> weights = {});

struct Cor7Constants {
    double c1 = 4.0;
    double c2 = 4.0;
};

double cor7_excess_specific(std::size_t m, Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels,
                            double delta, const TaskDiversity& diversity, const Cor7Constants& constants = {});
double cor8_excess_random(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels, double delta,
                          double c = 4.0);

enum class LossBlock {
    full_tensor,        // all losses; reference averages over every mask
    environment_column, // lambda^{i,k}_{j,S^{i,k}_j} for all (i,k) at sample pair index; averages over meta
    unobserved_task,    // lambda^{i,unobs} at pair index; averages over unobserved in-task masks
    training_positions, // lambda^{i,k}_{j,S^{i,k}_j} for all (i,k,j); averages over meta
};

struct PointwiseLossLaw {
    DiscreteDistribution q;
    DiscreteDistribution p;
    double kl = 0.0;
};

// Q is the point mass at the realized block; P mixes Q over the designated masks.
PointwiseLossLaw pointwise_loss_law(const MaskEnumeration& e, std::uint64_t config, LossBlock block,
                                    std::size_t index = 0);

struct PointwiseKls {
    double full = 0.0;
    std::vector<double> environment;
    std::vector<double> task;
    double training_positions = 0.0;

    double environment_max() const;
    double task_max() const;
};

PointwiseKls pointwise_kls(const MaskEnumeration& e, std::uint64_t config);

} // namespace metacmi
