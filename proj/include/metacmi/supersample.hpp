#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "metacmi/environment.hpp"

namespace metacmi {

/*
 * Index conventions (all zero-based):
 *   task slot   (i, k)        -> 2i + k
 *   in-task bit (i, k, j)     -> (2i + k) n + j
 *   sample slot (i, k, j, l)  -> ((2i + k) n + j) 2 + l
 * with i < n_tilde task pairs, k in {0,1}, j < n sample pairs, l in {0,1}.
 */
struct Dims {
    std::size_t n_tilde = 0;
    std::size_t n = 0;

    std::size_t task_count() const { return 2 * n_tilde; }
    std::size_t sample_count() const { return 4 * n_tilde * n; }
    std::size_t in_task_count() const { return 2 * n_tilde * n; }
    std::size_t mask_bits() const { return n_tilde + 2 * n_tilde * n; }
    std::size_t task_slot(std::size_t i, std::size_t k) const { return 2 * i + k; }
    std::size_t in_task_slot(std::size_t i, std::size_t k, std::size_t j) const { return (2 * i + k) * n + j; }
    std::size_t sample_slot(std::size_t i, std::size_t k, std::size_t j, std::size_t l) const
    {
        return ((2 * i + k) * n + j) * 2 + l;
    }

    bool operator==(const Dims&) const = default;
};

void validate(const Dims& dims);

struct Datum {
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    bool operator==(const Datum&) const = default;
};

using TrainingSet = std::vector<Datum>;

struct MetaSupersample {
    Dims dims;
    std::vector<std::size_t> tasks;
    std::vector<Datum> data;

    std::size_t task(std::size_t i, std::size_t k) const { return tasks[dims.task_slot(i, k)]; }
    const Datum& at(std::size_t i, std::size_t k, std::size_t j, std::size_t l) const
    {
        return data[dims.sample_slot(i, k, j, l)];
    }
};

/*
 * Stream order: task (i, k) uses one uniform from
 * SplitMix64(derive_seed(seed, tag("task"), i, k)); datum (i, k, j, l) uses two
 * uniforms from SplitMix64(derive_seed(seed, tag("datum"), i, k, j, l)), the
 * first for x by inverse CDF and the second for the label flip (flip if u < noise).
 */
MetaSupersample sample_supersample(const DiscreteEnvironment& env, Dims dims, std::uint64_t seed);

// Meta mask bit i selects task (i, meta[i]) as observed.
struct Masks {
    Dims dims;
    std::vector<std::uint8_t> meta;
    std::vector<std::uint8_t> in_task;

    std::uint8_t observed(std::size_t i) const { return meta[i]; }
    std::uint8_t bit(std::size_t i, std::size_t k, std::size_t j) const { return in_task[dims.in_task_slot(i, k, j)]; }
};

/*
 * Bits come from SplitMix64(derive_seed(seed, tag("masks"))), top bit of each
 * word: meta bits for i ascending, then in-task bits in slot order.
 */
Masks draw_masks(Dims dims, std::uint64_t seed);

// Flips every bit; entries must be 0 or 1.
std::vector<std::uint8_t> complement(const std::vector<std::uint8_t>& bits);
Masks complement(const Masks& masks);

// Configuration index layout: bit i is meta[i]; bit n_tilde + slot is in_task[slot].
Masks masks_from_index(Dims dims, std::uint64_t index);
std::uint64_t mask_index(const Masks& masks);

struct LearnerSeeds {
    std::uint64_t meta = 0;
    std::vector<std::uint64_t> base;
};

// meta = derive_seed(seed, tag("meta-learner")), base[i] = derive_seed(seed, tag("base-learner"), i).
LearnerSeeds draw_learner_seeds(Dims dims, std::uint64_t seed);

TrainingSet training_set(const MetaSupersample& z, const Masks& masks, std::size_t i, std::size_t k);
std::vector<TrainingSet> meta_training_set(const MetaSupersample& z, const Masks& masks);

struct LossTensor {
    Dims dims;
    std::vector<double> values;
    std::size_t representation = 0;
    std::vector<std::size_t> task_functions;

    double at(std::size_t i, std::size_t k, std::size_t j, std::size_t l) const
    {
        return values[dims.sample_slot(i, k, j, l)];
    }
};

struct Learners;

LossTensor evaluate_losses(const MetaSupersample& z, const Masks& masks, const Learners& learners,
                           const LearnerSeeds& seeds);

struct LossSummary {
    double train = 0.0;
    double aux_test = 0.0;
    double aux_unobserved_train = 0.0;
    double meta_population = 0.0;

    double gap() const { return meta_population - train; }
    double three_loss_sum() const { return meta_population + aux_test + aux_unobserved_train; }
};

LossSummary summarize(const LossTensor& losses, const Masks& masks);

} // namespace metacmi
