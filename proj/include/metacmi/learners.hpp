#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "metacmi/environment.hpp"
#include "metacmi/supersample.hpp"

namespace metacmi {

struct Hypothesis {
    std::size_t representation = 0;
    std::size_t task_function = 0;
};

// Meta learner: observed training sets (one per task pair) and a seed -> representation index.
using MetaLearnerFn = std::function<std::size_t(std::span<const TrainingSet>, std::uint64_t)>;
// Base learner: training set, task index, representation and seed -> task function index.
using BaseLearnerFn = std::function<std::size_t(const TrainingSet&, std::size_t, std::size_t, std::uint64_t)>;
using LossFn = std::function<double(const Hypothesis&, const Datum&)>;

/*
 * A meta learner, a base learner and a bounded loss. deterministic means the
 * outputs ignore the seeds, which the exact estimators require. Nonzero class
 * counts make evaluate_losses reject out-of-class outputs.
 */
struct Learners {
    MetaLearnerFn meta;
    BaseLearnerFn base;
    LossFn loss;
    bool deterministic = false;
    std::size_t representation_count = 0;
    std::size_t task_function_count = 0;
};

enum class TieBreak { lexicographic, randomized };

TieBreak parse_tie_break(const std::string& name);
std::string to_string(TieBreak t);

// Sum over tasks of the best task-function training error; argmin over H.
std::size_t erm_meta(std::span<const TrainingSet> train_sets, const FiniteRepresentationClass& H,
                     const FiniteTaskClass& F, TieBreak tie_break, std::uint64_t seed);

std::size_t erm_base(const TrainingSet& train, std::size_t representation, const FiniteRepresentationClass& H,
                     const FiniteTaskClass& F, TieBreak tie_break, std::uint64_t seed);

// argmin_f population loss; ties within 1e-12 resolve to the smallest index.
std::size_t oracle_base(const DiscreteEnvironment& env, std::size_t task, std::size_t representation);

double oracle_task_loss(const DiscreteEnvironment& env, std::size_t task, std::size_t representation);

struct RepresentationCertificate {
    std::size_t representation = 0;
    double mixture_loss = 0.0;
    bool optimal_for_every_task = false;
};

RepresentationCertificate oracle_representation(const DiscreteEnvironment& env);

LossFn zero_one_loss(std::shared_ptr<const DiscreteEnvironment> env);

Learners make_erm_learners(std::shared_ptr<const DiscreteEnvironment> env, TieBreak tie_break);
Learners make_oracle_learners(std::shared_ptr<const DiscreteEnvironment> env);
// Ignores all data and always returns the given hypothesis.
Learners make_constant_learners(std::shared_ptr<const DiscreteEnvironment> env, Hypothesis fixed);

} // namespace metacmi
