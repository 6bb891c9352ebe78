#include "metacmi/supersample.hpp"

#include <stdexcept>

#include "metacmi/learners.hpp"
#include "metacmi/random.hpp"

namespace metacmi {

std::size_t sample_categorical(std::span<const double> probabilities, double u)
{
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] <= 0.0)
            continue;
        cumulative += probabilities[i];
        last_positive = i;
        if (u < cumulative)
            return i;
    }
    return last_positive;
}

void validate(const Dims& dims)
{
    if (dims.n_tilde == 0 || dims.n == 0)
        throw std::invalid_argument("supersample dimensions must be positive");
}

MetaSupersample sample_supersample(const DiscreteEnvironment& env, Dims dims, std::uint64_t seed)
{
    validate(dims);
    MetaSupersample z;
    z.dims = dims;
    z.tasks.resize(dims.task_count());
    z.data.resize(dims.sample_count());
    for (std::size_t i = 0; i < dims.n_tilde; ++i) {
        for (std::size_t k = 0; k < 2; ++k) {
            SplitMix64 tg(derive_seed(seed, tag("task"), i, k));
            const std::size_t task = sample_categorical(env.task_distribution, tg.uniform());
            z.tasks[dims.task_slot(i, k)] = task;
            for (std::size_t j = 0; j < dims.n; ++j) {
                for (std::size_t l = 0; l < 2; ++l) {
                    SplitMix64 dg(derive_seed(seed, tag("datum"), i, k, j, l));
                    Datum d;
                    d.x = static_cast<std::uint32_t>(sample_categorical(env.input_distribution, dg.uniform()));
                    d.y = clean_label(env, task, d.x);
                    if (dg.uniform() < env.tasks[task].noise)
                        d.y ^= 1U;
                    z.data[dims.sample_slot(i, k, j, l)] = d;
                }
            }
        }
    }
    return z;
}

Masks draw_masks(Dims dims, std::uint64_t seed)
{
    validate(dims);
    Masks m;
    m.dims = dims;
    m.meta.resize(dims.n_tilde);
    m.in_task.resize(dims.in_task_count());
    SplitMix64 g(derive_seed(seed, tag("masks")));
    for (auto& b : m.meta)
        b = g.bit() ? 1 : 0;
    for (auto& b : m.in_task)
        b = g.bit() ? 1 : 0;
    return m;
}

std::vector<std::uint8_t> complement(const std::vector<std::uint8_t>& bits)
{
    std::vector<std::uint8_t> out(bits.size());
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] > 1)
            throw std::invalid_argument("mask entries must be 0 or 1");
        out[k] = static_cast<std::uint8_t>(1 - bits[k]);
    }
    return out;
}

Masks complement(const Masks& masks)
{
    Masks m = masks;
    m.meta = complement(masks.meta);
    m.in_task = complement(masks.in_task);
    return m;
}

Masks masks_from_index(Dims dims, std::uint64_t index)
{
    validate(dims);
    if (dims.mask_bits() > 64)
        throw std::invalid_argument("mask configuration does not fit a 64-bit index");
    Masks m;
    m.dims = dims;
    m.meta.resize(dims.n_tilde);
    m.in_task.resize(dims.in_task_count());
    for (std::size_t i = 0; i < dims.n_tilde; ++i)
        m.meta[i] = (index >> i) & 1U;
    for (std::size_t s = 0; s < m.in_task.size(); ++s)
        m.in_task[s] = (index >> (dims.n_tilde + s)) & 1U;
    return m;
}

std::uint64_t mask_index(const Masks& masks)
{
    if (masks.dims.mask_bits() > 64)
        throw std::invalid_argument("mask configuration does not fit a 64-bit index");
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < masks.meta.size(); ++i)
        index |= static_cast<std::uint64_t>(masks.meta[i] & 1U) << i;
    for (std::size_t s = 0; s < masks.in_task.size(); ++s)
        index |= static_cast<std::uint64_t>(masks.in_task[s] & 1U) << (masks.dims.n_tilde + s);
    return index;
}

LearnerSeeds draw_learner_seeds(Dims dims, std::uint64_t seed)
{
    LearnerSeeds s;
    s.meta = derive_seed(seed, tag("meta-learner"));
    s.base.resize(dims.n_tilde);
    for (std::size_t i = 0; i < dims.n_tilde; ++i)
        s.base[i] = derive_seed(seed, tag("base-learner"), i);
    return s;
}

TrainingSet training_set(const MetaSupersample& z, const Masks& masks, std::size_t i, std::size_t k)
{
    if (!(masks.dims == z.dims))
        throw std::invalid_argument("mask dimensions do not match the supersample");
    if (i >= z.dims.n_tilde || k > 1)
        throw std::out_of_range("task index out of range");
    TrainingSet out;
    out.reserve(z.dims.n);
    for (std::size_t j = 0; j < z.dims.n; ++j)
        out.push_back(z.at(i, k, j, masks.bit(i, k, j)));
    return out;
}

std::vector<TrainingSet> meta_training_set(const MetaSupersample& z, const Masks& masks)
{
    std::vector<TrainingSet> out;
    out.reserve(z.dims.n_tilde);
    for (std::size_t i = 0; i < z.dims.n_tilde; ++i)
        out.push_back(training_set(z, masks, i, masks.observed(i)));
    return out;
}

LossTensor evaluate_losses(const MetaSupersample& z, const Masks& masks, const Learners& learners,
                           const LearnerSeeds& seeds)
{
    const Dims dims = z.dims;
    if (!(masks.dims == dims))
        throw std::invalid_argument("mask dimensions do not match the supersample");
    if (!learners.meta || !learners.base || !learners.loss)
        throw std::invalid_argument("learners are incomplete");
    LossTensor t;
    t.dims = dims;
    t.values.resize(dims.sample_count());
    t.task_functions.resize(dims.task_count());

    const auto train = meta_training_set(z, masks);
    t.representation = learners.meta(std::span<const TrainingSet>(train), seeds.meta);
    if (learners.representation_count != 0 && t.representation >= learners.representation_count)
        throw std::logic_error("meta learner returned a representation outside its class");

    for (std::size_t i = 0; i < dims.n_tilde; ++i) {
        const std::uint64_t seed = i < seeds.base.size() ? seeds.base[i] : 0;
        for (std::size_t k = 0; k < 2; ++k) {
            const std::size_t w = learners.base(training_set(z, masks, i, k), z.task(i, k), t.representation, seed);
            if (learners.task_function_count != 0 && w >= learners.task_function_count)
                throw std::logic_error("base learner returned a task function outside its class");
            t.task_functions[dims.task_slot(i, k)] = w;
            const Hypothesis h{t.representation, w};
            for (std::size_t j = 0; j < dims.n; ++j)
                for (std::size_t l = 0; l < 2; ++l)
                    t.values[dims.sample_slot(i, k, j, l)] = learners.loss(h, z.at(i, k, j, l));
        }
    }
    return t;
}

LossSummary summarize(const LossTensor& losses, const Masks& masks)
{
    const Dims dims = losses.dims;
    if (!(masks.dims == dims) || losses.values.size() != dims.sample_count())
        throw std::invalid_argument("loss tensor and masks have different shapes");
    LossSummary s;
    for (std::size_t i = 0; i < dims.n_tilde; ++i) {
        const std::size_t seen = masks.observed(i);
        const std::size_t unseen = 1 - seen;
        for (std::size_t j = 0; j < dims.n; ++j) {
            const std::size_t a = masks.bit(i, seen, j);
            const std::size_t b = masks.bit(i, unseen, j);
            s.train += losses.at(i, seen, j, a);
            s.aux_test += losses.at(i, seen, j, 1 - a);
            s.aux_unobserved_train += losses.at(i, unseen, j, b);
            s.meta_population += losses.at(i, unseen, j, 1 - b);
        }
    }
    const double count = static_cast<double>(dims.n_tilde * dims.n);
    s.train /= count;
    s.aux_test /= count;
    s.aux_unobserved_train /= count;
    s.meta_population /= count;
    return s;
}

} // namespace metacmi
