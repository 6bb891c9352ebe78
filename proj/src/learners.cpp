#include "metacmi/learners.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "metacmi/random.hpp"

namespace metacmi {

namespace {

constexpr double kOracleTolerance = 1e-12;

// Training errors of every task function after mapping through representation h.
void task_errors(const TrainingSet& train, const std::vector<std::uint32_t>& h, const FiniteTaskClass& F,
                 std::vector<std::size_t>& counts, std::vector<std::size_t>& errors)
{
    const std::size_t cells = F.domain_size;
    counts.assign(cells * 2, 0);
    for (const auto& d : train)
        ++counts[h[d.x] * 2 + (d.y & 1U)];
    errors.assign(F.maps.size(), 0);
    for (std::size_t f = 0; f < F.maps.size(); ++f) {
        std::size_t e = 0;
        for (std::size_t c = 0; c < cells; ++c)
            e += counts[c * 2 + (1U - F.maps[f][c])];
        errors[f] = e;
    }
}

std::size_t pick(const std::vector<std::size_t>& scores, TieBreak tie_break, std::uint64_t seed)
{
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (auto s : scores)
        best = std::min(best, s);
    if (tie_break == TieBreak::lexicographic) {
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (scores[i] == best)
                return i;
    }
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] == best)
            ties.push_back(i);
    SplitMix64 g(derive_seed(seed, tag("tie-break")));
    return ties[g.below(ties.size())];
}

} // namespace

TieBreak parse_tie_break(const std::string& name)
{
    if (name == "lexicographic")
        return TieBreak::lexicographic;
    if (name == "randomized")
        return TieBreak::randomized;
    throw std::invalid_argument("unknown tie-break rule: " + name);
}

std::string to_string(TieBreak t) { return t == TieBreak::lexicographic ? "lexicographic" : "randomized"; }

std::size_t erm_meta(std::span<const TrainingSet> train_sets, const FiniteRepresentationClass& H,
                     const FiniteTaskClass& F, TieBreak tie_break, std::uint64_t seed)
{
    if (H.maps.empty() || F.maps.empty())
        throw std::invalid_argument("empty hypothesis class");
    std::vector<std::size_t> scores(H.maps.size(), 0);
    std::vector<std::size_t> counts, errors;
    for (std::size_t h = 0; h < H.maps.size(); ++h) {
        std::size_t total = 0;
        for (const auto& train : train_sets) {
            task_errors(train, H.maps[h], F, counts, errors);
            std::size_t best = std::numeric_limits<std::size_t>::max();
            for (auto e : errors)
                best = std::min(best, e);
            total += best;
        }
        scores[h] = total;
    }
    return pick(scores, tie_break, seed);
}

std::size_t erm_base(const TrainingSet& train, std::size_t representation, const FiniteRepresentationClass& H,
                     const FiniteTaskClass& F, TieBreak tie_break, std::uint64_t seed)
{
    if (representation >= H.maps.size())
        throw std::invalid_argument("representation index out of range");
    std::vector<std::size_t> counts, errors;
    task_errors(train, H.maps[representation], F, counts, errors);
    return pick(errors, tie_break, seed);
}

double oracle_task_loss(const DiscreteEnvironment& env, std::size_t task, std::size_t representation)
{
    return population_loss(env, task, representation, oracle_base(env, task, representation));
}

std::size_t oracle_base(const DiscreteEnvironment& env, std::size_t task, std::size_t representation)
{
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < env.task_functions.maps.size(); ++f) {
        const double loss = population_loss(env, task, representation, f);
        if (loss < best_loss - kOracleTolerance) {
            best_loss = loss;
            best = f;
        }
    }
    return best;
}

RepresentationCertificate oracle_representation(const DiscreteEnvironment& env)
{
    const std::size_t nh = env.representations.maps.size();
    const std::size_t nt = env.tasks.size();
    std::vector<double> per_task(nh * nt);
    for (std::size_t h = 0; h < nh; ++h)
        for (std::size_t t = 0; t < nt; ++t)
            per_task[h * nt + t] = oracle_task_loss(env, t, h);

    RepresentationCertificate cert;
    cert.mixture_loss = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < nh; ++h) {
        double mix = 0.0;
        for (std::size_t t = 0; t < nt; ++t)
            mix += env.task_distribution[t] * per_task[h * nt + t];
        if (mix < cert.mixture_loss - kOracleTolerance) {
            cert.mixture_loss = mix;
            cert.representation = h;
        }
    }
    cert.optimal_for_every_task = true;
    for (std::size_t t = 0; t < nt; ++t) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < nh; ++h)
            best = std::min(best, per_task[h * nt + t]);
        if (per_task[cert.representation * nt + t] > best + kOracleTolerance)
            cert.optimal_for_every_task = false;
    }
    return cert;
}

LossFn zero_one_loss(std::shared_ptr<const DiscreteEnvironment> env)
{
    return [env](const Hypothesis& h, const Datum& d) {
        const auto cell = env->representations.maps[h.representation][d.x];
        return env->task_functions.maps[h.task_function][cell] == d.y ? 0.0 : 1.0;
    };
}

Learners make_erm_learners(std::shared_ptr<const DiscreteEnvironment> env, TieBreak tie_break)
{
    Learners l;
    l.meta = [env, tie_break](std::span<const TrainingSet> sets, std::uint64_t seed) {
        return erm_meta(sets, env->representations, env->task_functions, tie_break, seed);
    };
    l.base = [env, tie_break](const TrainingSet& train, std::size_t, std::size_t u, std::uint64_t seed) {
        return erm_base(train, u, env->representations, env->task_functions, tie_break,
                        derive_seed(seed, tag("base"), train.size()));
    };
    l.loss = zero_one_loss(env);
    l.deterministic = tie_break == TieBreak::lexicographic;
    l.representation_count = env->representations.maps.size();
    l.task_function_count = env->task_functions.maps.size();
    return l;
}

Learners make_oracle_learners(std::shared_ptr<const DiscreteEnvironment> env)
{
    const std::size_t best = oracle_representation(*env).representation;
    Learners l;
    l.meta = [best](std::span<const TrainingSet>, std::uint64_t) { return best; };
    l.base = [env](const TrainingSet&, std::size_t task, std::size_t u, std::uint64_t) {
        return oracle_base(*env, task, u);
    };
    l.loss = zero_one_loss(env);
    l.deterministic = true;
    l.representation_count = env->representations.maps.size();
    l.task_function_count = env->task_functions.maps.size();
    return l;
}

Learners make_constant_learners(std::shared_ptr<const DiscreteEnvironment> env, Hypothesis fixed)
{
    Learners l;
    l.meta = [fixed](std::span<const TrainingSet>, std::uint64_t) { return fixed.representation; };
    l.base = [fixed](const TrainingSet&, std::size_t, std::size_t, std::uint64_t) { return fixed.task_function; };
    l.loss = zero_one_loss(env);
    l.deterministic = true;
    l.representation_count = env->representations.maps.size();
    l.task_function_count = env->task_functions.maps.size();
    return l;
}

} // namespace metacmi
