#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "metacmi/environment.hpp"
#include "metacmi/info.hpp"
#include "metacmi/learners.hpp"
#include "metacmi/random.hpp"
#include "metacmi/supersample.hpp"

using namespace metacmi;

namespace {

// Plug-in mutual information of equally weighted (x, y) observations.
template <typename X, typename Y>
double plugin(const std::vector<std::pair<X, Y>>& obs)
{
    std::map<std::pair<X, Y>, double> joint;
    std::map<X, double> px;
    std::map<Y, double> py;
    const double n = static_cast<double>(obs.size());
    for (const auto& o : obs) {
        joint[o] += 1.0 / n;
        px[o.first] += 1.0 / n;
        py[o.second] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [k, p] : joint)
        mi += p * std::log(p / (px[k.first] * py[k.second]));
    return mi;
}

template <typename K>
double entropy(const std::vector<K>& obs)
{
    std::map<K, double> law;
    for (const auto& o : obs)
        law[o] += 1.0;
    double h = 0.0;
    for (const auto& [k, c] : law)
        h -= c / obs.size() * std::log(c / obs.size());
    return h;
}

struct OracleTerms {
    std::vector<double> environment, task, one_step;
    double all_hypotheses = 0.0;
    double representation = 0.0;
    double tensor = 0.0;
};

// Straight-line enumeration over every mask configuration using evaluate_losses.
OracleTerms oracle_terms(const MetaSupersample& z, const Learners& learners)
{
    const Dims d = z.dims;
    using Key = std::vector<double>;
    std::vector<std::vector<std::vector<std::pair<Key, int>>>> env(d.n_tilde * d.n, std::vector<std::vector<std::pair<Key, int>>>(4));
    std::vector<std::vector<std::vector<std::pair<Key, int>>>> task(d.n_tilde * d.n, std::vector<std::vector<std::pair<Key, int>>>(2));
    std::vector<std::vector<std::pair<Key, int>>> one(d.n_tilde * d.n);
    std::vector<std::vector<std::size_t>> hyps;
    std::vector<std::size_t> reps;
    std::vector<std::vector<double>> tensors;
    LearnerSeeds seeds;
    seeds.base.assign(d.n_tilde, 0);
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << d.mask_bits()); ++c) {
        const Masks m = masks_from_index(d, c);
        const LossTensor t = evaluate_losses(z, m, learners, seeds);
        auto h = t.task_functions;
        h.push_back(t.representation);
        hyps.push_back(h);
        reps.push_back(t.representation);
        tensors.push_back(t.values);
        for (std::size_t i = 0; i < d.n_tilde; ++i)
            for (std::size_t j = 0; j < d.n; ++j) {
                const int b = m.meta[i], s0 = m.bit(i, 0, j), s1 = m.bit(i, 1, j);
                const std::size_t cell = i * d.n + j;
                env[cell][s0 + 2 * s1].push_back({{t.at(i, 0, j, s0), t.at(i, 1, j, s1)}, b});
                const int u = 1 - b;
                task[cell][b].push_back({{t.at(i, u, j, 0), t.at(i, u, j, 1)}, u == 0 ? s0 : s1});
                one[cell].push_back({{t.at(i, 0, j, 0), t.at(i, 0, j, 1), t.at(i, 1, j, 0), t.at(i, 1, j, 1)},
                                     b + 2 * s0 + 4 * s1});
            }
    }
    OracleTerms out;
    for (std::size_t cell = 0; cell < d.n_tilde * d.n; ++cell) {
        double e = 0.0, k = 0.0;
        for (const auto& s : env[cell])
            e += plugin(s) / 4.0;
        for (const auto& s : task[cell])
            k += plugin(s) / 2.0;
        out.environment.push_back(e);
        out.task.push_back(k);
        out.one_step.push_back(plugin(one[cell]));
    }
    out.all_hypotheses = entropy(hyps);
    out.representation = entropy(reps);
    out.tensor = entropy(tensors);
    return out;
}

// Base learner memorizes the input of its first training datum; loss 0 exactly on that input.
Learners memorizing_learners()
{
    Learners l;
    l.meta = [](std::span<const TrainingSet>, std::uint64_t) { return std::size_t{0}; };
    l.base = [](const TrainingSet& t, std::size_t, std::size_t, std::uint64_t) { return std::size_t{t[0].x}; };
    l.loss = [](const Hypothesis& h, const Datum& d) { return h.task_function == d.x ? 0.0 : 1.0; };
    l.deterministic = true;
    return l;
}

MetaSupersample distinct_inputs(Dims dims)
{
    MetaSupersample z;
    z.dims = dims;
    z.tasks.assign(dims.task_count(), 0);
    for (std::size_t s = 0; s < dims.sample_count(); ++s)
        z.data.push_back(Datum{static_cast<std::uint32_t>(s), 0});
    return z;
}

} // namespace

TEST_CASE("kl divergence")
{
    const DiscreteDistribution point = DiscreteDistribution::point_mass({1.0});
    const DiscreteDistribution coin{{{0.0}, {1.0}}, {0.5, 0.5}};
    CHECK(kl_divergence(point, coin) == doctest::Approx(std::log(2.0)));
    CHECK(std::isinf(kl_divergence(coin, point)));
    CHECK(kl_divergence(coin, coin) == 0.0);
    CHECK_THROWS_AS(validate(DiscreteDistribution{{{0.0}}, {0.5}}), std::invalid_argument);
}

TEST_CASE("binary kl")
{
    CHECK(binary_kl(1.0, 0.75) == doctest::Approx(0.28768).epsilon(1e-4));
    CHECK(binary_kl(0.5, 0.25) == doctest::Approx(0.14384).epsilon(1e-4));
    CHECK(binary_kl(0.3, 0.3) == 0.0);
    CHECK(std::isinf(binary_kl(0.5, 0.0)));
    CHECK(binary_kl(0.0, 0.5) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("binary kl inversion")
{
    for (double c : {0.01, 0.1, 0.5, 2.0})
        CHECK(invert_dm(4, 0.0, c) == doctest::Approx(4.0 - 4.0 * std::exp(-c)).epsilon(1e-9));
    CHECK(invert_dm(2, 0.3, 0.0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(invert_dm(2, 0.0, 0.1) == doctest::Approx(0.19033).epsilon(1e-4));
    CHECK(invert_dm(3, 0.2, std::numeric_limits<double>::infinity()) == doctest::Approx(2.8));
    SplitMix64 g(4);
    for (int k = 0; k < 200; ++k) {
        const int m = 2 + static_cast<int>(g.below(4));
        const double q = g.uniform(), c = 2.0 * g.uniform();
        const double p = invert_dm(m, q, c);
        CHECK(p >= (m - 1) * q - 1e-12);
        CHECK(p <= m - q + 1e-12);
        CHECK(binary_kl(q, std::min(1.0, (q + p) / m)) <= c + 1e-9);
        CHECK(invert_dm(m, q, c + 0.1) >= p - 1e-12);
    }
    CHECK_THROWS_AS(invert_dm(1, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(invert_dm(2, 1.5, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(invert_dm(2, 0.5, -1.0), std::invalid_argument);
}

TEST_CASE("mutual information of a correlated bit pair")
{
    const auto joint = JointHistogram::from_rows({{0.4, 0.1}, {0.1, 0.4}});
    const double expect = std::log(2.0) + 0.8 * std::log(0.8) + 0.2 * std::log(0.2);
    CHECK(expect == doctest::Approx(0.19274).epsilon(1e-4));
    CHECK(mutual_information(joint) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(mutual_information(JointHistogram::from_rows({{0.25, 0.25}, {0.25, 0.25}})) == doctest::Approx(0.0));
    CHECK(mutual_information(JointHistogram::from_rows({{4, 1}, {1, 4}})) == doctest::Approx(expect).epsilon(1e-12));

    const std::vector<JointHistogram> strata{joint, JointHistogram::from_rows({{0.5, 0.0}, {0.0, 0.5}})};
    const std::vector<double> w{0.5, 0.5};
    CHECK(conditional_mutual_information(strata, w) == doctest::Approx(0.5 * expect + 0.5 * std::log(2.0)));
    const std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(conditional_mutual_information(strata, bad), std::invalid_argument);

    SplitMix64 g(12);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> samples;
    for (int k = 0; k < 100000; ++k) {
        const std::uint64_t a = g.below(2);
        const std::uint64_t b = g.uniform() < 0.8 ? a : 1 - a;
        samples.emplace_back(a, b);
    }
    const auto est = plugin_mi_from_samples(samples, 50, 1);
    CHECK(est.std_error > 0.0);
    CHECK(std::abs(est.value - expect) <= std::max(3.0 * est.std_error, 0.005));
}

TEST_CASE("exact terms match a straight-line enumeration")
{
    const std::vector<std::pair<std::string, Dims>> cases{
        {"thresholds", {1, 1}}, {"thresholds", {1, 3}}, {"lookup", {2, 2}}, {"thresholds", {2, 2}}};
    for (const auto& [name, dims] : cases) {
        auto env = std::make_shared<const DiscreteEnvironment>(preset_environment(name, 0.2));
        const auto learners = make_erm_learners(env, TieBreak::lexicographic);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto z = sample_supersample(*env, dims, seed);
            const auto e = enumerate_masks(z, learners);
            const auto terms = ecmi_terms_exact(e);
            const auto oracle = oracle_terms(z, learners);
            for (std::size_t cell = 0; cell < dims.n_tilde * dims.n; ++cell) {
                CHECK(terms.environment.cells[cell].value == doctest::Approx(oracle.environment[cell]).epsilon(1e-10));
                CHECK(terms.task.cells[cell].value == doctest::Approx(oracle.task[cell]).epsilon(1e-10));
                CHECK(terms.one_step.cells[cell].value == doctest::Approx(oracle.one_step[cell]).epsilon(1e-10));
            }
            const auto p = parametric_cmis_exact(e);
            CHECK(p.all_hypotheses == doctest::Approx(oracle.all_hypotheses).epsilon(1e-10));
            CHECK(p.representation == doctest::Approx(oracle.representation).epsilon(1e-10));
            CHECK(loss_tensor_information(e) == doctest::Approx(oracle.tensor).epsilon(1e-10));
            CHECK(p.chained() + 1e-10 >= p.all_hypotheses);
        }
    }
}

TEST_CASE("memorizing learner reveals the unobserved mask")
{
    const auto z = distinct_inputs(Dims{1, 1});
    const auto terms = ecmi_terms_exact(enumerate_masks(z, memorizing_learners()));
    CHECK(terms.task.mean_cmi == doctest::Approx(std::log(2.0)));
    CHECK(terms.environment.mean_cmi == doctest::Approx(0.0));
    CHECK(terms.one_step.mean_cmi == doctest::Approx(std::log(4.0)));
    CHECK(terms.task.mean_sqrt2 == doctest::Approx(std::sqrt(2.0 * std::log(2.0))));
}

TEST_CASE("data-ignoring learners carry no information")
{
    auto env = std::make_shared<const DiscreteEnvironment>(preset_environment("lookup", 0.1));
    const auto learners = make_constant_learners(env, {1, 1});
    const auto z = sample_supersample(*env, Dims{2, 2}, 9);
    const auto e = enumerate_masks(z, learners);
    const auto terms = ecmi_terms_exact(e);
    for (auto f : {EcmiFamily::environment, EcmiFamily::task, EcmiFamily::one_step}) {
        CHECK(terms.get(f).mean_cmi == 0.0);
        CHECK(terms.get(f).mean_sqrt2 == 0.0);
    }
    const auto p = parametric_cmis_exact(e);
    CHECK(p.all_hypotheses == 0.0);
    CHECK(p.chained() == 0.0);
    CHECK(p.unobserved_hypothesis == 0.0);
    CHECK(loss_tensor_information(e) == 0.0);
    const auto mc = ecmi_terms_mc(z, learners, McOptions{200, 10, 20, 3});
    CHECK(mc.environment.mean_cmi == 0.0);
}

TEST_CASE("monte carlo terms agree with exact enumeration")
{
    auto env = std::make_shared<const DiscreteEnvironment>(preset_environment("thresholds", 0.1));
    const auto learners = make_erm_learners(env, TieBreak::lexicographic);
    const auto z = sample_supersample(*env, Dims{1, 2}, 5);
    const auto exact = ecmi_terms_exact(enumerate_masks(z, learners));
    const auto mc = ecmi_terms_mc(z, learners, McOptions{20000, 10, 50, 8});
    for (auto f : {EcmiFamily::environment, EcmiFamily::task, EcmiFamily::one_step}) {
        const auto& a = exact.get(f);
        const auto& b = mc.get(f);
        CHECK(b.method == EstimatorMethod::monte_carlo);
        CHECK(std::abs(a.mean_cmi - b.mean_cmi) <= std::max(4.0 * b.mean_cmi_se, 0.01));
    }
}

TEST_CASE("enumeration guards")
{
    auto env = std::make_shared<const DiscreteEnvironment>(preset_environment("thresholds", 0.1));
    const auto z = sample_supersample(*env, Dims{1, 1}, 0);
    CHECK_THROWS_AS(enumerate_masks(z, make_erm_learners(env, TieBreak::randomized)), std::invalid_argument);
    const auto big = sample_supersample(*env, Dims{3, 4}, 0);
    CHECK_THROWS_AS(enumerate_masks(big, make_erm_learners(env, TieBreak::lexicographic)), std::invalid_argument);
}

TEST_CASE("proof lemmas hold on random joints")
{
    const auto rep = verify_proof_lemmas(500, 3);
    CHECK(rep.trials == 500);
    CHECK(rep.violations() == 0);
    CHECK(rep.worst_margin >= -1e-12);
}
