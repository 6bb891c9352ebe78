#include "metacmi/bounds.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

#include "metacmi/learners.hpp"

namespace metacmi {

namespace {

constexpr double kE = std::numbers::e;

double pairs_of(std::size_t labels)
{
    if (labels < 2)
        throw std::invalid_argument("at least two labels are required");
    const double n = static_cast<double>(labels);
    return n * (n - 1.0) / 2.0;
}

// d log(x / d), with the d = 0 limit.
double dlog(std::size_t d, double x)
{
    if (d == 0)
        return 0.0;
    const double dd = static_cast<double>(d);
    return dd * std::log(x / dd);
}

double root(double radicand) { return std::sqrt(std::max(radicand, 0.0)); }

void check_delta(double delta)
{
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("delta must lie in (0, 1)");
}

BoundValue average_draws(const std::vector<double>& values, const std::vector<double>& within)
{
    BoundValue b;
    const double d = static_cast<double>(values.size());
    if (values.empty())
        throw std::invalid_argument("no draws supplied");
    double m = 0.0;
    for (double v : values)
        m += v;
    m /= d;
    double ss = 0.0;
    for (double v : values)
        ss += (v - m) * (v - m);
    double var = values.size() > 1 ? ss / (d - 1.0) / d : 0.0;
    for (double w : within)
        var += w * w / (d * d);
    b.value = m;
    b.std_error = std::sqrt(var);
    b.infinite = std::isinf(m);
    return b;
}

} // namespace

BoundValue thm1_two_step(std::span<const TermGrid> environment, std::span<const TermGrid> task)
{
    if (environment.size() != task.size())
        throw std::invalid_argument("environment and task grids differ in number of draws");
    std::vector<double> values, within;
    for (std::size_t d = 0; d < environment.size(); ++d) {
        values.push_back(environment[d].mean_sqrt2 + task[d].mean_sqrt2);
        within.push_back(std::hypot(environment[d].mean_sqrt2_se, task[d].mean_sqrt2_se));
    }
    return average_draws(values, within);
}

BoundValue thm2_one_step(std::span<const TermGrid> one_step)
{
    std::vector<double> values, within;
    for (const auto& g : one_step) {
        values.push_back(g.mean_sqrt2);
        within.push_back(g.mean_sqrt2_se);
    }
    return average_draws(values, within);
}

double thm3_two_step(double train, double environment_cmi, double task_cmi)
{
    const double inner = std::min(1.0, invert_dm(2, train, environment_cmi));
    return invert_dm(2, inner, task_cmi);
}

double thm3_one_step(double train, double one_step_cmi) { return invert_dm(4, train, one_step_cmi); }

double cor1(double representation_given_masks, double unobserved_hypothesis, Dims dims)
{
    validate(dims);
    return std::sqrt(2.0 * representation_given_masks / static_cast<double>(dims.n_tilde)) +
           std::sqrt(2.0 * unobserved_hypothesis / static_cast<double>(dims.n));
}

Cor2Chain cor2(double all_hypotheses_cmi, double chained_cmi, const MixtureEntropies& relaxed, Dims dims)
{
    validate(dims);
    const double nn = static_cast<double>(dims.n * dims.n_tilde);
    Cor2Chain c;
    c.all_hypotheses = std::sqrt(2.0 * all_hypotheses_cmi / nn);
    c.chained = std::sqrt(2.0 * chained_cmi / nn);
    c.mutual_information =
        std::sqrt((2.0 * relaxed.representation + 2.0 * relaxed.hypotheses_given_representation) / nn);
    return c;
}

InterpolatingBound cor3_interpolating(double train, double cmi)
{
    if (std::abs(train) > 1e-12)
        throw std::invalid_argument("the interpolating bound requires zero training loss");
    if (!(cmi >= 0.0))
        throw std::invalid_argument("information term must be nonnegative");
    return {4.0 - 4.0 * std::exp(-cmi), 4.0 * cmi};
}

SauerShelah sauer_shelah(std::size_t m, std::size_t d, std::size_t labels)
{
    const double a = pairs_of(labels);
    const double la = std::log(a);
    const std::size_t top = std::min(m, d);
    std::vector<double> terms;
    for (std::size_t i = 0; i <= top; ++i) {
        const double lc = std::lgamma(static_cast<double>(m) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                          std::lgamma(static_cast<double>(m - i) + 1.0);
        terms.push_back(lc + static_cast<double>(i) * la);
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms)
        acc += std::exp(t - mx);
    SauerShelah s;
    s.log_exact = mx + std::log(acc);
    s.exact = std::exp(s.log_exact);
    if (d == 0) {
        s.log_closed_form = 0.0;
    } else if (m < d + 1) {
        s.log_closed_form = static_cast<double>(d + 1) * std::log(static_cast<double>(labels));
    } else {
        s.log_closed_form = static_cast<double>(d) * std::log(a * kE * static_cast<double>(m) / static_cast<double>(d));
    }
    s.closed_form = std::exp(s.log_closed_form);
    return s;
}

namespace {

void check_minimax(Dims dims, std::size_t d_n, std::size_t d_vc)
{
    validate(dims);
    if (2 * dims.n < d_vc + 1)
        throw std::invalid_argument("minimax bound requires 2n >= d_VC + 1");
    if (2 * dims.n_tilde < d_n + 1)
        throw std::invalid_argument("minimax bound requires 2 n_tilde >= d_N + 1");
}

} // namespace

MinimaxPair cor4_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels)
{
    check_minimax(dims, d_n, d_vc);
    const double a = pairs_of(labels);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    MinimaxPair p;
    p.two_step = root(2.0 * dlog(d_n, a * 2.0 * kE * nt) / nt) + root(2.0 * dlog(d_vc, 2.0 * kE * n) / n);
    p.one_step = root((2.0 * dlog(d_n, a * 4.0 * kE * n * nt) + 4.0 * nt * dlog(d_vc, 2.0 * kE * n)) / (n * nt));
    return p;
}

double cor5_interpolating_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels)
{
    check_minimax(dims, d_n, d_vc);
    const double a = pairs_of(labels);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    return (4.0 * dlog(d_n, a * 4.0 * kE * n * nt) + 8.0 * nt * dlog(d_vc, 2.0 * kE * n)) / (n * nt);
}

Cor6Result cor6_high_prob_minimax(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels, double delta,
                                  const Cor6Constants& constants)
{
    validate(dims);
    check_delta(delta);
    if (dims.n < 2 || dims.n_tilde < 2)
        throw std::invalid_argument("high-probability minimax bounds require n, n_tilde >= 2");
    const double a = pairs_of(labels);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    Cor6Result r;
    r.two_step_display = constants.c1 * root((dlog(d_n, a * nt) + std::log(n * std::sqrt(nt) / delta)) / nt) +
                         constants.c2 * root((dlog(d_vc, n) + std::log(std::sqrt(n) / delta)) / n);
    r.one_step_display =
        constants.c3 * root((dlog(d_n, a * n * nt) + nt * dlog(d_vc, n) + std::log(std::sqrt(n * nt) / delta)) /
                            (n * nt));
    r.two_step = root((2.0 * dlog(d_n, a * 2.0 * kE * nt) + 2.0 * std::log(3.0 / delta) +
                       2.0 * std::log(6.0 * n * std::sqrt(nt) / delta)) /
                      (nt - 1.0)) +
                 root((2.0 * nt * dlog(d_vc, 2.0 * kE * n) + 2.0 * std::log(3.0 / delta) +
                       2.0 * std::log(6.0 * std::sqrt(n * nt) / delta)) /
                      (n * nt - 1.0));
    r.one_step = root((2.0 * dlog(d_n, a * 4.0 * kE * n * nt) + 4.0 * nt * dlog(d_vc, 2.0 * kE * n) +
                       2.0 * std::log(2.0 / delta) + 2.0 * std::log(2.0 * std::sqrt(n * nt) / delta)) /
                      (n * nt - 1.0));
    return r;
}

double hoeffding_term(double delta, std::size_t m)
{
    if (!(delta > 0.0 && delta <= 1.0) || m == 0)
        throw std::invalid_argument("hoeffding_term needs delta in (0, 1] and m > 0");
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

double thm4_two_step(double kl_environment, double kl_task, Dims dims, double delta, double c1, double c2)
{
    validate(dims);
    check_delta(delta);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    return c1 * root((kl_environment + std::log(n * std::sqrt(nt) / delta)) / nt) +
           c2 * root((kl_task + std::log(std::sqrt(n) / delta)) / n);
}

double thm5_one_step(double kl, Dims dims, double delta)
{
    validate(dims);
    check_delta(delta);
    const double nn = static_cast<double>(dims.n * dims.n_tilde);
    if (nn < 2.0)
        throw std::invalid_argument("one-step high-probability bound requires n n_tilde >= 2");
    return root(2.0 * (kl + std::log(std::sqrt(nn) / delta)) / (nn - 1.0));
}

double thm6_two_step(std::span<const double> environment_kls, std::span<const double> task_kls, Dims dims,
                     double delta)
{
    validate(dims);
    check_delta(delta);
    if (environment_kls.size() != dims.n || task_kls.size() != dims.n_tilde)
        throw std::invalid_argument("KL vectors must have lengths n and n_tilde");
    if (dims.n_tilde < 2)
        throw std::invalid_argument("two-step high-probability bound requires n_tilde >= 2");
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    double env = 0.0, task = 0.0;
    for (double k : environment_kls)
        env += 2.0 * k;
    env /= n;
    for (double k : task_kls)
        task += 2.0 * k;
    return root((env + 2.0 * std::log(2.0 * n * std::sqrt(nt) / delta)) / (nt - 1.0)) +
           root((task + 2.0 * std::log(2.0 * std::sqrt(n * nt) / delta)) / (n * nt - 1.0));
}

double remark1_two_step(double kl_training_positions, double kl_task, Dims dims, double delta, double c1, double c2)
{
    validate(dims);
    check_delta(delta);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    return c1 * root((kl_training_positions + std::log(std::sqrt(nt) / delta)) / nt) +
           c2 * root((kl_task + std::log(std::sqrt(n) / delta)) / n);
}

TaskDiversity measure_task_diversity(const DiscreteEnvironment& env, std::span<const double> weights)
{
    constexpr double tol = 1e-12;
    std::vector<double> w(weights.begin(), weights.end());
    if (w.empty())
        w = env.task_distribution;
    if (w.size() != env.tasks.size())
        throw std::invalid_argument("diversity weights must match the task list");
    TaskDiversity out;
    out.best_representation = oracle_representation(env).representation;
    const std::size_t hs = out.best_representation;
    bool any_ratio = false;
    double nu = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < env.representations.maps.size(); ++h) {
        double worst = -std::numeric_limits<double>::infinity();
        double average = 0.0;
        for (std::size_t t = 0; t < env.tasks.size(); ++t) {
            const double diff = oracle_task_loss(env, t, h) - oracle_task_loss(env, t, hs);
            worst = std::max(worst, diff);
            average += w[t] * diff;
        }
        if (worst <= tol)
            continue;
        if (average > tol) {
            nu = std::min(nu, average / worst);
            any_ratio = true;
        } else {
            out.epsilon = std::max(out.epsilon, worst);
        }
    }
    out.nu = any_ratio ? nu : 1.0;
    return out;
}

double cor7_excess_specific(std::size_t m, Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels,
                            double delta, const TaskDiversity& diversity, const Cor7Constants& constants)
{
    if (m == 0)
        throw std::invalid_argument("target task needs at least one sample");
    if (!(diversity.nu > 0.0))
        throw std::invalid_argument("task diversity nu must be positive");
    const double md = static_cast<double>(m);
    const double target = root((dlog(d_vc, std::sqrt(md)) + std::log(std::sqrt(md) / delta)) / md);
    return constants.c1 * target + constants.c2 / diversity.nu * cor8_excess_random(dims, d_n, d_vc, labels, delta, 1.0) +
           diversity.epsilon;
}

double cor8_excess_random(Dims dims, std::size_t d_n, std::size_t d_vc, std::size_t labels, double delta, double c)
{
    validate(dims);
    check_delta(delta);
    const double a = pairs_of(labels);
    const double n = static_cast<double>(dims.n), nt = static_cast<double>(dims.n_tilde);
    return c * root((dlog(d_n, a * n * nt) + nt * dlog(d_vc, n) + std::log(std::sqrt(n * nt) / delta)) / (n * nt));
}

namespace {

std::uint64_t varying_bits(const MaskEnumeration& e, std::uint64_t config, LossBlock block)
{
    const Dims d = e.dims;
    const std::uint64_t meta = (std::uint64_t{1} << d.n_tilde) - 1;
    switch (block) {
    case LossBlock::full_tensor:
        return e.configurations - 1;
    case LossBlock::environment_column:
    case LossBlock::training_positions:
        return meta;
    case LossBlock::unobserved_task: {
        std::uint64_t bits = 0;
        const std::uint64_t nmask = (std::uint64_t{1} << d.n) - 1;
        for (std::size_t i = 0; i < d.n_tilde; ++i) {
            const std::size_t slot = d.task_slot(i, 1 - e.meta_bit(config, i));
            bits |= nmask << (d.n_tilde + slot * d.n);
        }
        return bits;
    }
    }
    return 0;
}

std::vector<std::uint8_t> extract(const MaskEnumeration& e, std::uint64_t c, LossBlock block, std::size_t index)
{
    const Dims d = e.dims;
    const std::uint8_t* row = e.losses(c);
    std::vector<std::uint8_t> out;
    switch (block) {
    case LossBlock::full_tensor:
        out.assign(row, row + d.sample_count());
        break;
    case LossBlock::environment_column:
        for (std::size_t i = 0; i < d.n_tilde; ++i)
            for (std::size_t k = 0; k < 2; ++k)
                out.push_back(row[d.sample_slot(i, k, index, e.mask_bit(c, i, k, index))]);
        break;
    case LossBlock::unobserved_task: {
        const std::size_t k = 1 - e.meta_bit(c, index);
        for (std::size_t j = 0; j < d.n; ++j)
            for (std::size_t l = 0; l < 2; ++l)
                out.push_back(row[d.sample_slot(index, k, j, l)]);
        break;
    }
    case LossBlock::training_positions:
        for (std::size_t i = 0; i < d.n_tilde; ++i)
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t j = 0; j < d.n; ++j)
                    out.push_back(row[d.sample_slot(i, k, j, e.mask_bit(c, i, k, j))]);
        break;
    }
    return out;
}

double observed_probability(const MaskEnumeration& e, std::uint64_t config, LossBlock block, std::size_t index,
                            std::map<std::vector<std::uint8_t>, double>* law)
{
    const std::uint64_t vary = varying_bits(e, config, block);
    const auto observed = extract(e, config, block, index);
    const std::uint64_t base = config & ~vary;
    double total = 0.0, hits = 0.0;
    std::uint64_t sub = 0;
    do {
        const auto blk = extract(e, base | sub, block, index);
        total += 1.0;
        if (blk == observed)
            hits += 1.0;
        if (law)
            (*law)[blk] += 1.0;
        sub = (sub - vary) & vary;
    } while (sub != 0);
    if (law)
        for (auto& [k, v] : *law)
            v /= total;
    return hits / total;
}

void check_block(const MaskEnumeration& e, std::uint64_t config, LossBlock block, std::size_t index)
{
    if (config >= e.configurations)
        throw std::invalid_argument("mask configuration out of range");
    if (block == LossBlock::environment_column && index >= e.dims.n)
        throw std::invalid_argument("sample pair index out of range");
    if (block == LossBlock::unobserved_task && index >= e.dims.n_tilde)
        throw std::invalid_argument("task pair index out of range");
}

} // namespace

PointwiseLossLaw pointwise_loss_law(const MaskEnumeration& e, std::uint64_t config, LossBlock block,
                                    std::size_t index)
{
    check_block(e, config, block, index);
    std::map<std::vector<std::uint8_t>, double> law;
    const double p = observed_probability(e, config, block, index, &law);
    auto to_outcome = [&](const std::vector<std::uint8_t>& blk) {
        Outcome o;
        for (auto s : blk)
            o.push_back(e.symbols[s]);
        return o;
    };
    PointwiseLossLaw out;
    out.q = DiscreteDistribution::point_mass(to_outcome(extract(e, config, block, index)));
    for (const auto& [k, v] : law) {
        out.p.outcomes.push_back(to_outcome(k));
        out.p.probabilities.push_back(v);
    }
    out.kl = -std::log(p);
    return out;
}

double PointwiseKls::environment_max() const
{
    return environment.empty() ? 0.0 : *std::max_element(environment.begin(), environment.end());
}

double PointwiseKls::task_max() const { return task.empty() ? 0.0 : *std::max_element(task.begin(), task.end()); }

PointwiseKls pointwise_kls(const MaskEnumeration& e, std::uint64_t config)
{
    check_block(e, config, LossBlock::full_tensor, 0);
    PointwiseKls k;
    k.full = -std::log(observed_probability(e, config, LossBlock::full_tensor, 0, nullptr));
    for (std::size_t j = 0; j < e.dims.n; ++j)
        k.environment.push_back(-std::log(observed_probability(e, config, LossBlock::environment_column, j, nullptr)));
    for (std::size_t i = 0; i < e.dims.n_tilde; ++i)
        k.task.push_back(-std::log(observed_probability(e, config, LossBlock::unobserved_task, i, nullptr)));
    k.training_positions = -std::log(observed_probability(e, config, LossBlock::training_positions, 0, nullptr));
    return k;
}

} // namespace metacmi
