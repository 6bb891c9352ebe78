#include "metacmi/info.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "metacmi/random.hpp"

namespace metacmi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_sd(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Mutual information of coded samples under integer weights.
double coded_mi(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b, std::size_t na,
                std::size_t nb, const std::vector<std::uint32_t>& weights)
{
    JointHistogram j(na, nb);
    for (std::size_t s = 0; s < a.size(); ++s)
        j.at(a[s], b[s]) += static_cast<double>(weights[s]);
    return mutual_information(j);
}

} // namespace

void validate(const DiscreteDistribution& d)
{
    if (d.outcomes.size() != d.probabilities.size())
        throw std::invalid_argument("distribution outcomes and probabilities differ in length");
    double total = 0.0;
    for (double p : d.probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw std::invalid_argument("distribution has a negative or non-finite probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("distribution does not sum to 1");
}

double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q)
{
    validate(p);
    validate(q);
    std::map<Outcome, double> qmass;
    for (std::size_t i = 0; i < q.outcomes.size(); ++i)
        qmass[q.outcomes[i]] += q.probabilities[i];
    std::map<Outcome, double> pmass;
    for (std::size_t i = 0; i < p.outcomes.size(); ++i)
        pmass[p.outcomes[i]] += p.probabilities[i];
    double total = 0.0;
    for (const auto& [o, pv] : pmass) {
        if (pv <= 0.0)
            continue;
        const auto it = qmass.find(o);
        if (it == qmass.end() || it->second <= 0.0)
            return kInf;
        total += pv * (std::log(pv) - std::log(it->second));
    }
    return std::max(total, 0.0);
}

double binary_kl(double p, double q)
{
    if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0))
        throw std::invalid_argument("binary_kl arguments must lie in [0, 1]");
    double total = 0.0;
    if (p > 0.0) {
        if (q <= 0.0)
            return kInf;
        total += p * (std::log(p) - std::log(q));
    }
    if (p < 1.0) {
        if (q >= 1.0)
            return kInf;
        total += (1.0 - p) * (std::log1p(-p) - std::log1p(-q));
    }
    return std::max(total, 0.0);
}

JointHistogram JointHistogram::from_rows(const std::vector<std::vector<double>>& m)
{
    if (m.empty() || m.front().empty())
        throw std::invalid_argument("joint histogram is empty");
    JointHistogram j(m.size(), m.front().size());
    for (std::size_t r = 0; r < m.size(); ++r) {
        if (m[r].size() != j.cols)
            throw std::invalid_argument("joint histogram rows differ in length");
        for (std::size_t c = 0; c < j.cols; ++c)
            j.at(r, c) = m[r][c];
    }
    return j;
}

double mutual_information(const JointHistogram& joint)
{
    if (joint.weights.size() != joint.rows * joint.cols)
        throw std::invalid_argument("joint histogram has inconsistent shape");
    double total = 0.0;
    for (double w : joint.weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("joint histogram has a negative or non-finite weight");
        total += w;
    }
    if (total <= 0.0)
        throw std::invalid_argument("joint histogram has no mass");
    std::vector<double> rs(joint.rows, 0.0), cs(joint.cols, 0.0);
    for (std::size_t r = 0; r < joint.rows; ++r)
        for (std::size_t c = 0; c < joint.cols; ++c) {
            rs[r] += joint.at(r, c);
            cs[c] += joint.at(r, c);
        }
    double mi = 0.0;
    for (std::size_t r = 0; r < joint.rows; ++r)
        for (std::size_t c = 0; c < joint.cols; ++c) {
            const double w = joint.at(r, c);
            if (w > 0.0)
                mi += w / total * std::log(w * total / (rs[r] * cs[c]));
        }
    return std::max(mi, 0.0);
}

double conditional_mutual_information(std::span<const JointHistogram> strata, std::span<const double> weights)
{
    if (strata.size() != weights.size())
        throw std::invalid_argument("strata and weights differ in length");
    double total = 0.0, wsum = 0.0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        if (weights[s] < 0.0)
            throw std::invalid_argument("negative stratum weight");
        wsum += weights[s];
        if (weights[s] > 0.0)
            total += weights[s] * mutual_information(strata[s]);
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("stratum weights do not sum to 1");
    return total;
}

double CmiEstimate::mean_sqrt2() const
{
    if (conditional_values.empty())
        return std::sqrt(2.0 * value);
    double total = 0.0;
    for (double v : conditional_values)
        total += std::sqrt(2.0 * v);
    return total / static_cast<double>(conditional_values.size());
}

CmiEstimate plugin_mi_from_samples(std::span<const std::pair<std::uint64_t, std::uint64_t>> samples,
                                   std::size_t bootstrap, std::uint64_t seed)
{
    if (samples.empty())
        throw std::invalid_argument("no samples");
    std::map<std::uint64_t, std::uint32_t> ai, bi;
    for (const auto& [a, b] : samples) {
        ai.emplace(a, 0);
        bi.emplace(b, 0);
    }
    std::uint32_t next = 0;
    for (auto& [k, v] : ai)
        v = next++;
    next = 0;
    for (auto& [k, v] : bi)
        v = next++;
    std::vector<std::uint32_t> a(samples.size()), b(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        a[s] = ai[samples[s].first];
        b[s] = bi[samples[s].second];
    }
    std::vector<std::uint32_t> w(samples.size(), 1);
    CmiEstimate est;
    est.method = EstimatorMethod::monte_carlo;
    est.n_inner = samples.size();
    est.value = coded_mi(a, b, ai.size(), bi.size(), w);
    std::vector<double> reps;
    SplitMix64 g(derive_seed(seed, tag("plugin-bootstrap")));
    for (std::size_t r = 0; r < bootstrap; ++r) {
        std::fill(w.begin(), w.end(), 0);
        for (std::size_t s = 0; s < samples.size(); ++s)
            ++w[g.below(samples.size())];
        reps.push_back(coded_mi(a, b, ai.size(), bi.size(), w));
    }
    est.std_error = sample_sd(reps);
    return est;
}

double invert_dm(int m, double q, double c)
{
    if (m < 2)
        throw std::invalid_argument("invert_dm needs m >= 2");
    if (!(q >= 0.0 && q <= 1.0))
        throw std::invalid_argument("invert_dm needs q in [0, 1]");
    if (!(c >= 0.0))
        throw std::invalid_argument("invert_dm needs c >= 0");
    const double md = static_cast<double>(m);
    double lo = (md - 1.0) * q;
    double hi = md - q;
    if (std::isinf(c) || hi <= lo)
        return hi;
    if (c == 0.0)
        return lo;
    auto f = [&](double p) { return binary_kl(q, std::min(1.0, (q + p) / md)); };
    if (f(hi) <= c)
        return hi;
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (f(mid) <= c)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

const TermGrid& EcmiTermSet::get(EcmiFamily f) const
{
    switch (f) {
    case EcmiFamily::environment:
        return environment;
    case EcmiFamily::task:
        return task;
    case EcmiFamily::one_step:
        break;
    }
    return one_step;
}

MixtureEntropies mixture_entropies(std::span<const HypothesisLaw> laws)
{
    MixtureEntropies out;
    if (laws.empty())
        return out;
    const double scale = 1.0 / static_cast<double>(laws.size());
    auto entropy = [](const auto& m) {
        double h = 0.0;
        for (const auto& [k, p] : m)
            if (p > 0.0)
                h -= p * std::log(p);
        return h;
    };
    std::map<std::uint32_t, double> u;
    for (const auto& law : laws)
        for (const auto& [k, p] : law.representation)
            u[k] += scale * p;
    out.representation = entropy(u);
    const std::size_t pairs = laws.front().pairs.size();
    for (std::size_t i = 0; i < pairs; ++i) {
        std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, double> joint;
        for (const auto& law : laws)
            for (const auto& [k, p] : law.pairs.at(i))
                joint[k] += scale * p;
        out.hypotheses_given_representation += std::max(0.0, entropy(joint) - out.representation);
    }
    return out;
}

namespace {

std::vector<double> random_weights(SplitMix64& g, std::size_t count, bool sparse)
{
    std::vector<double> w(count);
    double total = 0.0;
    for (auto& v : w) {
        v = (sparse && g.uniform() < 0.25) ? 0.0 : g.uniform();
        total += v;
    }
    if (total <= 0.0) {
        w[g.below(count)] = 1.0;
        total = 1.0;
    }
    for (auto& v : w)
        v /= total;
    return w;
}

} // namespace

LemmaReport verify_proof_lemmas(std::size_t trials, std::uint64_t seed)
{
    constexpr double tol = 1e-12;
    LemmaReport rep;
    rep.trials = trials;
    rep.worst_margin = kInf;
    auto record = [&](double margin, std::size_t& counter) {
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < -tol)
            ++counter;
    };
    for (std::size_t t = 0; t < trials; ++t) {
        SplitMix64 g(derive_seed(seed, tag("lemma"), t));
        const bool sparse = g.uniform() < 0.3;

        // Centered bounded functions and binary KL under a random 4x4 joint.
        const std::size_t nx = 4, ny = 4;
        const auto p = random_weights(g, nx * ny, sparse);
        JointHistogram joint(nx, ny);
        joint.weights = p;
        const double mi = mutual_information(joint);
        std::vector<double> px(nx, 0.0), py(ny, 0.0);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t y = 0; y < ny; ++y) {
                px[x] += p[x * ny + y];
                py[y] += p[x * ny + y];
            }
        std::vector<double> f(nx * ny);
        double center = 0.0;
        for (std::size_t c = 0; c < f.size(); ++c) {
            f[c] = 2.0 * g.uniform() - 1.0;
            center += px[c / ny] * py[c % ny] * f[c];
        }
        double scale = 1.0;
        for (auto& v : f) {
            v -= center;
            scale = std::max(scale, std::abs(v));
        }
        double ef = 0.0;
        for (std::size_t c = 0; c < f.size(); ++c)
            ef += p[c] * f[c] / scale;
        record(std::sqrt(2.0 * mi) - std::abs(ef), rep.centered_violations);

        double ej = 0.0, ep = 0.0;
        for (std::size_t c = 0; c < f.size(); ++c) {
            const double gv = g.uniform();
            ej += p[c] * gv;
            ep += px[c / ny] * py[c % ny] * gv;
        }
        record(mi - binary_kl(std::clamp(ej, 0.0, 1.0), std::clamp(ep, 0.0, 1.0)), rep.binary_kl_violations);

        // Conditioning on an independent variable does not decrease information.
        {
            const std::size_t a = 3, z = 3, b = 3;
            const auto pa = random_weights(g, a, sparse);
            const auto pz = random_weights(g, z, sparse);
            JointHistogram marginal(a, b);
            double conditional = 0.0;
            for (std::size_t zi = 0; zi < z; ++zi) {
                JointHistogram stratum(a, b);
                for (std::size_t ai = 0; ai < a; ++ai) {
                    const auto py_given = random_weights(g, b, sparse);
                    for (std::size_t bi = 0; bi < b; ++bi) {
                        stratum.at(ai, bi) = pa[ai] * py_given[bi];
                        marginal.at(ai, bi) += pz[zi] * pa[ai] * py_given[bi];
                    }
                }
                if (pz[zi] > 0.0)
                    conditional += pz[zi] * mutual_information(stratum);
            }
            record(conditional - mutual_information(marginal), rep.independence_violations);
        }

        // Averaging over independent coordinates.
        {
            const std::size_t parts = 2 + g.below(2);
            const std::size_t card = 3, b = 3;
            std::vector<std::vector<double>> marg;
            for (std::size_t s = 0; s < parts; ++s)
                marg.push_back(random_weights(g, card, sparse));
            std::size_t states = 1;
            for (std::size_t s = 0; s < parts; ++s)
                states *= card;
            JointHistogram full(states, b);
            std::vector<JointHistogram> single(parts, JointHistogram(card, b));
            for (std::size_t x = 0; x < states; ++x) {
                double px_joint = 1.0;
                std::size_t rest = x;
                std::vector<std::size_t> coord(parts);
                for (std::size_t s = 0; s < parts; ++s) {
                    coord[s] = rest % card;
                    rest /= card;
                    px_joint *= marg[s][coord[s]];
                }
                const auto py_given = random_weights(g, b, sparse);
                for (std::size_t bi = 0; bi < b; ++bi) {
                    full.at(x, bi) = px_joint * py_given[bi];
                    for (std::size_t s = 0; s < parts; ++s)
                        single[s].at(coord[s], bi) += px_joint * py_given[bi];
                }
            }
            const double whole = mutual_information(full);
            double avg_sqrt = 0.0;
            for (std::size_t s = 0; s < parts; ++s)
                avg_sqrt += std::sqrt(mutual_information(single[s]));
            avg_sqrt /= static_cast<double>(parts);
            record(std::sqrt(whole / static_cast<double>(parts)) - avg_sqrt, rep.averaging_violations);
        }
    }
    return rep;
}

} // namespace metacmi
