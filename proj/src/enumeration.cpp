#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "metacmi/info.hpp"
#include "metacmi/random.hpp"

namespace metacmi {

namespace {

// Joint counts over (coded x, coded y) with linear lookup; alphabets here are tiny.
class SmallJoint {
public:
    void add(std::uint64_t x, std::uint64_t y, double w = 1.0)
    {
        if (last_ < entries_.size() && entries_[last_].x == x && entries_[last_].y == y) {
            entries_[last_].w += w;
            return;
        }
        for (std::size_t e = 0; e < entries_.size(); ++e)
            if (entries_[e].x == x && entries_[e].y == y) {
                entries_[e].w += w;
                last_ = e;
                return;
            }
        last_ = entries_.size();
        entries_.push_back({x, y, w});
    }

    double total() const
    {
        double t = 0.0;
        for (const auto& e : entries_)
            t += e.w;
        return t;
    }

    double mi() const
    {
        const double n = total();
        if (n <= 0.0)
            return 0.0;
        std::vector<std::pair<std::uint64_t, double>> mx, my;
        auto bump = [](std::vector<std::pair<std::uint64_t, double>>& m, std::uint64_t k, double w) {
            for (auto& [kk, v] : m)
                if (kk == k) {
                    v += w;
                    return;
                }
            m.emplace_back(k, w);
        };
        for (const auto& e : entries_) {
            bump(mx, e.x, e.w);
            bump(my, e.y, e.w);
        }
        auto find = [](const std::vector<std::pair<std::uint64_t, double>>& m, std::uint64_t k) {
            for (const auto& [kk, v] : m)
                if (kk == k)
                    return v;
            return 0.0;
        };
        double total = 0.0;
        for (const auto& e : entries_)
            if (e.w > 0.0)
                total += e.w / n * std::log(e.w * n / (find(mx, e.x) * find(my, e.y)));
        return std::max(total, 0.0);
    }

    double x_entropy() const
    {
        const double n = total();
        std::map<std::uint64_t, double> mx;
        for (const auto& e : entries_)
            mx[e.x] += e.w;
        double h = 0.0;
        for (const auto& [k, w] : mx)
            if (w > 0.0)
                h -= w / n * std::log(w / n);
        return h;
    }

    void clear()
    {
        entries_.clear();
        last_ = 0;
    }

private:
    struct Entry {
        std::uint64_t x;
        std::uint64_t y;
        double w;
    };
    std::vector<Entry> entries_;
    std::size_t last_ = 0;
};

std::size_t strata_count(EcmiFamily f)
{
    switch (f) {
    case EcmiFamily::environment:
        return 4;
    case EcmiFamily::task:
        return 2;
    case EcmiFamily::one_step:
        break;
    }
    return 1;
}

struct Observation {
    std::uint32_t stratum;
    std::uint64_t x;
    std::uint64_t y;
};

constexpr std::size_t kFamilies = 3;
constexpr EcmiFamily kFamilyOrder[kFamilies] = {EcmiFamily::environment, EcmiFamily::task, EcmiFamily::one_step};

/*
 * Observations of every family for pair i, sample pair j, given a loss-code
 * accessor sym(k, l) for (i, k, j, l), the meta bit and the two in-task bits.
 */
template <typename Sym>
void observe(Sym&& sym, unsigned b, unsigned s0, unsigned s1, Observation out[kFamilies])
{
    const std::uint64_t own0 = sym(0, s0), own1 = sym(1, s1);
    out[0] = {s0 | (s1 << 1), own0 | (own1 << 8), b};
    const unsigned u = 1 - b;
    const unsigned su = u == 0 ? s0 : s1;
    out[1] = {b, sym(u, 0) | (sym(u, 1) << 8), su};
    out[2] = {0, sym(0, 0) | (sym(0, 1) << 8) | (sym(1, 0) << 16) | (sym(1, 1) << 24), b | (s0 << 1) | (s1 << 2)};
}

void finish_grid(TermGrid& g)
{
    double m = 0.0, s = 0.0;
    for (const auto& c : g.cells) {
        m += c.value;
        s += c.mean_sqrt2();
    }
    const double count = static_cast<double>(g.cells.size());
    g.mean_cmi = m / count;
    g.mean_sqrt2 = s / count;
}

std::uint64_t in_task_bits(const MaskEnumeration& e, std::uint64_t config, std::size_t slot)
{
    const std::uint64_t nmask = (std::uint64_t{1} << e.dims.n) - 1;
    return (config >> (e.dims.n_tilde + slot * e.dims.n)) & nmask;
}

} // namespace

MaskEnumeration enumerate_masks(const MetaSupersample& z, const Learners& learners, const LearnerSeeds& seeds)
{
    const Dims dims = z.dims;
    validate(dims);
    if (!learners.deterministic)
        throw std::invalid_argument("exact enumeration requires deterministic learners");
    if (dims.mask_bits() > kMaxEnumerationBits)
        throw std::invalid_argument("mask space of 2^" + std::to_string(dims.mask_bits()) +
                                    " configurations exceeds the enumeration guard of 2^" +
                                    std::to_string(kMaxEnumerationBits) + "; use the Monte Carlo estimator");
    MaskEnumeration e;
    e.dims = dims;
    e.configurations = std::uint64_t{1} << dims.mask_bits();
    e.loss_symbols.resize(e.configurations * dims.sample_count());
    e.representation.resize(e.configurations);
    e.task_functions.resize(e.configurations * dims.task_count());

    LearnerSeeds s = seeds;
    s.base.resize(dims.n_tilde, 0);
    const std::size_t nt = dims.n_tilde, n = dims.n;

    std::unordered_map<std::uint64_t, std::uint32_t> u_cache;
    std::unordered_map<std::uint64_t, std::uint32_t> w_cache;
    std::map<std::tuple<std::size_t, std::uint32_t, std::uint32_t>, std::vector<std::uint8_t>> loss_cache;

    auto intern = [&](double v) -> std::uint8_t {
        for (std::size_t k = 0; k < e.symbols.size(); ++k)
            if (e.symbols[k] == v)
                return static_cast<std::uint8_t>(k);
        if (e.symbols.size() >= 255)
            throw std::invalid_argument("too many distinct loss values for exact enumeration");
        e.symbols.push_back(v);
        return static_cast<std::uint8_t>(e.symbols.size() - 1);
    };

    for (std::uint64_t c = 0; c < e.configurations; ++c) {
        std::uint64_t ukey = c & ((std::uint64_t{1} << nt) - 1);
        for (std::size_t i = 0; i < nt; ++i)
            ukey |= in_task_bits(e, c, dims.task_slot(i, (c >> i) & 1U)) << (nt + i * n);
        auto uit = u_cache.find(ukey);
        if (uit == u_cache.end()) {
            const auto train = meta_training_set(z, masks_from_index(dims, c));
            const std::size_t u = learners.meta(std::span<const TrainingSet>(train), s.meta);
            if (learners.representation_count != 0 && u >= learners.representation_count)
                throw std::logic_error("meta learner returned a representation outside its class");
            uit = u_cache.emplace(ukey, static_cast<std::uint32_t>(u)).first;
        }
        const std::uint32_t u = uit->second;
        e.representation[c] = u;
        std::uint8_t* row = e.loss_symbols.data() + c * dims.sample_count();
        std::uint32_t* wrow = e.task_functions.data() + c * dims.task_count();
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t k = 0; k < 2; ++k) {
                const std::size_t slot = dims.task_slot(i, k);
                const std::uint64_t sb = in_task_bits(e, c, slot);
                const std::uint64_t wkey = ((static_cast<std::uint64_t>(u) * dims.task_count() + slot) << n) | sb;
                auto wit = w_cache.find(wkey);
                if (wit == w_cache.end()) {
                    TrainingSet train;
                    for (std::size_t j = 0; j < n; ++j)
                        train.push_back(z.at(i, k, j, (sb >> j) & 1U));
                    const std::size_t w = learners.base(train, z.task(i, k), u, s.base[i]);
                    if (learners.task_function_count != 0 && w >= learners.task_function_count)
                        throw std::logic_error("base learner returned a task function outside its class");
                    wit = w_cache.emplace(wkey, static_cast<std::uint32_t>(w)).first;
                }
                const std::uint32_t w = wit->second;
                wrow[slot] = w;
                auto lit = loss_cache.find({slot, u, w});
                if (lit == loss_cache.end()) {
                    std::vector<std::uint8_t> syms(2 * n);
                    const Hypothesis h{u, w};
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t l = 0; l < 2; ++l)
                            syms[2 * j + l] = intern(learners.loss(h, z.at(i, k, j, l)));
                    lit = loss_cache.emplace(std::tuple{slot, u, w}, std::move(syms)).first;
                }
                std::copy(lit->second.begin(), lit->second.end(), row + dims.sample_slot(i, k, 0, 0));
            }
        }
    }
    return e;
}

EcmiTermSet ecmi_terms_exact(const MaskEnumeration& e)
{
    const Dims dims = e.dims;
    const std::size_t cells = dims.n_tilde * dims.n;
    std::vector<SmallJoint> joints;
    std::size_t offsets[kFamilies];
    std::size_t total = 0;
    for (std::size_t f = 0; f < kFamilies; ++f) {
        offsets[f] = total;
        total += cells * strata_count(kFamilyOrder[f]);
    }
    joints.resize(total);

    Observation obs[kFamilies];
    for (std::uint64_t c = 0; c < e.configurations; ++c) {
        const std::uint8_t* row = e.losses(c);
        for (std::size_t i = 0; i < dims.n_tilde; ++i) {
            const unsigned b = e.meta_bit(c, i);
            for (std::size_t j = 0; j < dims.n; ++j) {
                const unsigned s0 = e.mask_bit(c, i, 0, j), s1 = e.mask_bit(c, i, 1, j);
                observe([&](unsigned k, unsigned l) -> std::uint64_t { return row[dims.sample_slot(i, k, j, l)]; },
                        b, s0, s1, obs);
                const std::size_t cell = i * dims.n + j;
                for (std::size_t f = 0; f < kFamilies; ++f) {
                    const std::size_t idx = offsets[f] + cell * strata_count(kFamilyOrder[f]) + obs[f].stratum;
                    joints[idx].add(obs[f].x, obs[f].y);
                }
            }
        }
    }

    EcmiTermSet out;
    TermGrid* grids[kFamilies] = {&out.environment, &out.task, &out.one_step};
    for (std::size_t f = 0; f < kFamilies; ++f) {
        TermGrid& g = *grids[f];
        g.dims = dims;
        g.family = kFamilyOrder[f];
        g.method = EstimatorMethod::exact;
        const std::size_t ns = strata_count(g.family);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            CmiEstimate est;
            est.method = EstimatorMethod::exact;
            est.n_inner = e.configurations;
            double sum = 0.0;
            for (std::size_t st = 0; st < ns; ++st) {
                const double v = joints[offsets[f] + cell * ns + st].mi();
                est.conditional_values.push_back(v);
                sum += v;
            }
            est.value = sum / static_cast<double>(ns);
            g.cells.push_back(std::move(est));
        }
        finish_grid(g);
    }
    return out;
}

TermGrid ecmi_terms_exact(const MetaSupersample& z, const Learners& learners, EcmiFamily family)
{
    return ecmi_terms_exact(enumerate_masks(z, learners)).get(family);
}

namespace {

struct McEvaluation {
    // [family][cell][stratum] plug-in values; empty strata are marked NaN.
    std::vector<std::vector<std::vector<double>>> strata;
};

McEvaluation evaluate_observations(const std::vector<Observation>& obs, std::size_t draws, std::size_t cells,
                                   const std::vector<std::uint32_t>& weights)
{
    McEvaluation ev;
    ev.strata.resize(kFamilies);
    std::vector<SmallJoint> joints(4);
    for (std::size_t f = 0; f < kFamilies; ++f) {
        const std::size_t ns = strata_count(kFamilyOrder[f]);
        ev.strata[f].resize(cells);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            for (auto& j : joints)
                j.clear();
            for (std::size_t r = 0; r < draws; ++r) {
                if (weights[r] == 0)
                    continue;
                const Observation& o = obs[(r * cells + cell) * kFamilies + f];
                joints[o.stratum].add(o.x, o.y, static_cast<double>(weights[r]));
            }
            auto& out = ev.strata[f][cell];
            out.resize(ns);
            for (std::size_t st = 0; st < ns; ++st)
                out[st] = joints[st].total() > 0.0 ? joints[st].mi() : std::nan("");
        }
    }
    return ev;
}

double stratum_mean(const std::vector<double>& v, bool sqrt2)
{
    double total = 0.0;
    std::size_t count = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            total += sqrt2 ? std::sqrt(2.0 * x) : x;
            ++count;
        }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

double sd(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

} // namespace

EcmiTermSet ecmi_terms_mc(const MetaSupersample& z, const Learners& learners, const McOptions& options)
{
    const Dims dims = z.dims;
    validate(dims);
    if (options.n_inner == 0)
        throw std::invalid_argument("Monte Carlo estimation needs at least one inner draw");
    if (options.bins < 2 || options.bins > 256)
        throw std::invalid_argument("loss binning needs between 2 and 256 bins");
    const std::size_t cells = dims.n_tilde * dims.n;
    const std::size_t draws = options.n_inner;
    std::vector<Observation> obs(draws * cells * kFamilies);

    auto bin = [&](double v) -> std::uint64_t {
        if (!(v > 0.0))
            return 0;
        if (v >= 1.0)
            return options.bins - 1;
        return std::min<std::uint64_t>(options.bins - 1, static_cast<std::uint64_t>(v * options.bins));
    };

    for (std::size_t r = 0; r < draws; ++r) {
        const std::uint64_t seed = derive_seed(options.seed, tag("inner"), r);
        const Masks masks = draw_masks(dims, seed);
        const LearnerSeeds ls = draw_learner_seeds(dims, derive_seed(seed, tag("learners")));
        const LossTensor t = evaluate_losses(z, masks, learners, ls);
        for (std::size_t i = 0; i < dims.n_tilde; ++i) {
            const unsigned b = masks.observed(i);
            for (std::size_t j = 0; j < dims.n; ++j) {
                observe([&](unsigned k, unsigned l) { return bin(t.at(i, k, j, l)); }, b, masks.bit(i, 0, j),
                        masks.bit(i, 1, j), &obs[(r * cells + i * dims.n + j) * kFamilies]);
            }
        }
    }

    std::vector<std::uint32_t> weights(draws, 1);
    const McEvaluation point = evaluate_observations(obs, draws, cells, weights);

    // replicate[family] -> per replicate: per-cell values, mean, mean sqrt
    std::vector<std::vector<std::vector<double>>> rep_cells(kFamilies, std::vector<std::vector<double>>(cells));
    std::vector<std::vector<double>> rep_mean(kFamilies), rep_sqrt(kFamilies);
    SplitMix64 g(derive_seed(options.seed, tag("bootstrap")));
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
        std::fill(weights.begin(), weights.end(), 0);
        for (std::size_t r = 0; r < draws; ++r)
            ++weights[g.below(draws)];
        const McEvaluation ev = evaluate_observations(obs, draws, cells, weights);
        for (std::size_t f = 0; f < kFamilies; ++f) {
            double m = 0.0, s = 0.0;
            for (std::size_t cell = 0; cell < cells; ++cell) {
                const double v = stratum_mean(ev.strata[f][cell], false);
                rep_cells[f][cell].push_back(v);
                m += v;
                s += stratum_mean(ev.strata[f][cell], true);
            }
            rep_mean[f].push_back(m / static_cast<double>(cells));
            rep_sqrt[f].push_back(s / static_cast<double>(cells));
        }
    }

    auto corrected = [&](double estimate, const std::vector<double>& reps) {
        if (reps.empty())
            return estimate;
        return std::max(0.0, 2.0 * estimate - mean(reps));
    };

    EcmiTermSet out;
    TermGrid* grids[kFamilies] = {&out.environment, &out.task, &out.one_step};
    for (std::size_t f = 0; f < kFamilies; ++f) {
        TermGrid& grid = *grids[f];
        grid.dims = dims;
        grid.family = kFamilyOrder[f];
        grid.method = EstimatorMethod::monte_carlo;
        double m = 0.0, s = 0.0;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            CmiEstimate est;
            est.method = EstimatorMethod::monte_carlo;
            est.n_inner = draws;
            for (double v : point.strata[f][cell])
                est.conditional_values.push_back(std::isnan(v) ? 0.0 : v);
            const double raw = stratum_mean(point.strata[f][cell], false);
            est.value = corrected(raw, rep_cells[f][cell]);
            est.std_error = sd(rep_cells[f][cell]);
            m += raw;
            s += stratum_mean(point.strata[f][cell], true);
            grid.cells.push_back(std::move(est));
        }
        m /= static_cast<double>(cells);
        s /= static_cast<double>(cells);
        grid.mean_cmi = corrected(m, rep_mean[f]);
        grid.mean_cmi_se = sd(rep_mean[f]);
        grid.mean_sqrt2 = corrected(s, rep_sqrt[f]);
        grid.mean_sqrt2_se = sd(rep_sqrt[f]);
    }
    return out;
}

TermGrid ecmi_terms_mc(const MetaSupersample& z, const Learners& learners, EcmiFamily family,
                       const McOptions& options)
{
    return ecmi_terms_mc(z, learners, options).get(family);
}

ParametricCmis parametric_cmis_exact(const MaskEnumeration& e)
{
    const Dims dims = e.dims;
    const std::size_t nt = dims.n_tilde;
    const std::uint64_t meta_count = std::uint64_t{1} << nt;
    const std::uint64_t mask_count = e.configurations >> nt;
    const double configs = static_cast<double>(e.configurations);
    ParametricCmis out;

    // I(U; meta | S): strata are the in-task masks, each equally likely.
    {
        SmallJoint j;
        double total = 0.0;
        for (std::uint64_t s = 0; s < mask_count; ++s) {
            j.clear();
            for (std::uint64_t m = 0; m < meta_count; ++m) {
                const std::uint64_t c = (s << nt) | m;
                j.add(e.representation[c], m);
            }
            total += j.mi();
        }
        out.representation_given_masks = total / static_cast<double>(mask_count);
    }

    // I(W^{i,unobs}; S^{i,unobs} | meta_i), averaged over i.
    {
        double total = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            SmallJoint j[2];
            for (std::uint64_t c = 0; c < e.configurations; ++c) {
                const unsigned b = e.meta_bit(c, i);
                const std::size_t slot = dims.task_slot(i, 1 - b);
                j[b].add(e.hypotheses(c)[slot], in_task_bits(e, c, slot));
            }
            total += 0.5 * (j[0].mi() + j[1].mi());
        }
        out.unobserved_hypothesis = total / static_cast<double>(nt);
    }

    // I((U, W); meta, S) and I(U; meta, S): entropies, since outputs are functions of the masks.
    {
        std::map<std::vector<std::uint32_t>, double> wlaw;
        std::map<std::uint32_t, double> ulaw;
        for (std::uint64_t c = 0; c < e.configurations; ++c) {
            const std::uint32_t* w = e.hypotheses(c);
            std::vector<std::uint32_t> key(w, w + dims.task_count());
            key.push_back(e.representation[c]);
            wlaw[key] += 1.0;
            ulaw[e.representation[c]] += 1.0;
        }
        for (const auto& [k, n] : wlaw)
            out.all_hypotheses -= n / configs * std::log(n / configs);
        for (const auto& [k, n] : ulaw)
            out.representation -= n / configs * std::log(n / configs);
        out.all_hypotheses = std::max(0.0, out.all_hypotheses);
        out.representation = std::max(0.0, out.representation);
    }

    // Sum over i of I(W^i; S^i | U).
    {
        for (std::size_t i = 0; i < nt; ++i) {
            std::map<std::uint32_t, SmallJoint> by_u;
            std::map<std::uint32_t, double> pu;
            for (std::uint64_t c = 0; c < e.configurations; ++c) {
                const std::uint32_t u = e.representation[c];
                const std::uint32_t* w = e.hypotheses(c);
                const std::uint64_t x =
                    (static_cast<std::uint64_t>(w[dims.task_slot(i, 0)]) << 32) | w[dims.task_slot(i, 1)];
                const std::uint64_t y =
                    in_task_bits(e, c, dims.task_slot(i, 0)) | (in_task_bits(e, c, dims.task_slot(i, 1)) << dims.n);
                by_u[u].add(x, y);
                pu[u] += 1.0;
            }
            for (const auto& [u, j] : by_u)
                out.hypotheses_given_representation += pu[u] / configs * j.mi();
        }
    }
    return out;
}

double parametric_cmi_exact(const MetaSupersample& z, const Learners& learners, ParametricTerm term)
{
    const auto p = parametric_cmis_exact(enumerate_masks(z, learners));
    switch (term) {
    case ParametricTerm::representation_given_masks:
        return p.representation_given_masks;
    case ParametricTerm::unobserved_hypothesis:
        return p.unobserved_hypothesis;
    case ParametricTerm::all_hypotheses:
        return p.all_hypotheses;
    case ParametricTerm::chained:
        break;
    }
    return p.chained();
}

double loss_tensor_information(const MaskEnumeration& e)
{
    const std::size_t len = e.dims.sample_count();
    std::map<std::vector<std::uint8_t>, double> law;
    for (std::uint64_t c = 0; c < e.configurations; ++c) {
        const std::uint8_t* row = e.losses(c);
        law[std::vector<std::uint8_t>(row, row + len)] += 1.0;
    }
    const double n = static_cast<double>(e.configurations);
    double h = 0.0;
    for (const auto& [k, c] : law)
        h -= c / n * std::log(c / n);
    return std::max(h, 0.0);
}

HypothesisLaw hypothesis_law(const MaskEnumeration& e)
{
    HypothesisLaw law;
    law.pairs.resize(e.dims.n_tilde);
    const double p = 1.0 / static_cast<double>(e.configurations);
    for (std::uint64_t c = 0; c < e.configurations; ++c) {
        const std::uint32_t u = e.representation[c];
        law.representation[u] += p;
        const std::uint32_t* w = e.hypotheses(c);
        for (std::size_t i = 0; i < e.dims.n_tilde; ++i)
            law.pairs[i][{u, w[e.dims.task_slot(i, 0)], w[e.dims.task_slot(i, 1)]}] += p;
    }
    return law;
}

} // namespace metacmi
