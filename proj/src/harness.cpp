#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "metacmi/harness.hpp"
#include "metacmi/random.hpp"

namespace metacmi {

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body)
{
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, count));
    if (workers == 1) {
        for (std::size_t k = 0; k < count; ++k) {
            try {
                body(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < count; k = next++) {
                    try {
                        body(k);
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

Measured mean_with_error(const std::vector<double>& xs)
{
    Measured m;
    if (xs.empty())
        return m;
    const double n = static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs)
        s += x;
    m.value = s / n;
    if (xs.size() < 2) {
        m.std_error = 0.0;
        return m;
    }
    double ss = 0.0;
    for (double x : xs)
        ss += (x - m.value) * (x - m.value);
    m.std_error = std::sqrt(ss / (n - 1.0) / n);
    return m;
}

Coverage count_coverage(const std::vector<double>& gaps, const std::vector<double>& bounds)
{
    if (gaps.size() != bounds.size())
        throw std::invalid_argument("coverage needs one bound per draw");
    Coverage c;
    for (std::size_t d = 0; d < gaps.size(); ++d) {
        if (std::isnan(bounds[d]))
            continue;
        ++c.draws;
        if (std::abs(gaps[d]) > bounds[d])
            ++c.violations;
    }
    if (c.draws == 0)
        return c;
    const double n = static_cast<double>(c.draws);
    const double p = static_cast<double>(c.violations) / n;
    const double z = 1.959963984540054;
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    c.rate = p;
    c.ci_low = std::max(0.0, centre - half);
    c.ci_high = std::min(1.0, centre + half);
    return c;
}

double realized_excess_risk(const DiscreteEnvironment& env, const MetaSupersample& z, const Masks& masks,
                            std::size_t representation, const std::vector<std::size_t>& task_functions)
{
    const Dims d = z.dims;
    const std::size_t best = oracle_representation(env).representation;
    double total = 0.0;
    for (std::size_t i = 0; i < d.n_tilde; ++i) {
        const std::size_t k = 1 - masks.observed(i);
        const std::size_t t = z.task(i, k);
        total += population_loss(env, t, representation, task_functions[d.task_slot(i, k)]) -
                 oracle_task_loss(env, t, best);
    }
    return total / static_cast<double>(d.n_tilde);
}

namespace {

bool use_exact(const ExperimentConfig& cfg, const Learners& learners, Dims dims)
{
    switch (cfg.estimator.mode) {
    case EstimatorMode::exact:
        if (!learners.deterministic)
            throw std::invalid_argument("exact estimation requires deterministic learners");
        if (dims.mask_bits() > kMaxEnumerationBits)
            throw std::invalid_argument("mask enumeration guard exceeded (" + std::to_string(dims.mask_bits()) +
                                        " bits) and Monte Carlo fallback is disabled");
        return true;
    case EstimatorMode::monte_carlo:
        return false;
    case EstimatorMode::automatic:
        break;
    }
    return learners.deterministic && dims.mask_bits() <= cfg.estimator.exact_max_bits;
}

LossSummary summary_at(const MaskEnumeration& e, std::uint64_t config)
{
    LossTensor t;
    t.dims = e.dims;
    const std::uint8_t* row = e.losses(config);
    t.values.resize(e.dims.sample_count());
    for (std::size_t s = 0; s < t.values.size(); ++s)
        t.values[s] = e.symbols[row[s]];
    return summarize(t, masks_from_index(e.dims, config));
}

struct DrawOutput {
    DrawRecord record;
    bool has_terms = false;
    EcmiTermSet terms;
    HypothesisLaw law;
};

DrawOutput run_draw(const ExperimentConfig& cfg, const Learners& learners, const Learners& oracle, Dims dims,
                    bool exact, std::size_t draw)
{
    const auto& env = cfg.environment;
    DrawOutput out;
    DrawRecord& r = out.record;
    const std::uint64_t master = cfg.master_seed;
    r.supersample_seed = derive_seed(master, tag("supersample"), dims.n_tilde, dims.n, draw);
    const MetaSupersample z = sample_supersample(env, dims, r.supersample_seed);
    const Masks masks = draw_masks(dims, derive_seed(master, tag("realized-masks"), dims.n_tilde, dims.n, draw));
    const LearnerSeeds seeds =
        draw_learner_seeds(dims, derive_seed(master, tag("learner-seeds"), dims.n_tilde, dims.n, draw));
    if (exact) {
        r.realized_config = mask_index(masks);
        const MaskEnumeration e = enumerate_masks(z, learners, seeds);
        LossSummary acc;
        for (std::uint64_t c = 0; c < e.configurations; ++c) {
            const LossSummary s = summary_at(e, c);
            acc.train += s.train;
            acc.aux_test += s.aux_test;
            acc.aux_unobserved_train += s.aux_unobserved_train;
            acc.meta_population += s.meta_population;
        }
        const double count = static_cast<double>(e.configurations);
        acc.train /= count;
        acc.aux_test /= count;
        acc.aux_unobserved_train /= count;
        acc.meta_population /= count;
        r.expected = acc;
        r.realized = summary_at(e, r.realized_config);
        const std::uint32_t* fs = e.hypotheses(r.realized_config);
        std::vector<std::size_t> functions(fs, fs + dims.task_count());
        r.excess_risk = realized_excess_risk(env, z, masks, e.representation[r.realized_config], functions);
        if (cfg.estimator.information_terms) {
            out.terms = ecmi_terms_exact(e);
            out.has_terms = true;
            r.has_parametric = true;
            r.parametric = parametric_cmis_exact(e);
            out.law = hypothesis_law(e);
            r.tensor_information = loss_tensor_information(e);
            r.has_pointwise = true;
            r.kls = pointwise_kls(e, r.realized_config);
        }
    } else {
        const LossTensor t = evaluate_losses(z, masks, learners, seeds);
        r.realized = summarize(t, masks);
        r.expected = r.realized;
        r.excess_risk = realized_excess_risk(env, z, masks, t.representation, t.task_functions);
        if (cfg.estimator.information_terms) {
            McOptions opts;
            opts.n_inner = cfg.estimator.n_inner;
            opts.bins = cfg.estimator.bins;
            opts.bootstrap = cfg.estimator.bootstrap;
            opts.seed = derive_seed(master, tag("mc"), dims.n_tilde, dims.n, draw);
            out.terms = ecmi_terms_mc(z, learners, opts);
            out.has_terms = true;
        }
    }
    if (out.has_terms) {
        r.env_cmi = out.terms.environment.mean_cmi;
        r.task_cmi = out.terms.task.mean_cmi;
        r.one_step_cmi = out.terms.one_step.mean_cmi;
        r.env_sqrt2 = out.terms.environment.mean_sqrt2;
        r.task_sqrt2 = out.terms.task.mean_sqrt2;
        r.one_step_sqrt2 = out.terms.one_step.mean_sqrt2;
    }
    const LossTensor o = evaluate_losses(z, masks, oracle, seeds);
    r.oracle_excess_risk = realized_excess_risk(env, z, masks, o.representation, o.task_functions);
    return out;
}

template <typename F>
double guarded(F&& f)
{
    try {
        return f();
    } catch (const std::invalid_argument&) {
        return kNotComputed;
    }
}

std::vector<double> collect(const std::vector<DrawRecord>& draws, double (*get)(const DrawRecord&))
{
    std::vector<double> v;
    v.reserve(draws.size());
    for (const auto& d : draws)
        v.push_back(get(d));
    return v;
}

} // namespace

BoundReport run_experiment(const ExperimentConfig& cfg, Dims dims, std::size_t jobs)
{
    validate(cfg);
    validate(dims);
    const Learners learners = make_learners(cfg);
    const Learners oracle = make_oracle_learners(std::make_shared<const DiscreteEnvironment>(cfg.environment));
    const bool exact = use_exact(cfg, learners, dims);
    const std::size_t count = cfg.estimator.n_outer;

    std::vector<DrawOutput> outputs(count);
    parallel_for(count, jobs, [&](std::size_t d) { outputs[d] = run_draw(cfg, learners, oracle, dims, exact, d); });

    BoundReport rep;
    rep.dims = dims;
    rep.method = exact ? EstimatorMethod::exact : EstimatorMethod::monte_carlo;
    rep.n_outer = count;
    rep.master_seed = cfg.master_seed;
    for (auto& o : outputs)
        rep.draws.push_back(o.record);
    const auto& draws = rep.draws;

    rep.train = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.expected.train; }));
    rep.meta_population =
        mean_with_error(collect(draws, [](const DrawRecord& d) { return d.expected.meta_population; }));
    rep.gap = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.expected.gap(); }));
    rep.three_loss = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.expected.three_loss_sum(); }));
    rep.realized_train = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.realized.train; }));
    rep.realized_gap = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.realized.gap(); }));
    for (const auto& d : draws)
        rep.max_realized_train = std::max(rep.max_realized_train, d.realized.train);

    rep.has_terms = !outputs.empty() && outputs.front().has_terms;
    if (rep.has_terms) {
        std::vector<TermGrid> env_grids, task_grids, one_grids;
        for (const auto& o : outputs) {
            env_grids.push_back(o.terms.environment);
            task_grids.push_back(o.terms.task);
            one_grids.push_back(o.terms.one_step);
        }
        rep.env_cmi = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.env_cmi; }));
        rep.task_cmi = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.task_cmi; }));
        rep.one_step_cmi = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.one_step_cmi; }));
        rep.thm1 = thm1_two_step(env_grids, task_grids);
        rep.thm2 = thm2_one_step(one_grids);
        rep.thm3_two_step = thm3_two_step(rep.train.value, rep.env_cmi.value, rep.task_cmi.value);
        rep.thm3_one_step = thm3_one_step(rep.train.value, rep.one_step_cmi.value);
        bool interpolating = rep.max_realized_train <= 1e-12 && std::abs(rep.train.value) <= 1e-12;
        if (interpolating)
            rep.cor3 = cor3_interpolating(0.0, rep.one_step_cmi.value);
    }

    rep.has_parametric = !draws.empty() && draws.front().has_parametric;
    if (rep.has_parametric) {
        rep.representation_given_masks = mean_with_error(
            collect(draws, [](const DrawRecord& d) { return d.parametric.representation_given_masks; }));
        rep.unobserved_hypothesis =
            mean_with_error(collect(draws, [](const DrawRecord& d) { return d.parametric.unobserved_hypothesis; }));
        rep.all_hypotheses =
            mean_with_error(collect(draws, [](const DrawRecord& d) { return d.parametric.all_hypotheses; }));
        rep.chained = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.parametric.chained(); }));
        std::vector<HypothesisLaw> laws;
        for (const auto& o : outputs)
            laws.push_back(o.law);
        rep.relaxed = mixture_entropies(laws);
        rep.cor1 = cor1(rep.representation_given_masks.value, rep.unobserved_hypothesis.value, dims);
        rep.cor2 = cor2(rep.all_hypotheses.value, rep.chained.value, rep.relaxed, dims);
    }

    const auto& env = cfg.environment;
    const std::size_t d_n = env.representations.natarajan_dim;
    const std::size_t d_vc = env.task_functions.vc_dim;
    const std::size_t labels = env.range_size();
    const double delta = cfg.deltas.front();
    try {
        rep.cor4 = cor4_minimax(dims, d_n, d_vc, labels);
        rep.cor5 = cor5_interpolating_minimax(dims, d_n, d_vc, labels);
    } catch (const std::invalid_argument&) {
    }
    try {
        rep.cor6 = cor6_high_prob_minimax(dims, d_n, d_vc, labels, delta, cfg.constants.cor6);
    } catch (const std::invalid_argument&) {
    }
    rep.diversity = measure_task_diversity(env);
    rep.cor7 = guarded(
        [&] { return cor7_excess_specific(dims.n, dims, d_n, d_vc, labels, delta, rep.diversity, cfg.constants.cor7); });
    rep.cor8 = guarded([&] { return cor8_excess_random(dims, d_n, d_vc, labels, delta, cfg.constants.cor8); });

    rep.excess_risk = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.excess_risk; }));
    rep.oracle_excess_risk = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.oracle_excess_risk; }));
    rep.min_excess_risk = std::numeric_limits<double>::infinity();
    for (const auto& d : draws)
        rep.min_excess_risk = std::min(rep.min_excess_risk, d.excess_risk);

    rep.has_pointwise = !draws.empty() && draws.front().has_pointwise;
    if (rep.has_pointwise) {
        rep.pointwise_kl = mean_with_error(collect(draws, [](const DrawRecord& d) { return d.kls.full; }));
        rep.tensor_information =
            mean_with_error(collect(draws, [](const DrawRecord& d) { return d.tensor_information; }));
        rep.kl_minus_information =
            mean_with_error(collect(draws, [](const DrawRecord& d) { return d.kls.full - d.tensor_information; }));
        const auto gaps = collect(draws, [](const DrawRecord& d) { return d.realized.gap(); });
        const auto& k = cfg.constants;
        for (double dl : cfg.deltas) {
            HighProbabilityResult h;
            h.delta = dl;
            std::vector<double> b4, b5, b6, br;
            for (const auto& d : draws) {
                b4.push_back(guarded([&] {
                    return thm4_two_step(d.kls.environment_max(), d.kls.task_max(), dims, dl, k.thm4_c1, k.thm4_c2);
                }));
                b5.push_back(guarded([&] { return thm5_one_step(d.kls.full, dims, dl); }));
                b6.push_back(guarded([&] { return thm6_two_step(d.kls.environment, d.kls.task, dims, dl); }));
                br.push_back(guarded([&] {
                    return remark1_two_step(d.kls.training_positions, d.kls.task_max(), dims, dl, k.thm4_c1,
                                            k.thm4_c2);
                }));
            }
            auto finite_mean = [](const std::vector<double>& v) {
                std::vector<double> keep;
                for (double x : v)
                    if (!std::isnan(x))
                        keep.push_back(x);
                return mean_with_error(keep);
            };
            h.thm4 = finite_mean(b4);
            h.thm5 = finite_mean(b5);
            h.thm6 = finite_mean(b6);
            h.remark1 = finite_mean(br);
            h.thm4_coverage = count_coverage(gaps, b4);
            h.thm5_coverage = count_coverage(gaps, b5);
            h.thm6_coverage = count_coverage(gaps, b6);
            h.remark1_coverage = count_coverage(gaps, br);
            rep.high_probability.push_back(h);
        }
    }
    return rep;
}

namespace {

using nlohmann::json;

json number(double v)
{
    if (std::isnan(v))
        return nullptr;
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

json entry(double value, double std_error, json inputs = json::object())
{
    return {{"value", number(value)}, {"std_error", number(std_error)}, {"inputs", std::move(inputs)}};
}

json entry(const Measured& m, json inputs = json::object()) { return entry(m.value, m.std_error, std::move(inputs)); }

json coverage_json(const Coverage& c)
{
    return {{"draws", c.draws},
            {"violations", c.violations},
            {"rate", number(c.rate)},
            {"ci_low", number(c.ci_low)},
            {"ci_high", number(c.ci_high)}};
}

} // namespace

json to_json(const BoundReport& r)
{
    json j;
    j["n_tilde"] = r.dims.n_tilde;
    j["n"] = r.dims.n;
    j["estimator"] = r.method == EstimatorMethod::exact ? "exact" : "mc";
    j["n_outer"] = r.n_outer;
    j["master_seed"] = r.master_seed;

    json m;
    m["train"] = entry(r.train);
    m["meta_population"] = entry(r.meta_population);
    m["gap"] = entry(r.gap);
    m["three_loss_sum"] = entry(r.three_loss);
    m["realized_train"] = entry(r.realized_train);
    m["realized_gap"] = entry(r.realized_gap);
    m["max_realized_train"] = number(r.max_realized_train);
    m["environment_cmi"] = entry(r.env_cmi);
    m["task_cmi"] = entry(r.task_cmi);
    m["one_step_cmi"] = entry(r.one_step_cmi);
    m["excess_risk"] = entry(r.excess_risk);
    m["oracle_excess_risk"] = entry(r.oracle_excess_risk);
    m["min_excess_risk"] = number(r.min_excess_risk);
    if (r.has_parametric) {
        m["representation_given_masks"] = entry(r.representation_given_masks);
        m["unobserved_hypothesis"] = entry(r.unobserved_hypothesis);
        m["all_hypotheses"] = entry(r.all_hypotheses);
        m["chained"] = entry(r.chained);
        m["representation_entropy"] = number(r.relaxed.representation);
        m["hypotheses_given_representation_entropy"] = number(r.relaxed.hypotheses_given_representation);
    }
    if (r.has_pointwise) {
        m["pointwise_kl"] = entry(r.pointwise_kl);
        m["loss_tensor_information"] = entry(r.tensor_information);
        m["kl_minus_information"] = entry(r.kl_minus_information);
    }
    j["measured"] = m;

    json b;
    const json term_inputs = {{"environment_cmi", number(r.env_cmi.value)},
                              {"task_cmi", number(r.task_cmi.value)},
                              {"one_step_cmi", number(r.one_step_cmi.value)},
                              {"train", number(r.train.value)}};
    if (r.has_terms) {
        b["thm1_two_step"] = entry(r.thm1.value, r.thm1.std_error, term_inputs);
        b["thm2_one_step"] = entry(r.thm2.value, r.thm2.std_error, term_inputs);
        b["thm3_two_step"] = entry(r.thm3_two_step, kNotComputed, term_inputs);
        b["thm3_one_step"] = entry(r.thm3_one_step, kNotComputed, term_inputs);
        b["thm3_one_step_relaxed"] = entry(r.thm3_one_step, kNotComputed, term_inputs);
        b["cor3_exponential"] = entry(r.cor3.exponential, kNotComputed, term_inputs);
        b["cor3_linear"] = entry(r.cor3.linear, kNotComputed, term_inputs);
    }
    if (r.has_parametric) {
        b["cor1"] = entry(r.cor1, kNotComputed,
                          {{"representation_given_masks", number(r.representation_given_masks.value)},
                           {"unobserved_hypothesis", number(r.unobserved_hypothesis.value)}});
        const json chain_inputs = {{"all_hypotheses", number(r.all_hypotheses.value)},
                                   {"chained", number(r.chained.value)},
                                   {"representation_entropy", number(r.relaxed.representation)},
                                   {"hypotheses_given_representation_entropy",
                                    number(r.relaxed.hypotheses_given_representation)}};
        b["cor2_eq7_left"] = entry(r.cor2.all_hypotheses, kNotComputed, chain_inputs);
        b["cor2_eq7_right"] = entry(r.cor2.chained, kNotComputed, chain_inputs);
        b["cor2_eq8"] = entry(r.cor2.mutual_information, kNotComputed, chain_inputs);
    }
    b["cor4_eq16"] = entry(r.cor4.two_step, kNotComputed);
    b["cor4_eq17"] = entry(r.cor4.one_step, kNotComputed);
    b["cor5_eq18"] = entry(r.cor5, kNotComputed);
    b["cor6_two_step"] = entry(r.cor6.two_step, kNotComputed);
    b["cor6_one_step"] = entry(r.cor6.one_step, kNotComputed);
    b["cor6_two_step_display"] = entry(r.cor6.two_step_display, kNotComputed);
    b["cor6_one_step_display"] = entry(r.cor6.one_step_display, kNotComputed);
    const json diversity = {{"nu", number(r.diversity.nu)},
                            {"epsilon", number(r.diversity.epsilon)},
                            {"best_representation", r.diversity.best_representation}};
    b["cor7"] = entry(r.cor7, kNotComputed, diversity);
    b["cor8"] = entry(r.cor8, kNotComputed);
    j["bounds"] = b;

    json hp = json::array();
    for (const auto& h : r.high_probability) {
        hp.push_back({{"delta", h.delta},
                      {"thm4_two_step", entry(h.thm4)},
                      {"thm5_one_step", entry(h.thm5)},
                      {"thm6_two_step", entry(h.thm6)},
                      {"remark1_two_step", entry(h.remark1)},
                      {"thm4_coverage", coverage_json(h.thm4_coverage)},
                      {"thm5_coverage", coverage_json(h.thm5_coverage)},
                      {"thm6_coverage", coverage_json(h.thm6_coverage)},
                      {"remark1_coverage", coverage_json(h.remark1_coverage)}});
    }
    j["high_probability"] = hp;
    return j;
}

SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("slope fit needs matching x and y");
    SlopeFit f;
    f.points = x.size();
    if (x.size() < 2)
        throw std::invalid_argument("slope fit needs at least two points");
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0) || !std::isfinite(x[k]) || !std::isfinite(y[k]))
            return f;
        lx.push_back(std::log(x[k]));
        ly.push_back(std::log(y[k]));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
    }
    if (sxx <= 0.0)
        throw std::invalid_argument("slope fit needs at least two distinct x values");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        const double e = ly[k] - (f.intercept + f.slope * lx[k]);
        rss += e * e;
    }
    f.residual = std::sqrt(rss / n);
    return f;
}

namespace {

struct Family {
    const char* name;
    double (*get)(const BoundReport&);
};

const Family kSlopeFamilies[] = {
    {"gap", [](const BoundReport& r) { return std::abs(r.gap.value); }},
    {"thm1", [](const BoundReport& r) { return r.has_terms ? r.thm1.value : kNotComputed; }},
    {"thm2", [](const BoundReport& r) { return r.has_terms ? r.thm2.value : kNotComputed; }},
    {"thm3_two_step", [](const BoundReport& r) { return r.thm3_two_step; }},
    {"thm3_one_step", [](const BoundReport& r) { return r.thm3_one_step; }},
    {"cor1", [](const BoundReport& r) { return r.cor1; }},
    {"cor2_eq7_left", [](const BoundReport& r) { return r.cor2.all_hypotheses; }},
    {"cor2_eq8", [](const BoundReport& r) { return r.cor2.mutual_information; }},
    {"cor3_exp", [](const BoundReport& r) { return r.cor3.exponential; }},
    {"cor4_eq16", [](const BoundReport& r) { return r.cor4.two_step; }},
    {"cor4_eq17", [](const BoundReport& r) { return r.cor4.one_step; }},
    {"cor5_eq18", [](const BoundReport& r) { return r.cor5; }},
    {"cor6_two_step", [](const BoundReport& r) { return r.cor6.two_step; }},
    {"cor6_one_step", [](const BoundReport& r) { return r.cor6.one_step; }},
    {"cor6_two_step_display", [](const BoundReport& r) { return r.cor6.two_step_display; }},
    {"cor6_one_step_display", [](const BoundReport& r) { return r.cor6.one_step_display; }},
    {"thm4_mean",
     [](const BoundReport& r) { return r.high_probability.empty() ? kNotComputed : r.high_probability[0].thm4.value; }},
    {"thm5_mean",
     [](const BoundReport& r) { return r.high_probability.empty() ? kNotComputed : r.high_probability[0].thm5.value; }},
    {"cor8", [](const BoundReport& r) { return r.cor8; }},
};

std::vector<std::size_t> distinct_sorted(std::vector<std::size_t> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, std::size_t jobs)
{
    validate(cfg);
    const auto ns = distinct_sorted(cfg.n_values);
    const auto nts = distinct_sorted(cfg.n_tilde_values);
    auto swept_ok = [](std::size_t count) { return count == 1 || count >= 4; };
    if ((ns.size() < 2 && nts.size() < 2) || !swept_ok(ns.size()) || !swept_ok(nts.size()))
        throw std::invalid_argument("degenerate grid: a swept axis needs at least 4 distinct values");

    SweepResult result;
    for (std::size_t nt : nts)
        for (std::size_t n : ns) {
            SweepRow row;
            row.n_tilde = nt;
            row.n = n;
            row.report = run_experiment(cfg, Dims{nt, n}, jobs);
            row.report.draws.clear();
            result.rows.push_back(std::move(row));
        }

    auto fit_axis = [&](bool along_n) {
        const auto& fixed_values = along_n ? nts : ns;
        const auto& swept = along_n ? ns : nts;
        if (swept.size() < 2)
            return;
        for (std::size_t fixed : fixed_values)
            for (const auto& fam : kSlopeFamilies) {
                std::vector<double> x, y;
                for (const auto& row : result.rows) {
                    if ((along_n ? row.n_tilde : row.n) != fixed)
                        continue;
                    x.push_back(static_cast<double>(along_n ? row.n : row.n_tilde));
                    y.push_back(fam.get(row.report));
                }
                SlopeFit f = fit_log_log(x, y);
                f.family = fam.name;
                f.axis = along_n ? "n" : "n_tilde";
                f.fixed = fixed;
                result.slopes.push_back(f);
            }
    };
    fit_axis(true);
    fit_axis(false);
    return result;
}

namespace {

bool known(double v) { return !std::isnan(v); }

CheckResult check(std::string name, bool ok, const std::string& detail)
{
    return {std::move(name), ok, detail};
}

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

} // namespace

std::vector<CheckResult> verify(const ExperimentConfig& cfg, const VerifyOptions& options, std::size_t jobs)
{
    validate(cfg);
    std::vector<CheckResult> out;
    const LemmaReport lemmas = verify_proof_lemmas(options.lemma_trials, derive_seed(cfg.master_seed, tag("lemmas")));
    out.push_back(check("information lemmas", lemmas.violations() == 0,
                        std::to_string(lemmas.violations()) + " violations in " + std::to_string(lemmas.trials) +
                            " trials"));
    const double k = options.se_slack;
    for (std::size_t nt : distinct_sorted(cfg.n_tilde_values))
        for (std::size_t n : distinct_sorted(cfg.n_values)) {
            const Dims dims{nt, n};
            const BoundReport r = run_experiment(cfg, dims, jobs);
            const std::string at = " [n_tilde=" + std::to_string(nt) + ", n=" + std::to_string(n) + "]";
            const double gap = std::abs(r.gap.value);
            if (r.has_terms) {
                const double s1 = k * std::hypot(r.gap.std_error, r.thm1.std_error);
                out.push_back(check("gap within two-step bound" + at, gap <= r.thm1.value + s1,
                                    "|gap| " + fmt(gap) + " vs " + fmt(r.thm1.value)));
                const double s2 = k * std::hypot(r.gap.std_error, r.thm2.std_error);
                out.push_back(check("gap within one-step bound" + at, gap <= r.thm2.value + s2,
                                    "|gap| " + fmt(gap) + " vs " + fmt(r.thm2.value)));
                out.push_back(check("meta-population loss within two-step binary-KL bound" + at,
                                    r.meta_population.value <= r.thm3_two_step + k * r.meta_population.std_error,
                                    fmt(r.meta_population.value) + " vs " + fmt(r.thm3_two_step)));
                out.push_back(check("three-loss sum within one-step binary-KL bound" + at,
                                    r.three_loss.value <= r.thm3_one_step + k * r.three_loss.std_error,
                                    fmt(r.three_loss.value) + " vs " + fmt(r.thm3_one_step)));
                if (known(r.cor3.exponential))
                    out.push_back(check("meta-population loss within interpolating bound" + at,
                                        r.meta_population.value <= r.cor3.exponential + k * r.meta_population.std_error,
                                        fmt(r.meta_population.value) + " vs " + fmt(r.cor3.exponential)));
            }
            if (r.has_parametric) {
                const double tol = options.tolerance;
                out.push_back(check("two-step bound below its parametric relaxation" + at, r.thm1.value <= r.cor1 + tol + k * r.thm1.std_error,
                                    fmt(r.thm1.value) + " vs " + fmt(r.cor1)));
                out.push_back(check("one-step bound below the hypothesis CMI bound" + at,
                                    r.thm2.value <= r.cor2.all_hypotheses + tol + k * r.thm2.std_error,
                                    fmt(r.thm2.value) + " vs " + fmt(r.cor2.all_hypotheses)));
                out.push_back(check("hypothesis CMI bound below its chained form" + at,
                                    r.cor2.all_hypotheses <= r.cor2.chained + tol,
                                    fmt(r.cor2.all_hypotheses) + " vs " + fmt(r.cor2.chained)));
                out.push_back(check("chained form below the mutual-information form" + at,
                                    r.cor2.chained <= r.cor2.mutual_information + tol,
                                    fmt(r.cor2.chained) + " vs " + fmt(r.cor2.mutual_information)));
            }
            for (const auto& h : r.high_probability) {
                const std::string d = " delta=" + fmt(h.delta);
                auto cover = [&](const std::string& name, const Coverage& c) {
                    if (c.draws < 100) {
                        out.push_back(check(name + " coverage" + d + at, true,
                                            "skipped: " + std::to_string(c.draws) + " draws (need 100)"));
                        return;
                    }
                    const double slack = 3.0 * std::sqrt(h.delta * (1.0 - h.delta) / static_cast<double>(c.draws));
                    out.push_back(check(name + " coverage" + d + at, c.rate <= h.delta + slack,
                                        "rate " + fmt(c.rate) + " over " + std::to_string(c.draws) + " draws"));
                };
                cover("one-step high-probability", h.thm5_coverage);
                cover("two-step high-probability", h.thm4_coverage);
            }
            out.push_back(check("excess risk nonnegative" + at, r.min_excess_risk >= -1e-12,
                                "minimum " + fmt(r.min_excess_risk)));
            if (known(r.cor8))
                out.push_back(check("excess risk within random-task bound" + at,
                                    r.excess_risk.value <= r.cor8 + k * r.excess_risk.std_error,
                                    fmt(r.excess_risk.value) + " vs " + fmt(r.cor8)));
            out.push_back(check("oracle excess risk is zero" + at,
                                r.oracle_excess_risk.value == 0.0 && r.oracle_excess_risk.std_error == 0.0,
                                fmt(r.oracle_excess_risk.value)));
        }
    return out;
}

} // namespace metacmi
