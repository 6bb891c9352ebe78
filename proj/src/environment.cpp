#include "metacmi/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "metacmi/random.hpp"

namespace metacmi {

namespace {

void check_distribution(const std::vector<double>& p, const std::string& what)
{
    if (p.empty())
        throw std::invalid_argument(what + " is empty");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(what + " has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument(what + " does not sum to 1");
}

// Iterates all subsets of {0..n-1} with exactly k elements as bitmasks.
template <typename F>
bool for_each_subset(std::size_t n, std::size_t k, F&& visit)
{
    if (k == 0)
        return visit(std::uint64_t{0});
    if (k > n)
        return false;
    std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << n;
    while (mask < limit) {
        if (visit(mask))
            return true;
        std::uint64_t c = mask & (~mask + 1);
        std::uint64_t r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    return false;
}

std::vector<std::size_t> members(std::uint64_t mask)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; mask != 0; ++i, mask >>= 1)
        if (mask & 1U)
            out.push_back(i);
    return out;
}

unsigned label_bits(std::size_t range_size)
{
    unsigned bits = 1;
    while ((std::size_t{1} << bits) < range_size)
        ++bits;
    return bits;
}

std::vector<std::uint64_t> restrictions(const std::vector<std::vector<std::uint32_t>>& maps,
                                        const std::vector<std::size_t>& points, unsigned bits)
{
    std::vector<std::uint64_t> out;
    out.reserve(maps.size());
    for (const auto& h : maps) {
        std::uint64_t code = 0;
        for (std::size_t t = 0; t < points.size(); ++t)
            code |= static_cast<std::uint64_t>(h[points[t]]) << (bits * t);
        out.push_back(code);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool natarajan_shattered(const std::vector<std::uint64_t>& codes, std::size_t d, unsigned bits)
{
    const std::uint64_t label_mask = (std::uint64_t{1} << bits) - 1;
    std::unordered_set<std::uint64_t> present(codes.begin(), codes.end());
    const std::uint64_t patterns = std::uint64_t{1} << d;
    if (codes.size() < patterns)
        return false;
    for (std::size_t a = 0; a < codes.size(); ++a) {
        for (std::size_t b = a + 1; b < codes.size(); ++b) {
            bool disjoint = true;
            for (std::size_t t = 0; t < d && disjoint; ++t)
                disjoint = ((codes[a] >> (bits * t)) & label_mask) != ((codes[b] >> (bits * t)) & label_mask);
            if (!disjoint)
                continue;
            bool all = true;
            for (std::uint64_t p = 0; p < patterns && all; ++p) {
                std::uint64_t code = 0;
                for (std::size_t t = 0; t < d; ++t) {
                    const std::uint64_t src = ((p >> t) & 1U) ? codes[a] : codes[b];
                    code |= src & (label_mask << (bits * t));
                }
                all = present.count(code) != 0;
            }
            if (all)
                return true;
        }
    }
    return false;
}

} // namespace

void validate(const DiscreteEnvironment& env)
{
    check_distribution(env.input_distribution, "input distribution");
    const auto& H = env.representations;
    if (H.domain_size != env.input_distribution.size())
        throw std::invalid_argument("representation domain size does not match the input distribution");
    if (H.range_size == 0)
        throw std::invalid_argument("representation range size is zero");
    if (H.maps.empty())
        throw std::invalid_argument("representation class is empty");
    for (const auto& h : H.maps) {
        if (h.size() != H.domain_size)
            throw std::invalid_argument("representation map has the wrong length");
        for (auto v : h)
            if (v >= H.range_size)
                throw std::invalid_argument("representation map value out of range");
    }
    const auto& F = env.task_functions;
    if (F.domain_size != H.range_size)
        throw std::invalid_argument("task function domain does not match the representation range");
    if (F.maps.empty())
        throw std::invalid_argument("task function class is empty");
    for (const auto& f : F.maps) {
        if (f.size() != F.domain_size)
            throw std::invalid_argument("task function has the wrong length");
        for (auto v : f)
            if (v > 1)
                throw std::invalid_argument("task function label is not binary");
    }
    if (env.truth >= H.maps.size())
        throw std::invalid_argument("truth representation index out of range");
    if (env.tasks.empty())
        throw std::invalid_argument("task list is empty");
    for (const auto& t : env.tasks) {
        if (t.function >= F.maps.size())
            throw std::invalid_argument("task function index out of range");
        if (!(t.noise >= 0.0 && t.noise < 0.5))
            throw std::invalid_argument("task noise must lie in [0, 0.5)");
    }
    if (env.task_distribution.size() != env.tasks.size())
        throw std::invalid_argument("task distribution length does not match the task list");
    check_distribution(env.task_distribution, "task distribution");
}

std::uint32_t clean_label(const DiscreteEnvironment& env, std::size_t task, std::uint32_t x)
{
    const auto& t = env.tasks.at(task);
    return env.task_functions.maps[t.function][env.representations.maps[env.truth][x]];
}

double population_loss(const DiscreteEnvironment& env, std::size_t task, std::size_t representation,
                       std::size_t task_function)
{
    const auto& t = env.tasks.at(task);
    const auto& h = env.representations.maps.at(representation);
    const auto& f = env.task_functions.maps.at(task_function);
    double loss = 0.0;
    for (std::size_t x = 0; x < env.input_distribution.size(); ++x) {
        const bool agree = f[h[x]] == clean_label(env, task, static_cast<std::uint32_t>(x));
        loss += env.input_distribution[x] * (agree ? t.noise : 1.0 - t.noise);
    }
    return loss;
}

std::size_t natarajan_dimension(const std::vector<std::vector<std::uint32_t>>& maps, std::size_t domain_size,
                                std::size_t range_size)
{
    if (domain_size > kDimensionGuard)
        throw std::invalid_argument("domain too large for brute-force dimension search");
    if (maps.empty())
        return 0;
    const unsigned bits = label_bits(range_size);
    std::size_t best = 0;
    for (std::size_t d = 1; d <= domain_size; ++d) {
        if (bits * d > 64)
            throw std::invalid_argument("label alphabet too large for brute-force dimension search");
        const bool found = for_each_subset(domain_size, d, [&](std::uint64_t mask) {
            return natarajan_shattered(restrictions(maps, members(mask), bits), d, bits);
        });
        if (!found)
            break;
        best = d;
    }
    return best;
}

std::size_t vc_dimension(const std::vector<std::vector<std::uint32_t>>& maps, std::size_t domain_size)
{
    return natarajan_dimension(maps, domain_size, 2);
}

std::size_t growth_function(const std::vector<std::vector<std::uint32_t>>& maps, std::size_t domain_size,
                            std::size_t m)
{
    if (domain_size > kDimensionGuard)
        throw std::invalid_argument("domain too large for brute-force growth function");
    if (maps.empty())
        return 0;
    std::uint32_t range = 0;
    for (const auto& h : maps)
        for (auto v : h)
            range = std::max(range, v + 1);
    const unsigned bits = label_bits(range);
    const std::size_t k = std::min(m, domain_size);
    std::size_t best = 0;
    for_each_subset(domain_size, k, [&](std::uint64_t mask) {
        best = std::max(best, restrictions(maps, members(mask), bits).size());
        return false;
    });
    return best;
}

DimensionCertificate certify_dimensions(const DiscreteEnvironment& env)
{
    DimensionCertificate c;
    c.natarajan_dim = natarajan_dimension(env.representations.maps, env.representations.domain_size,
                                          env.representations.range_size);
    c.vc_dim = vc_dimension(env.task_functions.maps, env.task_functions.domain_size);
    c.natarajan_matches = c.natarajan_dim == env.representations.natarajan_dim;
    c.vc_matches = c.vc_dim == env.task_functions.vc_dim;
    return c;
}

std::vector<std::string> preset_names() { return {"thresholds", "lookup"}; }

DiscreteEnvironment preset_environment(const std::string& name, double noise)
{
    DiscreteEnvironment env;
    env.name = name;
    if (name == "thresholds") {
        constexpr std::size_t size = 8;
        env.input_distribution.assign(size, 1.0 / size);
        env.representations.domain_size = size;
        env.representations.range_size = 2;
        for (std::uint32_t t = 0; t <= size; ++t) {
            std::vector<std::uint32_t> h(size);
            for (std::uint32_t x = 0; x < size; ++x)
                h[x] = x >= t ? 1U : 0U;
            env.representations.maps.push_back(h);
        }
        env.representations.natarajan_dim = 1;
        env.task_functions.domain_size = 2;
        env.task_functions.maps = {{0, 1}, {1, 0}};
        env.task_functions.vc_dim = 1;
        env.truth = 4;
        env.tasks = {{0, noise}, {1, noise}};
        env.task_distribution = {0.5, 0.5};
    } else if (name == "lookup") {
        constexpr std::size_t size = 4;
        env.input_distribution.assign(size, 1.0 / size);
        env.representations.domain_size = size;
        env.representations.range_size = 2;
        for (unsigned code = 0; code < 16; ++code) {
            if (std::popcount(code) != 2)
                continue;
            std::vector<std::uint32_t> h(size);
            for (std::size_t x = 0; x < size; ++x)
                h[x] = (code >> (size - 1 - x)) & 1U;
            env.representations.maps.push_back(h);
        }
        env.representations.natarajan_dim = 2;
        env.task_functions.domain_size = 2;
        env.task_functions.maps = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        env.task_functions.vc_dim = 2;
        env.truth = 0;
        const double high = std::min(noise + 0.2, 0.45);
        env.tasks = {{1, noise}, {2, noise}, {1, high}, {2, high}};
        env.task_distribution = {0.25, 0.25, 0.25, 0.25};
    } else {
        throw std::invalid_argument("unknown preset environment: " + name);
    }
    validate(env);
    return env;
}

DiscreteEnvironment random_environment(std::uint64_t seed, const RandomEnvironmentOptions& options)
{
    if (options.range_size < 2 || options.domain_size == 0)
        throw std::invalid_argument("random environment needs a domain and at least two cells");
    if (options.noise_levels.empty())
        throw std::invalid_argument("random environment needs at least one noise level");
    SplitMix64 g(derive_seed(seed, tag("random-environment")));
    DiscreteEnvironment env;
    env.name = "random";

    std::vector<double> px(options.domain_size);
    double total = 0.0;
    for (auto& v : px) {
        v = 0.2 + g.uniform();
        total += v;
    }
    for (auto& v : px)
        v /= total;
    env.input_distribution = px;

    auto& H = env.representations;
    H.domain_size = options.domain_size;
    H.range_size = options.range_size;
    const std::size_t span_h = options.max_representations - options.min_representations + 1;
    const std::size_t want_h = options.min_representations + g.below(span_h);
    std::set<std::vector<std::uint32_t>> seen;
    while (H.maps.size() < want_h) {
        std::vector<std::uint32_t> h(options.domain_size);
        for (auto& v : h)
            v = static_cast<std::uint32_t>(g.below(options.range_size));
        if (seen.insert(h).second)
            H.maps.push_back(h);
    }

    auto& F = env.task_functions;
    F.domain_size = options.range_size;
    const std::size_t all_f = options.range_size >= 6 ? 64 : (std::size_t{1} << options.range_size);
    const std::size_t max_f = std::min(options.max_task_functions, all_f);
    const std::size_t want_f = max_f <= 1 ? 1 : 1 + g.below(max_f);
    std::set<std::vector<std::uint32_t>> seen_f;
    while (F.maps.size() < want_f) {
        std::vector<std::uint32_t> f(options.range_size);
        for (auto& v : f)
            v = static_cast<std::uint32_t>(g.below(2));
        if (seen_f.insert(f).second)
            F.maps.push_back(f);
    }

    env.truth = g.below(H.maps.size());
    const std::size_t task_count = 1 + g.below(options.max_tasks);
    double task_total = 0.0;
    for (std::size_t t = 0; t < task_count; ++t) {
        Task task;
        task.function = g.below(F.maps.size());
        task.noise = options.noise_levels[g.below(options.noise_levels.size())];
        env.tasks.push_back(task);
        const double w = 0.2 + g.uniform();
        env.task_distribution.push_back(w);
        task_total += w;
    }
    for (auto& w : env.task_distribution)
        w /= task_total;

    H.natarajan_dim = natarajan_dimension(H.maps, H.domain_size, H.range_size);
    F.vc_dim = vc_dimension(F.maps, F.domain_size);
    validate(env);
    return env;
}

nlohmann::json to_json(const DiscreteEnvironment& env)
{
    nlohmann::json j;
    j["name"] = env.name;
    j["input_distribution"] = env.input_distribution;
    j["representations"] = {{"range_size", env.representations.range_size},
                            {"maps", env.representations.maps},
                            {"natarajan_dim", env.representations.natarajan_dim}};
    j["task_functions"] = {{"maps", env.task_functions.maps}, {"vc_dim", env.task_functions.vc_dim}};
    j["truth"] = env.truth;
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : env.tasks)
        tasks.push_back({{"function", t.function}, {"noise", t.noise}});
    j["tasks"] = tasks;
    j["task_distribution"] = env.task_distribution;
    return j;
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object())
        throw std::invalid_argument(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            ok = ok || it.key() == a;
        if (!ok)
            throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
    }
}

} // namespace

DiscreteEnvironment environment_from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"name", "input_distribution", "representations", "task_functions", "truth", "tasks",
                       "task_distribution"},
                   "environment");
    DiscreteEnvironment env;
    try {
        env.name = j.value("name", std::string("custom"));
        env.input_distribution = j.at("input_distribution").get<std::vector<double>>();
        const auto& r = j.at("representations");
        reject_unknown(r, {"range_size", "maps", "natarajan_dim"}, "representations");
        env.representations.domain_size = env.input_distribution.size();
        env.representations.range_size = r.at("range_size").get<std::size_t>();
        env.representations.maps = r.at("maps").get<std::vector<std::vector<std::uint32_t>>>();
        env.representations.natarajan_dim = r.at("natarajan_dim").get<std::size_t>();
        const auto& f = j.at("task_functions");
        reject_unknown(f, {"maps", "vc_dim"}, "task_functions");
        env.task_functions.domain_size = env.representations.range_size;
        env.task_functions.maps = f.at("maps").get<std::vector<std::vector<std::uint32_t>>>();
        env.task_functions.vc_dim = f.at("vc_dim").get<std::size_t>();
        env.truth = j.at("truth").get<std::size_t>();
        for (const auto& t : j.at("tasks")) {
            reject_unknown(t, {"function", "noise"}, "task");
            env.tasks.push_back({t.at("function").get<std::size_t>(), t.at("noise").get<double>()});
        }
        env.task_distribution = j.at("task_distribution").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed environment: ") + e.what());
    }
    validate(env);
    if (env.domain_size() <= kDimensionGuard && env.task_functions.domain_size <= kDimensionGuard) {
        const auto cert = certify_dimensions(env);
        if (!cert.natarajan_matches)
            throw std::invalid_argument("declared natarajan_dim " + std::to_string(env.representations.natarajan_dim) +
                                        " differs from brute force " + std::to_string(cert.natarajan_dim));
        if (!cert.vc_matches)
            throw std::invalid_argument("declared vc_dim " + std::to_string(env.task_functions.vc_dim) +
                                        " differs from brute force " + std::to_string(cert.vc_dim));
    }
    return env;
}

DiscreteEnvironment load_environment(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open environment file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("cannot parse environment file " + path + ": " + e.what());
    }
    return environment_from_json(j);
}

void save_environment(const DiscreteEnvironment& env, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << to_json(env).dump(2) << '\n';
}

} // namespace metacmi
