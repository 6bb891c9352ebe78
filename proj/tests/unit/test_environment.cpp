#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "metacmi/environment.hpp"
#include "metacmi/random.hpp"
#include "metacmi/supersample.hpp"

using namespace metacmi;

namespace {

using Maps = std::vector<std::vector<std::uint32_t>>;

// Shattering oracle written directly from the definition.
bool shatters_binary(const Maps& maps, const std::vector<std::size_t>& pts)
{
    std::set<std::vector<std::uint32_t>> seen;
    for (const auto& h : maps) {
        std::vector<std::uint32_t> r;
        for (auto p : pts)
            r.push_back(h[p]);
        seen.insert(r);
    }
    return seen.size() == (std::size_t{1} << pts.size());
}

std::size_t vc_oracle(const Maps& maps, std::size_t domain)
{
    std::size_t best = 0;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << domain); ++mask) {
        std::vector<std::size_t> pts;
        for (std::size_t x = 0; x < domain; ++x)
            if ((mask >> x) & 1U)
                pts.push_back(x);
        if (pts.size() > best && shatters_binary(maps, pts))
            best = pts.size();
    }
    return best;
}

Maps all_maps(std::size_t domain, std::uint32_t labels)
{
    Maps out{{}};
    for (std::size_t x = 0; x < domain; ++x) {
        Maps next;
        for (const auto& m : out)
            for (std::uint32_t v = 0; v < labels; ++v) {
                auto e = m;
                e.push_back(v);
                next.push_back(e);
            }
        out = next;
    }
    return out;
}

DiscreteEnvironment single_point_env(double noise)
{
    DiscreteEnvironment env;
    env.name = "point";
    env.input_distribution = {0.0, 1.0, 0.0, 0.0};
    env.representations = {4, 2, {{0, 0, 1, 1}, {1, 1, 0, 0}}, 1};
    env.task_functions = {2, {{0, 1}}, 0};
    env.truth = 0;
    env.tasks = {{0, noise}};
    env.task_distribution = {1.0};
    return env;
}

} // namespace

TEST_CASE("presets validate and carry certified dimensions")
{
    for (const auto& name : preset_names()) {
        for (double eta : {0.0, 0.1, 0.3}) {
            const auto env = preset_environment(name, eta);
            CHECK_NOTHROW(validate(env));
            const auto cert = certify_dimensions(env);
            CHECK(cert.natarajan_matches);
            CHECK(cert.vc_matches);
        }
    }
    CHECK_THROWS_AS(preset_environment("nope"), std::invalid_argument);
    CHECK(preset_environment("thresholds").representations.natarajan_dim == 1);
    CHECK(preset_environment("lookup").representations.natarajan_dim == 2);
    CHECK(preset_environment("lookup").task_functions.vc_dim == 2);
    CHECK(preset_environment("lookup").representations.maps[0] == std::vector<std::uint32_t>{0, 0, 1, 1});
    CHECK(preset_environment("lookup").tasks.size() == 4);
}

TEST_CASE("vc dimension of thresholds on five points is one")
{
    Maps maps;
    for (std::uint32_t t = 0; t <= 5; ++t) {
        std::vector<std::uint32_t> h(5);
        for (std::uint32_t x = 0; x < 5; ++x)
            h[x] = x >= t;
        maps.push_back(h);
    }
    CHECK(vc_dimension(maps, 5) == 1);
    CHECK(vc_oracle(maps, 5) == 1);
}

TEST_CASE("natarajan dimension of all maps on three points with three labels is three")
{
    CHECK(natarajan_dimension(all_maps(3, 3), 3, 3) == 3);
}

TEST_CASE("natarajan and vc dimensions coincide for binary classes")
{
    SplitMix64 g(5);
    for (int trial = 0; trial < 40; ++trial) {
        Maps maps;
        const std::size_t count = 1 + g.below(10);
        for (std::size_t k = 0; k < count; ++k) {
            std::vector<std::uint32_t> h(5);
            for (auto& v : h)
                v = static_cast<std::uint32_t>(g.below(2));
            maps.push_back(h);
        }
        const auto vc = vc_dimension(maps, 5);
        CHECK(vc == vc_oracle(maps, 5));
        CHECK(natarajan_dimension(maps, 5, 2) == vc);
    }
}

TEST_CASE("dimension search refuses large domains")
{
    Maps maps{std::vector<std::uint32_t>(kDimensionGuard + 1, 0)};
    CHECK_THROWS_AS(vc_dimension(maps, kDimensionGuard + 1), std::invalid_argument);
    CHECK_THROWS_AS(natarajan_dimension(maps, kDimensionGuard + 1, 2), std::invalid_argument);
}

TEST_CASE("growth function of the full class is 2^m")
{
    const auto full = all_maps(4, 2);
    for (std::size_t m = 0; m <= 4; ++m)
        CHECK(growth_function(full, 4, m) == (std::size_t{1} << m));
}

TEST_CASE("population loss by hand summation")
{
    DiscreteEnvironment env;
    env.input_distribution = {0.25, 0.25, 0.25, 0.25};
    env.representations = {4, 2, {{0, 0, 1, 1}, {1, 0, 1, 1}, {1, 1, 0, 0}}, 0};
    env.task_functions = {2, {{0, 1}}, 0};
    env.truth = 0;
    env.tasks = {{0, 0.1}, {0, 0.0}};
    env.task_distribution = {0.5, 0.5};
    env.representations.natarajan_dim = natarajan_dimension(env.representations.maps, 4, 2);
    env.task_functions.vc_dim = vc_dimension(env.task_functions.maps, 2);
    CHECK(population_loss(env, 1, 0, 0) == 0.0);
    CHECK(population_loss(env, 1, 2, 0) == 1.0);
    CHECK(population_loss(env, 0, 1, 0) == doctest::Approx(0.25 * 0.9 + 0.75 * 0.1).epsilon(1e-14));
}

TEST_CASE("datum sampling frequencies")
{
    SUBCASE("noise flips labels at the stated rate")
    {
        const auto env = single_point_env(0.3);
        const auto z = sample_supersample(env, Dims{1, 25000}, 17);
        int flips = 0;
        for (const auto& d : z.data) {
            CHECK(d.x == 1);
            flips += d.y != clean_label(env, 0, 1);
        }
        CHECK(static_cast<double>(flips) / z.data.size() == doctest::Approx(0.3).epsilon(0.033));
    }
    SUBCASE("noiseless point mass gives one datum")
    {
        const auto env = single_point_env(0.0);
        const auto z = sample_supersample(env, Dims{2, 2}, 3);
        for (const auto& d : z.data)
            CHECK(d == Datum{1, 0});
        for (auto t : z.tasks)
            CHECK(t == 0);
    }
    SUBCASE("uniform inputs")
    {
        const auto env = preset_environment("lookup", 0.1);
        const auto z = sample_supersample(env, Dims{5, 5000}, 23);
        std::vector<double> freq(4, 0.0);
        for (const auto& d : z.data)
            freq[d.x] += 1.0 / z.data.size();
        for (double f : freq)
            CHECK(f == doctest::Approx(0.25).epsilon(0.04));
    }
}

TEST_CASE("environment JSON round trip and strictness")
{
    const auto env = preset_environment("lookup", 0.1);
    const auto j = to_json(env);
    const auto back = environment_from_json(j);
    CHECK(back.representations.maps == env.representations.maps);
    CHECK(back.task_functions.maps == env.task_functions.maps);
    CHECK(back.truth == env.truth);
    CHECK(back.tasks.size() == env.tasks.size());
    CHECK(to_json(back) == j);

    auto extra = j;
    extra["colour"] = "blue";
    CHECK_THROWS_AS(environment_from_json(extra), std::invalid_argument);

    auto wrong_dim = j;
    wrong_dim["representations"]["natarajan_dim"] = 3;
    CHECK_THROWS_AS(environment_from_json(wrong_dim), std::invalid_argument);

    const auto path = (std::filesystem::temp_directory_path() / "metacmi_env_roundtrip.json").string();
    save_environment(env, path);
    CHECK(to_json(load_environment(path)) == j);
    std::filesystem::remove(path);
}

TEST_CASE("random environments are valid and reproducible")
{
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto a = random_environment(s);
        CHECK_NOTHROW(validate(a));
        CHECK(a.representations.size() <= 6);
        CHECK(a.task_functions.size() <= 4);
        CHECK(a.domain_size() == 4);
        CHECK(to_json(a) == to_json(random_environment(s)));
        const auto cert = certify_dimensions(a);
        CHECK(cert.natarajan_matches);
        CHECK(cert.vc_matches);
    }
}

TEST_CASE("validation rejects inconsistent environments")
{
    auto env = preset_environment("thresholds");
    env.tasks[0].noise = 0.5;
    CHECK_THROWS_AS(validate(env), std::invalid_argument);
    env = preset_environment("thresholds");
    env.input_distribution[0] += 0.1;
    CHECK_THROWS_AS(validate(env), std::invalid_argument);
    env = preset_environment("thresholds");
    env.truth = 99;
    CHECK_THROWS_AS(validate(env), std::invalid_argument);
}
