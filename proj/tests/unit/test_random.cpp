#include <doctest.h>

#include <array>
#include <set>
#include <vector>

#include "metacmi/random.hpp"

using namespace metacmi;

TEST_CASE("tag is FNV-1a")
{
    CHECK(tag("") == 0xcbf29ce484222325ULL);
    CHECK(tag("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(tag("task") != tag("datum"));
}

TEST_CASE("splitmix64 reference outputs")
{
    // Published reference sequence for seed 1234567.
    SplitMix64 g(1234567);
    CHECK(g() == 6457827717110365317ULL);
    CHECK(g() == 3203168211198807973ULL);
    CHECK(g() == 9817491932198370423ULL);
}

TEST_CASE("derive_seed depends on every part and its order")
{
    const auto a = derive_seed(1, 2, 3);
    CHECK(a == derive_seed(1, 2, 3));
    CHECK(a != derive_seed(1, 3, 2));
    CHECK(a != derive_seed(2, 2, 3));
    CHECK(derive_seed(5) == mix64(5));
    CHECK(derive_seed(5, 9) == mix64(mix64(5) ^ 9));
}

TEST_CASE("uniform and below stay in range")
{
    SplitMix64 g(42);
    for (int k = 0; k < 10000; ++k) {
        const double u = g.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(g.below(7) < 7);
    }
}

TEST_CASE("sample_categorical")
{
    const std::array<double, 3> p{0.2, 0.0, 0.8};
    CHECK(sample_categorical(p, 0.0) == 0);
    CHECK(sample_categorical(p, 0.1999) == 0);
    CHECK(sample_categorical(p, 0.2) == 2);
    CHECK(sample_categorical(p, 0.9999999) == 2);
    const std::array<double, 1> one{1.0};
    CHECK(sample_categorical(one, 0.7) == 0);
}

TEST_CASE("categorical frequencies over uniform four outcomes")
{
    const std::array<double, 4> p{0.25, 0.25, 0.25, 0.25};
    std::array<int, 4> counts{};
    SplitMix64 g(99);
    const int draws = 100000;
    for (int k = 0; k < draws; ++k)
        ++counts[sample_categorical(p, g.uniform())];
    for (int c : counts)
        CHECK(static_cast<double>(c) / draws == doctest::Approx(0.25).epsilon(0.04));
}
