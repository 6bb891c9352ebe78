#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace metacmi {

// Functions X -> {0..N-1}, stored as maps[h][x].
struct FiniteRepresentationClass {
    std::size_t domain_size = 0;
    std::size_t range_size = 0;
    std::vector<std::vector<std::uint32_t>> maps;
    std::size_t natarajan_dim = 0;

    std::size_t size() const { return maps.size(); }
};

// Functions {0..N-1} -> {0,1}, stored as maps[f][c].
struct FiniteTaskClass {
    std::size_t domain_size = 0;
    std::vector<std::vector<std::uint32_t>> maps;
    std::size_t vc_dim = 0;

    std::size_t size() const { return maps.size(); }
};

struct Task {
    std::size_t function = 0;
    double noise = 0.0;
};

/*
 * A finite meta-learning environment. Labels of task t at input x are
 * f_t(h*(x)), flipped independently with probability noise_t.
 */
struct DiscreteEnvironment {
    std::string name;
    std::vector<double> input_distribution;
    FiniteRepresentationClass representations;
    FiniteTaskClass task_functions;
    std::size_t truth = 0;
    std::vector<Task> tasks;
    std::vector<double> task_distribution;

    std::size_t domain_size() const { return input_distribution.size(); }
    std::size_t range_size() const { return representations.range_size; }
};

inline constexpr std::size_t kDimensionGuard = 20;

// Throws std::invalid_argument describing the first inconsistency found.
void validate(const DiscreteEnvironment& env);

std::uint32_t clean_label(const DiscreteEnvironment& env, std::size_t task, std::uint32_t x);

double population_loss(const DiscreteEnvironment& env, std::size_t task, std::size_t representation,
                       std::size_t task_function);

// Brute-force dimensions. Classes are given as maps[h][x] over a domain of
// domain_size points with labels in {0..range_size-1}.
std::size_t natarajan_dimension(const std::vector<std::vector<std::uint32_t>>& maps,
                                std::size_t domain_size, std::size_t range_size);
std::size_t vc_dimension(const std::vector<std::vector<std::uint32_t>>& maps, std::size_t domain_size);

// Largest number of distinct restrictions to a sample of m points.
std::size_t growth_function(const std::vector<std::vector<std::uint32_t>>& maps, std::size_t domain_size,
                            std::size_t m);

struct DimensionCertificate {
    std::size_t natarajan_dim = 0;
    std::size_t vc_dim = 0;
    bool natarajan_matches = false;
    bool vc_matches = false;
};

DimensionCertificate certify_dimensions(const DiscreteEnvironment& env);

// Named environments: "thresholds" and "lookup".
DiscreteEnvironment preset_environment(const std::string& name, double noise = 0.0);
std::vector<std::string> preset_names();

struct RandomEnvironmentOptions {
    std::size_t domain_size = 4;
    std::size_t range_size = 2;
    std::size_t min_representations = 2;
    std::size_t max_representations = 6;
    std::size_t max_task_functions = 4;
    std::size_t max_tasks = 3;
    std::vector<double> noise_levels{0.0, 0.1, 0.3};
};

DiscreteEnvironment random_environment(std::uint64_t seed, const RandomEnvironmentOptions& options = {});

nlohmann::json to_json(const DiscreteEnvironment& env);
DiscreteEnvironment environment_from_json(const nlohmann::json& j);
DiscreteEnvironment load_environment(const std::string& path);
void save_environment(const DiscreteEnvironment& env, const std::string& path);

} // namespace metacmi
