#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evgp/io.hpp"

namespace evgp {

/// Options shared by the command-line subcommands. Every field is optional so a file
/// only pins what it mentions and flags can fill or override the rest.
struct RunConfig {
    std::optional<std::string> system;
    std::optional<std::uint64_t> seed;

    struct Sampling {
        std::optional<std::string> preset;  // table1
        std::optional<int> trajectories;
        std::optional<int> steps_per_traj;
        std::optional<double> dt;
        std::optional<double> eta;
        std::optional<std::vector<double>> alpha;
        std::optional<int> substeps;
        std::optional<double> obs_noise_std;
        bool operator==(const Sampling&) const = default;
    } sampling;

    struct Model {
        std::optional<std::string> prior;  // none | if | ifg
        std::optional<int> m;
        bool operator==(const Model&) const = default;
    } model;

    /// Trainer keys as in TrainConfig, kept as JSON so absent keys stay absent.
    Json trainer = Json::object();

    struct Bench {
        std::optional<std::string> preset;  // desk | full
        std::optional<std::vector<std::string>> systems;
        std::optional<std::vector<std::string>> priors;
        std::optional<std::vector<int>> train_sizes;
        std::optional<int> repeats;
        std::optional<int> test_trajectories;
        bool operator==(const Bench&) const = default;
    } bench;

    struct Paths {
        std::optional<std::string> data;
        std::optional<std::string> test_data;
        std::optional<std::string> model;
        std::optional<std::string> out;
        std::optional<std::string> report;
        std::optional<std::string> resume;  // model file to continue training from
        bool operator==(const Paths&) const = default;
    } paths;

    bool operator==(const RunConfig&) const = default;

    /// Values set in `other` replace the ones here.
    void merge(const RunConfig& other);
};

/// Unknown keys and wrong types raise ConfigError with the offending key path.
RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace evgp
