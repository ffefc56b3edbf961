#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evgp/bench.hpp"
#include "evgp/dataset.hpp"
#include "evgp/dynamics.hpp"
#include "evgp/features.hpp"
#include "evgp/metrics.hpp"
#include "evgp/model.hpp"
#include "evgp/trainer.hpp"
#include "json.hpp"

namespace evgp {

using Json = nlohmann::json;

Json to_json(const Matrix& m);
Json to_json(const Vector& v);
/// Expects an array of equal-length rows; throws ConfigError naming `what` otherwise.
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, newline-terminated.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Header row of column names; columns named "y" or "y_*" are targets, the rest inputs.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);
/// foo.csv → foo.json
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

Json to_json(const SystemSpec& spec);
Json to_json(const SamplingSpec& sampling);
/// Provenance record written next to a simulated dataset CSV.
Json dataset_sidecar(const SystemSpec& spec, const SamplingSpec& sampling, std::uint64_t seed,
                     const Vector& obs_noise_std, const Dataset& data);

inline constexpr int kModelFormatVersion = 1;

/// Everything needed to predict with and audit a trained model.
struct ModelFile {
    FeatureMap map;
    BetaPrior prior;
    std::vector<VariationalState> states;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    std::string schema_hash;
    std::string system;      // empty when not a simulated system
    std::string prior_kind;  // none | if | ifg | custom
    Json train_config = Json::object();

    /// Throws DimensionMismatch / ConfigError when the dataset columns differ from the training schema.
    void check_dataset(const Dataset& data) const;
};

/// Bundles trained states with the dataset schema they were fitted on.
ModelFile make_model_file(const Dataset& data, const FeatureMap& map, const BetaPrior& prior,
                          std::vector<VariationalState> states);

Json to_json(const ModelFile& model);
ModelFile model_from_json(const Json& j);
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

/// Learned b per (feature, output) with posterior std from diag(B).
struct CoefficientTable {
    std::vector<std::string> features;
    std::vector<std::string> outputs;
    Matrix mean;  // features × outputs
    Matrix std;
    Matrix prior_mean;
};
CoefficientTable coefficient_table(const ModelFile& model);
/// feature,output,b,std,prior_mean; one row per entry.
std::string coefficient_csv(const CoefficientTable& table);
/// Aligned "b (± std)" grid with features as rows.
std::string format_coefficients(const CoefficientTable& table);
Json to_json(const CoefficientTable& table);

Json to_json(const TrainConfig& config);
/// Applies the keys present in j on top of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
Json to_json(const TrainReport& report);
Json to_json(const EvalReport& report);
Json to_json(const BenchResult& result);

}  // namespace evgp
