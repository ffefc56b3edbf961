#include "evgp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <variant>

#include "evgp/errors.hpp"

namespace evgp {

namespace fs = std::filesystem;

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(what + ": expected numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(i)], what);
        if (row.size() != cols) throw ConfigError(what + ": ragged rows");
        m.row(i) = row.transpose();
    }
    return m;
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

bool is_target_column(const std::string& name) { return name == "y" || name.rfind("y_", 0) == 0; }

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_dataset_csv(const fs::path& path, const Dataset& data) {
    data.validate();
    std::string text;
    std::vector<std::string> names = data.input_names;
    names.insert(names.end(), data.target_names.begin(), data.target_names.end());
    for (std::size_t i = 0; i < names.size(); ++i) text += (i ? "," : "") + names[i];
    text += '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.input_dim() + data.output_dim(); ++c) {
            const double v = c < data.input_dim() ? data.x(r, c) : data.y(r, c - data.input_dim());
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            if (c) text += ',';
            text.append(buf, res.ptr);
        }
        text += '\n';
    }
    write_text(path, text);
}

Dataset read_dataset_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    const auto names = split(line);
    std::vector<int> input_cols, target_cols;
    Dataset d;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) throw ConfigError(path.string() + ": empty column name");
        if (is_target_column(names[i])) {
            target_cols.push_back(static_cast<int>(i));
            d.target_names.push_back(names[i]);
        } else {
            input_cols.push_back(static_cast<int>(i));
            d.input_names.push_back(names[i]);
        }
    }
    if (input_cols.empty() || target_cols.empty())
        throw ConfigError(path.string() + ": need at least one input column and one y_ target column");

    std::vector<std::vector<double>> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != names.size())
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(names.size()) + " fields, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& s = cells[c];
            const auto res = std::from_chars(s.data(), s.data() + s.size(), row[c]);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
        }
        rows.push_back(std::move(row));
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.x.resize(n, static_cast<Eigen::Index>(input_cols.size()));
    d.y.resize(n, static_cast<Eigen::Index>(target_cols.size()));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < input_cols.size(); ++c) d.x(r, static_cast<Eigen::Index>(c)) = row[input_cols[c]];
        for (std::size_t c = 0; c < target_cols.size(); ++c) d.y(r, static_cast<Eigen::Index>(c)) = row[target_cols[c]];
    }
    d.validate();
    return d;
}

fs::path sidecar_path(const fs::path& csv) {
    fs::path p = csv;
    return p.replace_extension(".json");
}

Json to_json(const SystemSpec& spec) {
    Json params = std::visit(
        [](const auto& p) -> Json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, PendulumParams>)
                return {{"mass", p.mass}, {"length", p.length}, {"damping", p.damping}, {"gravity", p.gravity}};
            else if constexpr (std::is_same_v<P, CartpoleParams>)
                return {{"cart_mass", p.cart_mass}, {"pole_mass", p.pole_mass}, {"pole_length", p.pole_length},
                        {"gravity", p.gravity}};
            else
                return {{"m1", p.m1},   {"m2", p.m2},   {"l1", p.l1}, {"l2", p.l2}, {"lc1", p.lc1},
                        {"lc2", p.lc2}, {"ic1", p.ic1}, {"ic2", p.ic2}, {"b1", p.b1}, {"b2", p.b2},
                        {"gravity", p.gravity}};
        },
        spec.params);
    return {{"system", to_string(spec.id)}, {"params", params}};
}

Json to_json(const SamplingSpec& s) {
    return {{"alpha", to_json(s.alpha)}, {"eta", s.eta},           {"trajectories", s.trajectories},
            {"steps_per_traj", s.steps_per_traj}, {"dt", s.dt}, {"substeps", s.substeps}};
}

Json dataset_sidecar(const SystemSpec& spec, const SamplingSpec& sampling, std::uint64_t seed,
                     const Vector& obs_noise_std, const Dataset& data) {
    std::vector<std::string> columns = data.input_names;
    columns.insert(columns.end(), data.target_names.begin(), data.target_names.end());
    return {{"format", "evgp-dataset"},
            {"system", to_string(spec.id)},
            {"params", to_json(spec)["params"]},
            {"sampling", to_json(sampling)},
            {"seed", seed},
            {"obs_noise_std", to_json(obs_noise_std)},
            {"rows", data.rows()},
            {"columns", columns},
            {"schema_hash", data.schema_hash()}};
}

void ModelFile::check_dataset(const Dataset& data) const {
    if (data.input_dim() != map.input_dim || data.output_dim() != static_cast<Eigen::Index>(states.size()))
        throw DimensionMismatch("dataset has " + std::to_string(data.input_dim()) + " inputs and " +
                                std::to_string(data.output_dim()) + " targets; model expects " +
                                std::to_string(map.input_dim) + " and " + std::to_string(states.size()));
    if (!schema_hash.empty() && data.schema_hash() != schema_hash)
        throw ConfigError("dataset columns do not match the model's training schema (hash " + data.schema_hash() +
                          " vs " + schema_hash + ")");
}

namespace {

Json state_to_json(const VariationalState& s) {
    return {{"a", to_json(s.a)},
            {"a_cov_raw", to_json(s.a_cov.raw)},
            {"b", to_json(s.b)},
            {"b_cov_raw", to_json(s.b_cov.raw)},
            {"inducing", to_json(s.inducing)},
            {"log_lengthscales", to_json(s.kernel.log_lengthscales)},
            {"log_signal_variance", s.kernel.log_signal_variance},
            {"log_noise_variance", s.log_noise_variance}};
}

const Json& field(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

Matrix square_or_empty(const Json& j, Eigen::Index n, const std::string& what) {
    if (n == 0) return Matrix(0, 0);
    Matrix m = matrix_from_json(j, what);
    if (m.rows() != n || m.cols() != n) throw DimensionMismatch(what + " must be " + std::to_string(n) + "x" + std::to_string(n));
    return m;
}

VariationalState state_from_json(const Json& j, const FeatureMap& map, const std::string& where) {
    VariationalState s;
    s.a = vector_from_json(field(j, "a", where), where + ".a");
    s.b = vector_from_json(field(j, "b", where), where + ".b");
    s.a_cov.raw = square_or_empty(field(j, "a_cov_raw", where), s.a.size(), where + ".a_cov_raw");
    s.b_cov.raw = square_or_empty(field(j, "b_cov_raw", where), s.b.size(), where + ".b_cov_raw");
    s.inducing = matrix_from_json(field(j, "inducing", where), where + ".inducing");
    if (s.inducing.rows() == 0) s.inducing.resize(0, map.input_dim);
    s.kernel.log_lengthscales = vector_from_json(field(j, "log_lengthscales", where), where + ".log_lengthscales");
    s.kernel.log_signal_variance = field(j, "log_signal_variance", where).get<double>();
    s.log_noise_variance = field(j, "log_noise_variance", where).get<double>();
    s.validate();
    if (s.input_dim() != map.input_dim || s.num_features() != map.feature_dim)
        throw DimensionMismatch(where + " does not match the feature map");
    return s;
}

std::vector<std::string> names_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) out.push_back(e.get<std::string>());
    return out;
}

}  // namespace

Json to_json(const ModelFile& m) {
    Json prior_cov = Json::array();
    for (const auto& c : m.prior.cov) prior_cov.push_back(to_json(c.matrix()));
    Json states = Json::array();
    for (const auto& s : m.states) states.push_back(state_to_json(s));
    return {{"format", "evgp-model"},
            {"version", kModelFormatVersion},
            {"system", m.system},
            {"prior_kind", m.prior_kind},
            {"feature_map", {{"id", to_string(m.map.id)}, {"input_dim", m.map.input_dim}, {"output_dim", m.map.output_dim}}},
            {"input_names", m.input_names},
            {"target_names", m.target_names},
            {"schema_hash", m.schema_hash},
            {"beta_prior", {{"mean", to_json(m.prior.mean)}, {"cov", prior_cov}}},
            {"outputs", states},
            {"train_config", m.train_config}};
}

ModelFile model_from_json(const Json& j) {
    const std::string where = "model";
    if (!j.is_object() || j.value("format", "") != "evgp-model") throw ConfigError("not an evgp model file");
    const int version = field(j, "version", where).get<int>();
    if (version != kModelFormatVersion)
        throw ConfigError("unsupported model file version " + std::to_string(version) + " (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    ModelFile m;
    try {
        m.system = j.value("system", "");
        m.prior_kind = j.value("prior_kind", "");
        const Json& fm = field(j, "feature_map", where);
        const auto id = feature_id_from_string(field(fm, "id", "feature_map").get<std::string>());
        m.map = id == FeatureId::ZeroFeatures
                    ? FeatureMap::zero(field(fm, "input_dim", "feature_map").get<int>(),
                                       field(fm, "output_dim", "feature_map").get<int>())
                    : FeatureMap::make(id);
        m.input_names = names_from_json(field(j, "input_names", where), "input_names");
        m.target_names = names_from_json(field(j, "target_names", where), "target_names");
        m.schema_hash = j.value("schema_hash", "");
        const Json& bp = field(j, "beta_prior", where);
        m.prior.mean = matrix_from_json(field(bp, "mean", "beta_prior"), "beta_prior.mean");
        if (m.prior.mean.size() == 0) m.prior.mean.resize(m.map.output_dim, m.map.feature_dim);
        const Json& covs = field(bp, "cov", "beta_prior");
        for (std::size_t o = 0; o < covs.size(); ++o) {
            const Matrix c = square_or_empty(covs[o], m.map.feature_dim, "beta_prior.cov");
            m.prior.cov.push_back(m.map.feature_dim > 0 ? cholesky_psd(c) : PsdMatrix(Matrix(0, 0), 0.0));
        }
        const Json& outs = field(j, "outputs", where);
        for (std::size_t o = 0; o < outs.size(); ++o)
            m.states.push_back(state_from_json(outs[o], m.map, "outputs[" + std::to_string(o) + "]"));
        m.train_config = j.value("train_config", Json::object());
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed model file: ") + e.what());
    }
    const auto o = static_cast<Eigen::Index>(m.states.size());
    if (o != m.map.output_dim || m.prior.mean.rows() != o || static_cast<Eigen::Index>(m.prior.cov.size()) != o ||
        static_cast<Eigen::Index>(m.target_names.size()) != o ||
        static_cast<Eigen::Index>(m.input_names.size()) != m.map.input_dim)
        throw DimensionMismatch("model file sections disagree on the number of outputs or inputs");
    return m;
}

ModelFile make_model_file(const Dataset& data, const FeatureMap& map, const BetaPrior& prior,
                          std::vector<VariationalState> states) {
    ModelFile m;
    m.map = map;
    m.prior = prior;
    m.states = std::move(states);
    m.input_names = data.input_names;
    m.target_names = data.target_names;
    m.schema_hash = data.schema_hash();
    return m;
}

void save_model(const fs::path& path, const ModelFile& model) { write_json(path, to_json(model)); }

ModelFile load_model(const fs::path& path) { return model_from_json(read_json(path)); }

CoefficientTable coefficient_table(const ModelFile& model) {
    CoefficientTable t;
    t.features = feature_names(model.map);
    t.outputs = model.target_names;
    const auto p = static_cast<Eigen::Index>(t.features.size());
    const auto o = static_cast<Eigen::Index>(model.states.size());
    t.mean.resize(p, o);
    t.std.resize(p, o);
    t.prior_mean = model.prior.mean.transpose();
    for (Eigen::Index k = 0; k < o; ++k) {
        const auto& s = model.states[static_cast<std::size_t>(k)];
        t.mean.col(k) = s.b;
        if (p > 0) t.std.col(k) = s.b_cov.matrix().diagonal().cwiseSqrt();
    }
    return t;
}

std::string coefficient_csv(const CoefficientTable& t) {
    std::ostringstream out;
    out.precision(17);
    out << "feature,output,b,std,prior_mean\n";
    for (std::size_t i = 0; i < t.features.size(); ++i)
        for (std::size_t k = 0; k < t.outputs.size(); ++k) {
            const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(k);
            out << t.features[i] << ',' << t.outputs[k] << ',' << t.mean(r, c) << ',' << t.std(r, c) << ','
                << t.prior_mean(r, c) << '\n';
        }
    return out.str();
}

std::string format_coefficients(const CoefficientTable& t) {
    if (t.features.empty()) return "model has no explicit features\n";
    constexpr int width = 22;
    std::string text(8, ' ');
    char buf[64];
    for (const auto& o : t.outputs) {
        std::snprintf(buf, sizeof buf, "%*s", width, o.c_str());
        text += buf;
    }
    text += '\n';
    for (std::size_t i = 0; i < t.features.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-8s", t.features[i].c_str());
        text += buf;
        for (std::size_t k = 0; k < t.outputs.size(); ++k) {
            const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(k);
            const int len = std::snprintf(buf, sizeof buf, "%+.4f (%.4f)", t.mean(r, c), t.std(r, c));
            text += std::string(static_cast<std::size_t>(std::max(0, width - len)), ' ') + buf;
        }
        text += '\n';
    }
    return text;
}

Json to_json(const CoefficientTable& t) {
    return {{"features", t.features}, {"outputs", t.outputs}, {"b", to_json(t.mean)}, {"std", to_json(t.std)},
            {"prior_mean", to_json(t.prior_mean)}};
}

Json to_json(const TrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"seed", c.seed},
            {"num_inducing", c.num_inducing},
            {"hyperparameter_freeze_steps", c.hyperparameter_freeze_steps},
            {"learn_inducing", c.learn_inducing},
            {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
    if (!j.is_object()) throw ConfigError("trainer settings must be an object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "steps") c.steps = value.get<int>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
            else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
            else if (key == "adam_eps") c.adam_eps = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "num_inducing") c.num_inducing = value.get<int>();
            else if (key == "hyperparameter_freeze_steps") c.hyperparameter_freeze_steps = value.get<int>();
            else if (key == "learn_inducing") c.learn_inducing = value.get<bool>();
            else if (key == "checkpoint_every") c.checkpoint_every = value.get<int>();
            else throw ConfigError("unknown trainer key '" + key + "'");
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("trainer settings: ") + e.what());
    }
    return c;
}

Json to_json(const TrainReport& r) {
    return {{"steps", r.elbo_trace.size()},   {"initial_loss", r.initial_loss}, {"final_loss", r.final_loss},
            {"wall_time", r.wall_time},       {"jitter_events", r.jitter_events}, {"elbo_trace", r.elbo_trace},
            {"output_traces", r.output_traces}};
}

Json to_json(const EvalReport& r) {
    Json per = Json::array();
    for (const auto& o : r.per_output)
        per.push_back({{"rmse", o.rmse}, {"mean_std", o.mean_std}, {"cr1", o.cr1}, {"cr2", o.cr2}, {"cr3", o.cr3}});
    return {{"error", r.error}, {"std_norm", r.std_norm}, {"cr1", r.cr1}, {"cr2", r.cr2},
            {"cr3", r.cr3},     {"n_eval", r.n_eval},     {"per_output", per}};
}

Json to_json(const BenchResult& result) {
    Json cells = Json::array();
    for (const auto& c : result.cells) {
        Json cell = {{"system", to_string(c.cell.system)},
                     {"model", model_label(c.cell.prior)},
                     {"prior", to_string(c.cell.prior)},
                     {"train_size", c.cell.train_size},
                     {"repeat", c.cell.repeat},
                     {"ok", c.ok},
                     {"wall_time", c.wall_time}};
        if (c.ok) {
            cell["report"] = to_json(c.report);
            cell["final_loss"] = c.final_loss;
            cell["parameters"] = c.parameters;
            cell["num_inducing"] = c.num_inducing;
        } else {
            cell["error"] = c.error;
        }
        cells.push_back(std::move(cell));
    }
    Json series = Json::array();
    for (const auto& p : error_series(result))
        series.push_back({{"system", to_string(p.system)}, {"model", model_label(p.prior)}, {"train_size", p.train_size},
                          {"n", p.count}, {"error_mean", p.mean}, {"error_min", p.min}, {"error_max", p.max}});
    return {{"cells", cells}, {"error_series", series}};
}

}  // namespace evgp
