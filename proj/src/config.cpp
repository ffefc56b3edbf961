#include "evgp/config.hpp"

#include <functional>
#include <map>

#include "evgp/errors.hpp"

namespace evgp {

namespace {

using Handler = std::function<void(const Json&)>;

template <typename T>
Handler into(std::optional<T>& slot) {
    return [&slot](const Json& v) { slot = v.get<T>(); };
}

void read_object(const Json& j, const std::string& where, const std::map<std::string, Handler>& handlers) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        const auto it = handlers.find(key);
        const std::string path = where.empty() ? key : where + "." + key;
        if (it == handlers.end()) throw ConfigError("unknown config key '" + path + "'");
        try {
            it->second(value);
        } catch (const Json::exception& e) {
            throw ConfigError("config key '" + path + "': " + e.what());
        }
    }
}

template <typename T>
void put(Json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <typename T>
void take(std::optional<T>& dst, const std::optional<T>& src) {
    if (src) dst = src;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    read_object(j, "",
                {{"system", into(c.system)},
                 {"seed", into(c.seed)},
                 {"sampling",
                  [&](const Json& s) {
                      auto& p = c.sampling;
                      read_object(s, "sampling",
                                  {{"preset", into(p.preset)},
                                   {"trajectories", into(p.trajectories)},
                                   {"steps_per_traj", into(p.steps_per_traj)},
                                   {"dt", into(p.dt)},
                                   {"eta", into(p.eta)},
                                   {"alpha", into(p.alpha)},
                                   {"substeps", into(p.substeps)},
                                   {"obs_noise_std", into(p.obs_noise_std)}});
                  }},
                 {"model",
                  [&](const Json& s) {
                      read_object(s, "model", {{"prior", into(c.model.prior)}, {"m", into(c.model.m)}});
                  }},
                 {"trainer",
                  [&](const Json& s) {
                      train_config_from_json(s);  // validates keys and types
                      c.trainer = s;
                  }},
                 {"bench",
                  [&](const Json& s) {
                      auto& b = c.bench;
                      read_object(s, "bench",
                                  {{"preset", into(b.preset)},
                                   {"systems", into(b.systems)},
                                   {"priors", into(b.priors)},
                                   {"train_sizes", into(b.train_sizes)},
                                   {"repeats", into(b.repeats)},
                                   {"test_trajectories", into(b.test_trajectories)}});
                  }},
                 {"paths", [&](const Json& s) {
                      auto& p = c.paths;
                      read_object(s, "paths",
                                  {{"data", into(p.data)},
                                   {"test_data", into(p.test_data)},
                                   {"resume", into(p.resume)},
                                   {"model", into(p.model)},
                                   {"out", into(p.out)},
                                   {"report", into(p.report)}});
                  }}});
    return c;
}

Json to_json(const RunConfig& c) {
    Json j = Json::object();
    put(j, "system", c.system);
    put(j, "seed", c.seed);
    Json s = Json::object();
    put(s, "preset", c.sampling.preset);
    put(s, "trajectories", c.sampling.trajectories);
    put(s, "steps_per_traj", c.sampling.steps_per_traj);
    put(s, "dt", c.sampling.dt);
    put(s, "eta", c.sampling.eta);
    put(s, "alpha", c.sampling.alpha);
    put(s, "substeps", c.sampling.substeps);
    put(s, "obs_noise_std", c.sampling.obs_noise_std);
    if (!s.empty()) j["sampling"] = s;
    Json m = Json::object();
    put(m, "prior", c.model.prior);
    put(m, "m", c.model.m);
    if (!m.empty()) j["model"] = m;
    if (!c.trainer.empty()) j["trainer"] = c.trainer;
    Json b = Json::object();
    put(b, "preset", c.bench.preset);
    put(b, "systems", c.bench.systems);
    put(b, "priors", c.bench.priors);
    put(b, "train_sizes", c.bench.train_sizes);
    put(b, "repeats", c.bench.repeats);
    put(b, "test_trajectories", c.bench.test_trajectories);
    if (!b.empty()) j["bench"] = b;
    Json p = Json::object();
    put(p, "data", c.paths.data);
    put(p, "test_data", c.paths.test_data);
    put(p, "resume", c.paths.resume);
    put(p, "model", c.paths.model);
    put(p, "out", c.paths.out);
    put(p, "report", c.paths.report);
    if (!p.empty()) j["paths"] = p;
    return j;
}

void RunConfig::merge(const RunConfig& o) {
    take(system, o.system);
    take(seed, o.seed);
    take(sampling.preset, o.sampling.preset);
    take(sampling.trajectories, o.sampling.trajectories);
    take(sampling.steps_per_traj, o.sampling.steps_per_traj);
    take(sampling.dt, o.sampling.dt);
    take(sampling.eta, o.sampling.eta);
    take(sampling.alpha, o.sampling.alpha);
    take(sampling.substeps, o.sampling.substeps);
    take(sampling.obs_noise_std, o.sampling.obs_noise_std);
    take(model.prior, o.model.prior);
    take(model.m, o.model.m);
    for (const auto& [k, v] : o.trainer.items()) trainer[k] = v;
    take(bench.preset, o.bench.preset);
    take(bench.systems, o.bench.systems);
    take(bench.priors, o.bench.priors);
    take(bench.train_sizes, o.bench.train_sizes);
    take(bench.repeats, o.bench.repeats);
    take(bench.test_trajectories, o.bench.test_trajectories);
    take(paths.data, o.paths.data);
    take(paths.test_data, o.paths.test_data);
    take(paths.resume, o.paths.resume);
    take(paths.model, o.paths.model);
    take(paths.out, o.paths.out);
    take(paths.report, o.paths.report);
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json(path)); }

}  // namespace evgp
