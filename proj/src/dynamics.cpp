#include "evgp/dynamics.hpp"

#include <cmath>

#include "evgp/errors.hpp"
#include "evgp/random.hpp"

namespace evgp {

std::string to_string(SystemId id) {
    switch (id) {
        case SystemId::Pendulum: return "pendulum";
        case SystemId::Cartpole: return "cartpole";
        case SystemId::Acrobot: return "acrobot";
    }
    return "?";
}

SystemId system_id_from_string(const std::string& name) {
    for (auto id : {SystemId::Pendulum, SystemId::Cartpole, SystemId::Acrobot})
        if (to_string(id) == name) return id;
    throw ConfigError("unknown system '" + name + "' (expected pendulum, cartpole or acrobot)");
}

std::vector<std::string> SystemSpec::state_names() const {
    const int k = state_dim() / 2;
    std::vector<std::string> names;
    for (int i = 1; i <= k; ++i) names.push_back("q" + std::to_string(i));
    for (int i = 1; i <= k; ++i) names.push_back("dq" + std::to_string(i));
    return names;
}

std::vector<std::string> SystemSpec::control_names() const {
    std::vector<std::string> names;
    for (int i = 1; i <= control_dim(); ++i) names.push_back("u" + std::to_string(i));
    return names;
}

SystemSpec SystemSpec::make(SystemId id) {
    switch (id) {
        case SystemId::Pendulum: return {id, PendulumParams{}};
        case SystemId::Cartpole: return {id, CartpoleParams{}};
        case SystemId::Acrobot: return {id, AcrobotParams{}};
    }
    throw ConfigError("unknown system id");
}

void SystemSpec::validate() const {
    auto positive = [](std::initializer_list<double> xs) {
        for (double x : xs)
            if (!(x > 0.0)) throw ConfigError("system parameters must be positive");
    };
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PendulumParams>) {
                if (id != SystemId::Pendulum) throw ConfigError("system id does not match parameters");
                positive({p.mass, p.length});
            } else if constexpr (std::is_same_v<T, CartpoleParams>) {
                if (id != SystemId::Cartpole) throw ConfigError("system id does not match parameters");
                positive({p.cart_mass, p.pole_mass, p.pole_length});
            } else {
                if (id != SystemId::Acrobot) throw ConfigError("system id does not match parameters");
                positive({p.m1, p.m2, p.l1, p.l2, p.lc1, p.lc2, p.ic1, p.ic2});
            }
        },
        params);
}

namespace {

Vector pendulum_rhs(const PendulumParams& p, const Vector& z, double u) {
    Vector dz(2);
    dz(0) = z(1);
    dz(1) = (u - p.mass * p.gravity * p.length * std::sin(z(0)) - p.damping * z(1)) / p.inertia();
    return dz;
}

Vector cartpole_rhs(const CartpoleParams& p, const Vector& z, double f) {
    const double s = std::sin(z(1)), c = std::cos(z(1)), w = z(3);
    const double denom = p.cart_mass + p.pole_mass * s * s;
    Vector dz(4);
    dz(0) = z(2);
    dz(1) = z(3);
    dz(2) = (f + p.pole_mass * s * (p.pole_length * w * w + p.gravity * c)) / denom;
    dz(3) = (-f * c - p.pole_mass * p.pole_length * w * w * c * s - (p.cart_mass + p.pole_mass) * p.gravity * s) /
            (p.pole_length * denom);
    return dz;
}

Eigen::Matrix2d acrobot_mass(const AcrobotParams& p, double q2) {
    const double i1 = p.ic1 + p.m1 * p.lc1 * p.lc1;
    const double i2 = p.ic2 + p.m2 * p.lc2 * p.lc2;
    const double c2 = std::cos(q2);
    const double off = i2 + p.m2 * p.l1 * p.lc2 * c2;
    Eigen::Matrix2d m;
    m << i1 + i2 + p.m2 * p.l1 * p.l1 + 2.0 * p.m2 * p.l1 * p.lc2 * c2, off, off, i2;
    return m;
}

Vector acrobot_rhs(const AcrobotParams& p, const Vector& z, double u) {
    const double q1 = z(0), q2 = z(1), w1 = z(2), w2 = z(3);
    const double s1 = std::sin(q1), s2 = std::sin(q2), s12 = std::sin(q1 + q2);
    const double h = p.m2 * p.l1 * p.lc2 * s2;
    const Eigen::Vector2d coriolis(-2.0 * h * w1 * w2 - h * w2 * w2, h * w1 * w1);
    const Eigen::Vector2d gravity(-p.m1 * p.gravity * p.lc1 * s1 - p.m2 * p.gravity * (p.l1 * s1 + p.lc2 * s12),
                                  -p.m2 * p.gravity * p.lc2 * s12);
    const Eigen::Vector2d damping(p.b1 * w1, p.b2 * w2);
    const Eigen::Vector2d torque(0.0, u);
    const Eigen::Vector2d acc = acrobot_mass(p, q2).ldlt().solve(gravity + torque - coriolis - damping);
    Vector dz(4);
    dz << w1, w2, acc(0), acc(1);
    return dz;
}

}  // namespace

Vector state_derivative(const SystemSpec& spec, const Vector& z, const Vector& u) {
    if (z.size() != spec.state_dim() || u.size() != spec.control_dim())
        throw DimensionMismatch("state/control size for " + to_string(spec.id));
    return std::visit(
        [&](const auto& p) -> Vector {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PendulumParams>)
                return pendulum_rhs(p, z, u(0));
            else if constexpr (std::is_same_v<T, CartpoleParams>)
                return cartpole_rhs(p, z, u(0));
            else
                return acrobot_rhs(p, z, u(0));
        },
        spec.params);
}

Vector step_dynamics(const SystemSpec& spec, const Vector& z, const Vector& u, double dt) {
    if (!(dt > 0.0)) throw NonPositiveDt("step_dynamics dt = " + std::to_string(dt));
    if (!z.allFinite() || !u.allFinite()) throw NonFiniteState("non-finite input to step_dynamics");
    const Vector k1 = state_derivative(spec, z, u);
    const Vector k2 = state_derivative(spec, z + 0.5 * dt * k1, u);
    const Vector k3 = state_derivative(spec, z + 0.5 * dt * k2, u);
    const Vector k4 = state_derivative(spec, z + dt * k3, u);
    Vector next = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw NonFiniteState(to_string(spec.id) + " integration diverged");
    return next;
}

double mechanical_energy(const SystemSpec& spec, const Vector& z) {
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PendulumParams>) {
                return 0.5 * p.inertia() * z(1) * z(1) - p.mass * p.gravity * p.length * std::cos(z(0));
            } else if constexpr (std::is_same_v<T, CartpoleParams>) {
                const double v = z(2), w = z(3), c = std::cos(z(1));
                return 0.5 * (p.cart_mass + p.pole_mass) * v * v + p.pole_mass * v * w * p.pole_length * c +
                       0.5 * p.pole_mass * p.pole_length * p.pole_length * w * w -
                       p.pole_mass * p.gravity * p.pole_length * c;
            } else {
                const Eigen::Vector2d w(z(2), z(3));
                return 0.5 * w.dot(acrobot_mass(p, z(1)) * w) - p.m1 * p.gravity * p.lc1 * std::cos(z(0)) -
                       p.m2 * p.gravity * (p.l1 * std::cos(z(0)) + p.lc2 * std::cos(z(0) + z(1)));
            }
        },
        spec.params);
}

SamplingSpec SamplingSpec::table1(SystemId id) {
    constexpr double pi = 3.14159265358979323846;
    SamplingSpec s;
    switch (id) {
        case SystemId::Pendulum:
            s.alpha = Vector(2);
            s.alpha << pi, 0.5;
            s.eta = 1.0;
            s.trajectories = 48;
            break;
        case SystemId::Cartpole:
            s.alpha = Vector(4);
            s.alpha << 1.0, pi, 0.5, 0.5;
            s.eta = 100.0;
            s.trajectories = 48;
            break;
        case SystemId::Acrobot:
            s.alpha = Vector(4);
            s.alpha << pi, 1.0, 0.5, 0.5;
            s.eta = 0.5;
            s.trajectories = 93;
            break;
    }
    return s;
}

void SamplingSpec::validate(const SystemSpec& spec) const {
    if (alpha.size() != spec.state_dim())
        throw ConfigError("alpha has " + std::to_string(alpha.size()) + " entries, " + to_string(spec.id) +
                          " state has " + std::to_string(spec.state_dim()));
    if (trajectories < 1) throw ConfigError("trajectory count must be >= 1");
    if (steps_per_traj < 1) throw ConfigError("steps per trajectory must be >= 1");
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
    if (!(dt > 0.0)) throw NonPositiveDt("sampling dt = " + std::to_string(dt));
    if (eta < 0.0 || (alpha.array() < 0.0).any()) throw ConfigError("sampling scales must be nonnegative");
}

Eigen::Index TrajectoryBatch::transitions() const {
    Eigen::Index n = 0;
    for (const auto& t : trajectories) n += t.states.rows() - 1;
    return n;
}

TrajectoryBatch sample_dataset(const SystemSpec& spec, const SamplingSpec& sampling, std::uint64_t seed) {
    spec.validate();
    sampling.validate(spec);
    TrajectoryBatch batch{spec.id, {}, sampling.dt, seed};
    batch.trajectories.reserve(static_cast<std::size_t>(sampling.trajectories));
    const double h = sampling.dt / sampling.substeps;
    for (int k = 0; k < sampling.trajectories; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        Trajectory traj{Matrix(sampling.steps_per_traj + 1, spec.state_dim()),
                        Matrix(sampling.steps_per_traj, spec.control_dim())};
        Vector z(spec.state_dim());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sampling.alpha(i) * unif(rng);
        traj.states.row(0) = z.transpose();
        for (int t = 0; t < sampling.steps_per_traj; ++t) {
            Vector u(spec.control_dim());
            for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = sampling.eta * normal(rng);
            for (int s = 0; s < sampling.substeps; ++s) z = step_dynamics(spec, z, u, h);
            traj.controls.row(t) = u.transpose();
            traj.states.row(t + 1) = z.transpose();
        }
        batch.trajectories.push_back(std::move(traj));
    }
    return batch;
}

Dataset to_regression(const SystemSpec& spec, const TrajectoryBatch& batch, const Vector& obs_noise_std) {
    const auto sd = spec.state_dim(), cd = spec.control_dim();
    if (obs_noise_std.size() != sd) throw DimensionMismatch("observation noise needs one std per state dimension");
    if ((obs_noise_std.array() < 0.0).any()) throw ConfigError("observation noise std must be nonnegative");
    if (batch.system != spec.id) throw ConfigError("trajectory batch was sampled from a different system");

    Dataset data;
    const auto n = batch.transitions();
    data.x.resize(n, sd + cd);
    data.y.resize(n, sd);
    data.input_names = spec.state_names();
    for (const auto& c : spec.control_names()) data.input_names.push_back(c);
    for (const auto& s : spec.state_names()) data.target_names.push_back("y_" + s);

    Rng rng(derive_seed(batch.seed, 0xfeedull));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Index row = 0;
    for (const auto& traj : batch.trajectories) {
        if (traj.states.cols() != sd || traj.controls.rows() != traj.states.rows() - 1)
            throw DimensionMismatch("trajectory arrays have inconsistent lengths");
        for (Eigen::Index t = 0; t + 1 < traj.states.rows(); ++t, ++row) {
            data.x.row(row) << traj.states.row(t), traj.controls.row(t);
            for (Eigen::Index j = 0; j < sd; ++j)
                data.y(row, j) = traj.states(t + 1, j) + obs_noise_std(j) * normal(rng);
        }
    }
    return data;
}

}  // namespace evgp
