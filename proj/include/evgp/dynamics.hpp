#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "evgp/dataset.hpp"
#include "evgp/gaussian.hpp"

namespace evgp {

enum class SystemId { Pendulum, Cartpole, Acrobot };

std::string to_string(SystemId id);
SystemId system_id_from_string(const std::string& name);

inline constexpr double kGravity = 9.81;

/// Point mass on a massless rod; q = 0 hangs straight down.
struct PendulumParams {
    double mass = 1.0;
    double length = 0.5;
    double damping = 0.1;
    double gravity = kGravity;
    double inertia() const { return mass * length * length; }
};

/// Cart on a rail with a pole; q = [cart position, pole angle], angle 0 hangs down.
struct CartpoleParams {
    double cart_mass = 10.0;
    double pole_mass = 1.0;
    double pole_length = 0.5;
    double gravity = kGravity;
};

/// Two-link arm actuated at the elbow; q = 0 hangs straight down.
struct AcrobotParams {
    double m1 = 1.0, m2 = 1.0;
    double l1 = 1.0, l2 = 2.0;
    double lc1 = 0.5, lc2 = 1.0;
    double ic1 = 0.083, ic2 = 0.33;
    double b1 = 0.1, b2 = 0.1;
    double gravity = kGravity;
};

struct SystemSpec {
    SystemId id = SystemId::Pendulum;
    std::variant<PendulumParams, CartpoleParams, AcrobotParams> params;

    int state_dim() const { return id == SystemId::Pendulum ? 2 : 4; }
    int control_dim() const { return 1; }
    /// q1.., dq1.. followed by u1..
    std::vector<std::string> state_names() const;
    std::vector<std::string> control_names() const;

    static SystemSpec make(SystemId id);
    void validate() const;
};

/// Time derivative of the state [q, dq] under control u.
Vector state_derivative(const SystemSpec& spec, const Vector& z, const Vector& u);

/// One classical Runge–Kutta step of size dt. Throws NonFiniteState on blow-up.
Vector step_dynamics(const SystemSpec& spec, const Vector& z, const Vector& u, double dt);

/// Kinetic plus potential energy (no damping or control assumed).
double mechanical_energy(const SystemSpec& spec, const Vector& z);

struct SamplingSpec {
    Vector alpha;             // z[0] ~ alpha ⊙ U(-1, 1)
    double eta = 1.0;         // u[t] ~ eta · N(0, 1)
    int trajectories = 1;     // H
    int steps_per_traj = 100; // transitions per trajectory
    double dt = 0.03;
    int substeps = 10;        // RK4 sub-steps per dt

    /// Collection parameters for the training/testing sets of each system.
    static SamplingSpec table1(SystemId id);
    void validate(const SystemSpec& spec) const;
};

struct Trajectory {
    Matrix states;    // (T+1) × state_dim
    Matrix controls;  // T × control_dim
};

struct TrajectoryBatch {
    SystemId system = SystemId::Pendulum;
    std::vector<Trajectory> trajectories;
    double dt = 0.03;
    std::uint64_t seed = 0;

    Eigen::Index transitions() const;
};

TrajectoryBatch sample_dataset(const SystemSpec& spec, const SamplingSpec& sampling, std::uint64_t seed);

inline constexpr double kDefaultObservationNoiseStd = 0.01;

/// One-step regression pairs x = z[t] ⊕ u[t], y = z[t+1] + ε, never across trajectories.
Dataset to_regression(const SystemSpec& spec, const TrajectoryBatch& batch, const Vector& obs_noise_std);

}  // namespace evgp
