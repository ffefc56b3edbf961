#pragma once

#include <string>
#include <vector>

#include "evgp/gaussian.hpp"

namespace evgp {

enum class FeatureId { Linear1D, PendulumIF, PendulumIFG, CartpoleIF, CartpoleIFG, AcrobotIF, AcrobotIFG, ZeroFeatures };

/// Explicit feature map h(x). Inputs are ordered [positions..., velocities..., controls...].
struct FeatureMap {
    FeatureId id = FeatureId::ZeroFeatures;
    int input_dim = 0;
    int feature_dim = 0;
    int output_dim = 0;

    static FeatureMap make(FeatureId id);
    /// Empty feature set over inputs of the given width; the model degrades to a zero-mean sparse GP.
    static FeatureMap zero(int input_dim, int output_dim);
};

std::string to_string(FeatureId id);
FeatureId feature_id_from_string(const std::string& name);

/// Human-readable feature labels, e.g. {"q1","q2","dq1","dq2","u","sin1","sin12"}.
std::vector<std::string> feature_names(const FeatureMap& map);

Vector features(const FeatureMap& map, const Vector& x);
/// Row i is features(map, row i of x).
Matrix feature_matrix(const FeatureMap& map, const Matrix& x);

/// Gaussian prior over β, one row of coefficients per output dimension.
struct BetaPrior {
    Matrix mean;                  // output_dim × p
    std::vector<PsdMatrix> cov;   // per output, p × p

    Eigen::Index outputs() const { return mean.rows(); }
    /// Per-entry prior standard deviation, output_dim × p.
    Matrix stddev() const;
    static BetaPrior from_mean_std(const Matrix& mean, const Matrix& stddev);
};

/// Prior-mean and std entries that encode an Euler step with unit inertia.
inline constexpr double kStructuralStd = 0.1;
inline constexpr double kUnknownCoefficientStd = 10.0;

BetaPrior default_prior(const FeatureMap& map, double dt);

/// (u_x × Rᵀg)·u_z, the gravity torque about a link's z axis. Evaluates to (Rᵀg)_y.
double gravity_torque_feature(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& gravity);

}  // namespace evgp
