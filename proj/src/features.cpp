#include "evgp/features.hpp"

#include <cmath>

#include "evgp/errors.hpp"

namespace evgp {

FeatureMap FeatureMap::make(FeatureId id) {
    switch (id) {
        case FeatureId::Linear1D: return {id, 1, 2, 1};
        case FeatureId::PendulumIF: return {id, 3, 3, 2};
        case FeatureId::PendulumIFG: return {id, 3, 4, 2};
        case FeatureId::CartpoleIF: return {id, 5, 5, 4};
        case FeatureId::CartpoleIFG: return {id, 5, 6, 4};
        case FeatureId::AcrobotIF: return {id, 5, 5, 4};
        case FeatureId::AcrobotIFG: return {id, 5, 7, 4};
        case FeatureId::ZeroFeatures: break;
    }
    throw ConfigError("ZeroFeatures needs explicit dimensions; use FeatureMap::zero");
}

FeatureMap FeatureMap::zero(int input_dim, int output_dim) {
    return {FeatureId::ZeroFeatures, input_dim, 0, output_dim};
}

std::string to_string(FeatureId id) {
    switch (id) {
        case FeatureId::Linear1D: return "Linear1D";
        case FeatureId::PendulumIF: return "PendulumIF";
        case FeatureId::PendulumIFG: return "PendulumIFG";
        case FeatureId::CartpoleIF: return "CartpoleIF";
        case FeatureId::CartpoleIFG: return "CartpoleIFG";
        case FeatureId::AcrobotIF: return "AcrobotIF";
        case FeatureId::AcrobotIFG: return "AcrobotIFG";
        case FeatureId::ZeroFeatures: return "ZeroFeatures";
    }
    return "?";
}

FeatureId feature_id_from_string(const std::string& name) {
    for (auto id : {FeatureId::Linear1D, FeatureId::PendulumIF, FeatureId::PendulumIFG, FeatureId::CartpoleIF,
                    FeatureId::CartpoleIFG, FeatureId::AcrobotIF, FeatureId::AcrobotIFG, FeatureId::ZeroFeatures})
        if (to_string(id) == name) return id;
    throw ConfigError("unknown feature map '" + name + "'");
}

std::vector<std::string> feature_names(const FeatureMap& map) {
    switch (map.id) {
        case FeatureId::Linear1D: return {"x", "1"};
        case FeatureId::PendulumIF: return {"q1", "dq1", "u"};
        case FeatureId::PendulumIFG: return {"q1", "dq1", "u", "sin1"};
        case FeatureId::CartpoleIF: return {"q1", "q2", "dq1", "dq2", "u"};
        case FeatureId::CartpoleIFG: return {"q1", "q2", "dq1", "dq2", "u", "sin2"};
        case FeatureId::AcrobotIF: return {"q1", "q2", "dq1", "dq2", "u"};
        case FeatureId::AcrobotIFG: return {"q1", "q2", "dq1", "dq2", "u", "sin1", "sin12"};
        case FeatureId::ZeroFeatures: return {};
    }
    return {};
}

Vector features(const FeatureMap& map, const Vector& x) {
    if (x.size() != map.input_dim)
        throw DimensionMismatch("features(" + to_string(map.id) + "): input length " + std::to_string(x.size()) +
                                ", expected " + std::to_string(map.input_dim));
    Vector h(map.feature_dim);
    switch (map.id) {
        case FeatureId::Linear1D: h << x(0), 1.0; break;
        case FeatureId::PendulumIF: h = x; break;
        case FeatureId::PendulumIFG: h << x, std::sin(x(0)); break;
        case FeatureId::CartpoleIF:
        case FeatureId::AcrobotIF: h = x; break;
        case FeatureId::CartpoleIFG: h << x, std::sin(x(1)); break;
        case FeatureId::AcrobotIFG: h << x, std::sin(x(0)), std::sin(x(0) + x(1)); break;
        case FeatureId::ZeroFeatures: break;
    }
    return h;
}

Matrix feature_matrix(const FeatureMap& map, const Matrix& x) {
    if (x.cols() != map.input_dim)
        throw DimensionMismatch("feature_matrix(" + to_string(map.id) + "): " + std::to_string(x.cols()) +
                                " columns, expected " + std::to_string(map.input_dim));
    Matrix h(x.rows(), map.feature_dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) h.row(i) = features(map, x.row(i).transpose()).transpose();
    return h;
}

Matrix BetaPrior::stddev() const {
    Matrix sd(mean.rows(), mean.cols());
    for (Eigen::Index o = 0; o < mean.rows(); ++o) sd.row(o) = cov[o].lower().diagonal().transpose();
    return sd;
}

BetaPrior BetaPrior::from_mean_std(const Matrix& mean, const Matrix& stddev) {
    if (mean.rows() != stddev.rows() || mean.cols() != stddev.cols())
        throw DimensionMismatch("BetaPrior mean and stddev shapes differ");
    if (!mean.allFinite()) throw ConfigError("BetaPrior mean has non-finite entries");
    BetaPrior prior{mean, {}};
    for (Eigen::Index o = 0; o < mean.rows(); ++o) {
        if (mean.cols() == 0) {
            prior.cov.emplace_back(Matrix(0, 0), 0.0);
            continue;
        }
        prior.cov.push_back(diagonal_psd(stddev.row(o).transpose().array().square()));
    }
    return prior;
}

BetaPrior default_prior(const FeatureMap& map, double dt) {
    if (!(dt > 0.0)) throw NonPositiveDt("default_prior dt = " + std::to_string(dt));
    constexpr double s = kStructuralStd;
    constexpr double u = kUnknownCoefficientStd;
    Matrix mean;
    Matrix sd;
    switch (map.id) {
        case FeatureId::Linear1D:
            mean = Matrix::Zero(1, 2);
            sd = Matrix::Constant(1, 2, u);
            break;
        case FeatureId::PendulumIF:
            mean.resize(2, 3);
            mean << 1, dt, 0,
                    0, 1, dt;
            sd = Matrix::Constant(2, 3, s);
            break;
        case FeatureId::PendulumIFG:
            mean.resize(2, 4);
            mean << 1, dt, 0, 0,
                    0, 1, dt, 0;
            sd = Matrix::Constant(2, 4, s);
            sd(1, 3) = u;  // -γ
            break;
        case FeatureId::CartpoleIF:
        case FeatureId::CartpoleIFG:
        case FeatureId::AcrobotIF:
        case FeatureId::AcrobotIFG: {
            mean = Matrix::Zero(4, map.feature_dim);
            mean.leftCols(4).setIdentity();
            mean(0, 2) = dt;
            mean(1, 3) = dt;
            sd = Matrix::Constant(4, map.feature_dim, s);
            if (map.id == FeatureId::CartpoleIF || map.id == FeatureId::CartpoleIFG) {
                sd(2, 4) = u;                                    // γ1: force on the cart
                if (map.id == FeatureId::CartpoleIFG) sd(3, 5) = u;  // -γ2 sin(q2)
            } else {
                sd(3, 4) = u;  // γ1: torque on the second link
                if (map.id == FeatureId::AcrobotIFG) {
                    sd(2, 5) = u;  // -γ2 sin1
                    sd(2, 6) = u;  // -γ3 sin12
                    sd(3, 6) = u;  // -γ4 sin12
                }
            }
            break;
        }
        case FeatureId::ZeroFeatures:
            mean = Matrix::Zero(map.output_dim, 0);
            sd = Matrix::Zero(map.output_dim, 0);
            break;
    }
    return BetaPrior::from_mean_std(mean, sd);
}

double gravity_torque_feature(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& gravity) {
    if (!((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-8) ||
        rotation.determinant() <= 0.0)
        throw NotARotation("RᵀR deviates from identity by more than 1e-8 or det R <= 0");
    const Eigen::Vector3d ux = Eigen::Vector3d::UnitX();
    const Eigen::Vector3d uz = Eigen::Vector3d::UnitZ();
    return ux.cross(rotation.transpose() * gravity).dot(uz);
}

}  // namespace evgp
