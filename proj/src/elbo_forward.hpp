#pragma once

// Intermediate quantities of one negative-ELBO evaluation, shared by the
// loss and its analytic gradient.

#include "evgp/model.hpp"

namespace evgp::detail {

struct ElboForward {
    Matrix h;        // n × p features
    Matrix kxm;      // n × m
    Matrix kmm;      // m × m, jittered as factored
    PsdMatrix chol;  // of kmm
    Matrix v;        // L⁻¹ K_mx, m × n
    Matrix w;        // K_xm K_mm⁻¹, n × m
    Matrix la;       // factor of A
    Matrix lb;       // factor of B
    Vector residual;
    ElboTerms terms;
};

ElboForward elbo_forward(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map,
                         const Matrix& x, const Vector& y);

}  // namespace evgp::detail
