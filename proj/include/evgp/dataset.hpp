#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evgp/gaussian.hpp"

namespace evgp {

/// Regression data: rows of x are inputs, columns of y are independent outputs.
struct Dataset {
    Matrix x;
    Matrix y;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index input_dim() const { return x.cols(); }
    Eigen::Index output_dim() const { return y.cols(); }

    /// First n rows.
    Dataset head(Eigen::Index n) const;
    /// FNV-1a over the column names, as 16 hex digits.
    std::string schema_hash() const;
    void validate() const;
};

}  // namespace evgp
