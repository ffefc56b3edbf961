#include "evgp/dataset.hpp"

#include <cstdio>

#include "evgp/errors.hpp"

namespace evgp {

Dataset Dataset::head(Eigen::Index n) const {
    if (n > rows()) throw ConfigError("requested " + std::to_string(n) + " rows from a dataset of " +
                                      std::to_string(rows()));
    return {x.topRows(n), y.topRows(n), input_names, target_names};
}

std::string Dataset::schema_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= ',';
        h *= 1099511628211ull;
    };
    for (const auto& n : input_names) mix(n);
    mix("|");
    for (const auto& n : target_names) mix(n);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void Dataset::validate() const {
    if (x.rows() != y.rows()) throw DimensionMismatch("dataset: x and y row counts differ");
    if (static_cast<Eigen::Index>(input_names.size()) != x.cols() ||
        static_cast<Eigen::Index>(target_names.size()) != y.cols())
        throw DimensionMismatch("dataset: column names do not match matrix widths");
    if (!x.allFinite() || !y.allFinite()) throw ConfigError("dataset contains non-finite values");
}

}  // namespace evgp
