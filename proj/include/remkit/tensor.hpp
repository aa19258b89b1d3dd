#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace remkit {

/// Dense row-major 64-bit matrix. Batches are [examples x features];
/// weights are [outputs x inputs]; biases are [1 x outputs].
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline bool all_finite(const Matrix& m) {
    return m.size() == 0 || m.allFinite();
}

}  // namespace remkit
