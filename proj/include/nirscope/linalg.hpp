#pragma once

#include <Eigen/Core>

#include <span>

namespace nirscope {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::span<const double> row_span(const Matrix& m, Eigen::Index r)
{
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

} // namespace nirscope
