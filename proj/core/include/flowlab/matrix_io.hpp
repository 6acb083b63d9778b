#pragma once

#include <Eigen/Dense>
#include <string>

namespace flowlab {

/// Dense float64 matrix file: one ASCII header line "rows cols\n" followed
/// by row-major little-endian doubles.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

}  // namespace flowlab
