#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "genbench/keyvalue.hpp"

namespace genbench {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raw little-endian IEEE-754 binary64, no header.
void write_f64(const std::filesystem::path& path, std::span<const double> values);

/// Throws Error(Io) if the file does not hold exactly `expected_count` values.
std::vector<double> read_f64(const std::filesystem::path& path, std::size_t expected_count);

/// Writes `<dir>/<stem>.bin` row-major plus `<dir>/<stem>.manifest` (role, rows, cols).
void write_matrix(const std::filesystem::path& dir, const std::string& stem,
                  const Eigen::MatrixXd& m, const std::string& role);
Eigen::MatrixXd read_matrix(const std::filesystem::path& dir, const std::string& stem,
                            std::string* role = nullptr);

/// Creates `dir` for a write-once artifact. Fails if it exists and is non-empty
/// unless `force` is set, in which case existing contents are removed.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace genbench
