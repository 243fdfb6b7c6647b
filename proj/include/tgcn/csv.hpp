// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string_view>

#include <Eigen/Dense>

namespace tgcn::csv {

/// Reads a headerless CSV of decimal numbers. Every row must have the same
/// number of cells. Errors carry 1-based row/column locations.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
Eigen::MatrixXd parse_matrix(std::string_view text, std::string_view source = "<memory>");

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace tgcn::csv
