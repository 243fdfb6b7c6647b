// SPDX-License-Identifier: Apache-2.0
#include "tgcn/csv.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "tgcn/errors.hpp"

namespace tgcn::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string location(std::string_view source, std::size_t row, std::size_t col) {
  std::ostringstream os;
  os << source << ": row " << row << ", column " << col;
  return os.str();
}

}  // namespace

Eigen::MatrixXd parse_matrix(std::string_view text, std::string_view source) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (trim(line).empty()) continue;

    std::vector<double> row;
    std::size_t col = 0;
    while (true) {
      auto comma = line.find(',');
      std::string_view cell = trim(line.substr(0, comma));
      ++col;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        // from_chars rejects a leading '+', accept it like strtod would
        bool recovered = false;
        if (!cell.empty() && cell.front() == '+') {
          auto [p2, e2] = std::from_chars(cell.data() + 1, cell.data() + cell.size(), v);
          recovered = e2 == std::errc{} && p2 == cell.data() + cell.size();
        }
        if (!recovered) {
          throw ParseError("non-numeric cell '" + std::string(cell) + "' at " +
                           location(source, line_no, col));
        }
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("ragged row: expected " + std::to_string(rows.front().size()) +
                       " columns, found " + std::to_string(row.size()) + " at " +
                       location(source, line_no, row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(std::string(source) + ": no data rows");

  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_matrix(buf.str(), path.string());
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

}  // namespace tgcn::csv
