#pragma once

// CSV datasets: header, then one atom per row.
//   material-only:  c,y_1,...,y_D
//   paired:         c,y_1,...,y_D,z_1,...,z_D
// Numbers are written in shortest round-trip form, so write -> read is exact.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ddinfer/config.hpp"
#include "ddinfer/errors.hpp"
#include "ddinfer/measures.hpp"

namespace ddinfer {

/// Raw file contents; weights are kept as written, not as logs.
struct Dataset {
  Mat y;  // D x n
  Mat z;  // D x n, or empty
  Vec c;

  [[nodiscard]] bool paired() const { return z.cols() > 0 || (c.size() == 0 && z.rows() > 0); }
  [[nodiscard]] Eigen::Index size() const { return c.size(); }
  [[nodiscard]] EmpiricalMeasure measure() const {
    return paired() ? EmpiricalMeasure::paired(y, z, c) : EmpiricalMeasure::material(y, c);
  }
  static Dataset from_measure(const EmpiricalMeasure& mu) {
    Dataset d;
    d.y = mu.y();
    d.z = mu.is_paired() ? mu.z() : Mat();
    d.c = mu.weights();
    return d;
  }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                          : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// `point_dim` is D = 2N; 0 infers it from the header.
inline Dataset read_dataset(std::istream& in, Eigen::Index point_dim = 0) {
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv(line);
      break;
    }
  }
  if (header.empty()) throw ParseError("missing header", line_no);
  if (header[0] != "c") throw ParseError("first column must be 'c'", line_no);
  const auto cols = static_cast<Eigen::Index>(header.size());
  bool paired = false;
  if (point_dim > 0) {
    if (cols == 1 + point_dim) paired = false;
    else if (cols == 1 + 2 * point_dim) paired = true;
    else
      throw ParseError("column mismatch: expected " + std::to_string(1 + point_dim) + " or " +
                           std::to_string(1 + 2 * point_dim) + " columns, found " + std::to_string(cols),
                       line_no);
  } else {
    paired = false;
    for (const auto& h : header)
      if (h.rfind("z_", 0) == 0) paired = true;
    if (paired && (cols - 1) % 2 != 0) throw ParseError("paired layout needs an even number of coordinates", line_no);
    point_dim = paired ? (cols - 1) / 2 : cols - 1;
    if (point_dim < 1) throw ParseError("no coordinate columns", line_no);
  }

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols)
      throw ParseError("column mismatch: expected " + std::to_string(cols) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto v = parse_double(fields[k]);
      if (!v) throw ParseError("malformed number '" + fields[k] + "'", line_no);
      if (!std::isfinite(*v)) throw ParseError("non-finite value '" + fields[k] + "'", line_no);
      if (k == 0 && *v < 0.0) throw ParseError("negative weight", line_no);
      values.push_back(*v);
    }
    ++rows;
  }

  Dataset d;
  d.c.resize(rows);
  d.y.resize(point_dim, rows);
  if (paired) d.z.resize(point_dim, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* row = values.data() + i * cols;
    d.c[i] = row[0];
    for (Eigen::Index j = 0; j < point_dim; ++j) {
      d.y(j, i) = row[1 + j];
      if (paired) d.z(j, i) = row[1 + point_dim + j];
    }
  }
  return d;
}

inline Dataset read_dataset(const std::string& path, Eigen::Index point_dim = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_dataset(in, point_dim);
}

inline EmpiricalMeasure parse_dataset(const std::string& path, Eigen::Index point_dim = 0) {
  return read_dataset(path, point_dim).measure();
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
  const Eigen::Index dim = d.y.rows();
  const bool paired = d.paired();
  out << "c";
  for (Eigen::Index j = 1; j <= dim; ++j) out << ",y_" << j;
  if (paired)
    for (Eigen::Index j = 1; j <= dim; ++j) out << ",z_" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out << format_double(d.c[i]);
    for (Eigen::Index j = 0; j < dim; ++j) out << "," << format_double(d.y(j, i));
    if (paired)
      for (Eigen::Index j = 0; j < dim; ++j) out << "," << format_double(d.z(j, i));
    out << "\n";
  }
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  if (const std::filesystem::path p(path); p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_dataset(out, d);
}

}  // namespace ddinfer
