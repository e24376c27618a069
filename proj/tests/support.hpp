#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mest/data.hpp"

namespace mest::testing {

inline Dataset numeric_dataset(
    std::initializer_list<std::pair<std::string, std::vector<double>>> cols) {
  Dataset ds;
  for (const auto& [name, values] : cols) ds.add_numeric(name, values);
  return ds;
}

inline UnitPartition rows_of(
    std::initializer_list<std::pair<std::string, std::vector<double>>> cols) {
  return partition_units(numeric_dataset(cols));
}

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Largest entrywise |a - b| divided by the largest |b| (absolute when b is 0).
inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  const double scale = b.cwiseAbs().maxCoeff();
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return (a - b).cwiseAbs().maxCoeff();
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Central moment of order k with divisor m.
inline double central_moment(const std::vector<double>& v, int k) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += std::pow(x - mu, k);
  return s / static_cast<double>(v.size());
}

inline double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size());
}

}  // namespace mest::testing
