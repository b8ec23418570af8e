// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "m2g2/tensor.hpp"
#include "oracles.hpp"

namespace testing_support {

inline oracle::Mat to_mat(const m2g2::Tensor& t) {
  oracle::Mat m = oracle::zeros(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline m2g2::Tensor to_tensor(const oracle::Mat& m) {
  m2g2::Tensor t(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) = m[i][j];
  return t;
}

inline double max_diff(const oracle::Mat& a, const oracle::Mat& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

}  // namespace testing_support
