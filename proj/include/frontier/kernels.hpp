#pragma once

// Compactly supported higher-order kernels K(u) = (1 - u^2)^2 q(u^2).
//
// The (1 - u^2)^2 factor makes K and K' vanish at +-1, so K' is Lipschitz on
// the real line. The even polynomial q is chosen so that K integrates to one
// and its even moments 2, 4, ..., L - 2 vanish; odd moments vanish by
// symmetry. The moment system is assembled and solved in exact rational
// arithmetic, using
//   int_{-1}^{1} (1 - u^2)^2 u^{2m} du = 16 / ((2m + 1)(2m + 3)(2m + 5)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "frontier/errors.hpp"

namespace frontier {

class HigherOrderKernel {
 public:
  HigherOrderKernel() = default;
  HigherOrderKernel(int order, std::vector<double> q_coeffs)
      : order_(order), q_(std::move(q_coeffs)) {
    // Expand (1 - 2u^2 + u^4) * sum_j q_j u^{2j} into monomials.
    coeffs_.assign(2 * q_.size() + 5, 0.0);
    for (std::size_t j = 0; j < q_.size(); ++j) {
      coeffs_[2 * j] += q_[j];
      coeffs_[2 * j + 2] -= 2.0 * q_[j];
      coeffs_[2 * j + 4] += q_[j];
    }
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
    deriv_.resize(coeffs_.size() > 1 ? coeffs_.size() - 1 : 0);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) deriv_[k - 1] = k * coeffs_[k];
  }

  int order() const noexcept { return order_; }
  // Coefficients of q in powers of u^2.
  const std::vector<double>& q_coeffs() const noexcept { return q_; }
  // Monomial coefficients of K on [-1, 1].
  const std::vector<double>& coeffs() const noexcept { return coeffs_; }

  double operator()(double u) const noexcept {
    if (!(std::abs(u) < 1.0)) return 0.0;
    return horner(coeffs_, u);
  }

  double derivative(double u) const noexcept {
    if (!(std::abs(u) < 1.0)) return 0.0;
    return horner(deriv_, u);
  }

 private:
  static double horner(const std::vector<double>& c, double u) noexcept {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
  }

  int order_ = 2;
  std::vector<double> q_;
  std::vector<double> coeffs_;
  std::vector<double> deriv_;
};

// Kernel order demanded for a Holder-beta regression function: floor(beta)+1,
// rounded up to the next even number.
inline int kernel_order_for(double beta) {
  const int l = static_cast<int>(std::floor(beta)) + 1;
  return std::max(2, l % 2 == 0 ? l : l + 1);
}

inline HigherOrderKernel build_kernel(int order) {
  using Q = boost::multiprecision::cpp_rational;
  if (order < 2 || order % 2 != 0) throw DomainError("kernel order must be even and at least 2");
  if (order > 12) throw DomainError("kernel order above 12 is not supported");

  const int r = order / 2;
  auto moment = [](int m) { return Q(16) / Q((2 * m + 1) * (2 * m + 3) * (2 * m + 5)); };
  // Row i: int u^{2i} K = delta_{i0}.
  std::vector<std::vector<Q>> a(r, std::vector<Q>(r + 1));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) a[i][j] = moment(i + j);
    a[i][r] = i == 0 ? Q(1) : Q(0);
  }
  for (int col = 0; col < r; ++col) {
    int piv = col;
    while (piv < r && a[piv][col] == Q(0)) ++piv;
    if (piv == r) throw DomainError("singular kernel moment system");
    std::swap(a[col], a[piv]);
    for (int row = 0; row < r; ++row) {
      if (row == col || a[row][col] == Q(0)) continue;
      const Q f = a[row][col] / a[col][col];
      for (int c = col; c <= r; ++c) a[row][c] -= f * a[col][c];
    }
  }
  std::vector<double> q(r);
  for (int i = 0; i < r; ++i) q[i] = Q(a[i][r] / a[i][i]).convert_to<double>();
  return HigherOrderKernel(order, std::move(q));
}

// int_{-1}^{1} u^r K(u) du, integrated term by term.
inline double kernel_moment(const HigherOrderKernel& k, int r) {
  if (r < 0) throw DomainError("moment order must be non-negative");
  double total = 0.0;
  const auto& c = k.coeffs();
  for (std::size_t j = 0; j < c.size(); ++j) {
    const int p = r + static_cast<int>(j);
    if (p % 2 == 0) total += c[j] * 2.0 / (p + 1);
  }
  return total;
}

inline double eval_kernel(const HigherOrderKernel& k, double u) { return k(u); }
inline double eval_kernel_derivative(const HigherOrderKernel& k, double u) {
  return k.derivative(u);
}

}  // namespace frontier
