#pragma once

// Minimal-area polynomial lying above a window of data points.
//
// Primal:  min  sum_k w_k c_k   s.t.  sum_k c_k t_i^k >= y_i   (c free)
// Dual:    max  sum_i l_i y_i   s.t.  sum_i l_i t_i^k  = w_k,  l >= 0
//
// The dual has only d + 1 equality rows, so it is solved with a dense
// revised simplex whose basis is at most a handful of columns wide. The
// simplex multipliers of the dual are the polynomial coefficients and the
// reduced cost of column i is the primal slack p(t_i) - y_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frontier/errors.hpp"

namespace frontier {

struct WindowData {
  std::vector<double> ts;  // standardized abscissas in [-1, 1], increasing
  std::vector<double> ys;

  std::size_t size() const noexcept { return ts.size(); }
};

inline void validate(const WindowData& win) {
  if (win.ts.empty()) throw DomainError("window is empty");
  if (win.ts.size() != win.ys.size()) throw DomainError("window: ts and ys differ in length");
  for (std::size_t i = 0; i < win.ts.size(); ++i) {
    if (!(std::abs(win.ts[i]) <= 1.0)) throw DomainError("window: abscissa outside [-1, 1]");
    if (i > 0 && !(win.ts[i] > win.ts[i - 1]))
      throw DomainError("window: abscissas must be strictly increasing");
  }
}

struct ObjectiveWeights {
  std::vector<double> w;

  int degree() const noexcept { return static_cast<int>(w.size()) - 1; }
};

// Weights of p -> int_{-1}^{1} p(t) dt.
inline ObjectiveWeights integral_objective(int degree) {
  if (degree < 0) throw DomainError("degree must be non-negative");
  ObjectiveWeights obj{std::vector<double>(static_cast<std::size_t>(degree) + 1, 0.0)};
  for (int k = 0; k <= degree; k += 2) obj.w[k] = 2.0 / (k + 1);
  return obj;
}

// Weights of p -> sum_i p(t_i).
inline ObjectiveWeights riemann_objective(int degree, std::span<const double> ts) {
  if (degree < 0) throw DomainError("degree must be non-negative");
  if (ts.empty()) throw DomainError("riemann objective needs at least one abscissa");
  ObjectiveWeights obj{std::vector<double>(static_cast<std::size_t>(degree) + 1, 0.0)};
  for (double t : ts) {
    double pw = 1.0;
    for (int k = 0; k <= degree; ++k) {
      obj.w[k] += pw;
      pw *= t;
    }
  }
  return obj;
}

struct PolyFit {
  int degree = 0;
  std::vector<double> coeffs;  // p(t) = sum_k coeffs[k] t^k
  double objective_value = 0.0;
  double dual_objective = 0.0;
  std::vector<std::size_t> active_set;  // window indices of binding constraints, sorted
  std::vector<double> multipliers;      // dual weights of the active constraints
  std::size_t iterations = 0;
  bool ill_conditioned = false;  // some elimination pivot fell below 1e-12
};

inline double eval_poly(std::span<const double> coeffs, double t) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
  return acc;
}

inline double eval_poly(const PolyFit& fit, double t) { return eval_poly(fit.coeffs, t); }

namespace detail {

inline constexpr double kSmallPivot = 1e-12;

// Solves a dense k x k system (row-major) by Gaussian elimination with
// partial pivoting. Returns nullopt when the matrix is numerically singular.
inline std::optional<std::vector<double>> solve_dense(std::vector<double> a, std::vector<double> b,
                                                      bool* small_pivot = nullptr) {
  const std::size_t k = b.size();
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return std::nullopt;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
    const double p = a[piv * k + col];
    if (std::abs(p) <= 1e-14 * scale) return std::nullopt;
    if (small_pivot && std::abs(p) < kSmallPivot) *small_pivot = true;
    if (piv != col) {
      for (std::size_t c = 0; c < k; ++c) std::swap(a[col * k + c], a[piv * k + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = a[r * k + col] / p;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(k);
  for (std::size_t i = k; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < k; ++c) s -= a[i * k + c] * x[c];
    x[i] = s / a[i * k + i];
  }
  return x;
}

// Coefficients of the polynomial interpolating (ts[j], ys[j]) for j in subset.
inline std::optional<std::vector<double>> interpolate(const WindowData& win,
                                                      std::span<const std::size_t> subset,
                                                      bool* small_pivot = nullptr) {
  const std::size_t r = subset.size();
  std::vector<double> a(r * r), b(r);
  for (std::size_t row = 0; row < r; ++row) {
    const double t = win.ts[subset[row]];
    double pw = 1.0;
    for (std::size_t k = 0; k < r; ++k) {
      a[row * r + k] = pw;
      pw *= t;
    }
    b[row] = win.ys[subset[row]];
  }
  return solve_dense(std::move(a), std::move(b), small_pivot);
}

// Dense revised simplex for  min c^T x  s.t.  A x = b, x >= 0,  where the
// structural columns are the monomial vectors (t_j^k)_k and phase one adds
// one artificial column per row.
class DualSimplex {
 public:
  DualSimplex(const WindowData& win, const ObjectiveWeights& obj)
      : win_(win), rows_(obj.w.size()), m_(win.size()), sign_(rows_), rhs_(rows_) {
    for (std::size_t k = 0; k < rows_; ++k) {
      sign_[k] = obj.w[k] < 0.0 ? -1.0 : 1.0;
      rhs_[k] = sign_[k] * obj.w[k];
    }
    double s = 0.0;
    for (double y : win.ys) s = std::max(s, std::abs(y));
    cost_scale_ = 1.0 + s;
  }

  PolyFit run() {
    basis_.resize(rows_);
    for (std::size_t k = 0; k < rows_; ++k) basis_[k] = m_ + k;

    // Phase one: minimize the sum of artificials.
    phase_ = 1;
    iterate();
    double infeas = 0.0;
    for (std::size_t k = 0; k < rows_; ++k)
      if (basis_[k] >= m_) infeas += xb_[k];
    double rhs_scale = 0.0;
    for (double v : rhs_) rhs_scale = std::max(rhs_scale, v);
    if (infeas > 1e-9 * (1.0 + rhs_scale))
      throw NumericalDegeneracy(
          "dual LP infeasible: the objective is unbounded below on this window "
          "(residual infeasibility " +
          std::to_string(infeas) + ")");
    drive_out_artificials();

    phase_ = 2;
    bland_ = false;
    degenerate_run_ = 0;
    iterate();
    return extract();
  }

 private:
  void column(std::size_t j, std::vector<double>& out) const {
    out.assign(rows_, 0.0);
    if (j >= m_) {
      out[j - m_] = 1.0;
      return;
    }
    double pw = 1.0;
    for (std::size_t k = 0; k < rows_; ++k) {
      out[k] = sign_[k] * pw;
      pw *= win_.ts[j];
    }
  }

  double cost(std::size_t j) const {
    if (phase_ == 1) return j >= m_ ? 1.0 : 0.0;
    return j >= m_ ? 0.0 : -win_.ys[j];
  }

  // Factorize the basis; fills xb_ = B^-1 b and price_ = B^-T c_B.
  void refresh() {
    const std::size_t r = rows_;
    bmat_.assign(r * r, 0.0);
    std::vector<double> col;
    for (std::size_t c = 0; c < r; ++c) {
      column(basis_[c], col);
      for (std::size_t k = 0; k < r; ++k) bmat_[k * r + c] = col[k];
    }
    auto xb = solve_dense(bmat_, rhs_, &ill_conditioned_);
    std::vector<double> bt(r * r), cb(r);
    for (std::size_t i = 0; i < r; ++i) {
      cb[i] = cost(basis_[i]);
      for (std::size_t j = 0; j < r; ++j) bt[i * r + j] = bmat_[j * r + i];
    }
    auto pi = solve_dense(std::move(bt), std::move(cb), &ill_conditioned_);
    if (!xb || !pi) throw NumericalDegeneracy("simplex basis became singular");
    xb_ = std::move(*xb);
    for (double& v : xb_)
      if (v < 0.0 && v > -1e-13) v = 0.0;
    price_ = std::move(*pi);
  }

  void iterate() {
    const std::size_t limit = 50 * (m_ + rows_) + 100;
    std::vector<char> in_basis(m_ + rows_, 0);
    std::vector<double> col;
    while (true) {
      if (++iterations_ > limit) throw NumericalDegeneracy("simplex iteration limit reached");
      refresh();
      std::fill(in_basis.begin(), in_basis.end(), 0);
      for (std::size_t b : basis_) in_basis[b] = 1;

      // Pricing. Structural reduced costs are evaluated with Horner on the
      // multipliers folded with the row signs.
      std::vector<double> folded(rows_);
      for (std::size_t k = 0; k < rows_; ++k) folded[k] = price_[k] * sign_[k];
      const double tol = 1e-12 * (phase_ == 1 ? 1.0 : cost_scale_);
      std::size_t entering = kNone;
      double best = -tol;
      for (std::size_t j = 0; j < m_; ++j) {
        if (in_basis[j]) continue;
        const double rc = cost(j) - eval_poly(folded, win_.ts[j]);
        if (rc < best) {
          entering = j;
          if (bland_) break;
          best = rc;
        }
      }
      if (entering == kNone) return;

      // Direction u = B^-1 a_q.
      column(entering, col);
      auto u = solve_dense(bmat_, col);
      if (!u) throw NumericalDegeneracy("simplex basis became singular");

      std::size_t leave = kNone;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows_; ++i) {
        const double ui = (*u)[i];
        if (ui <= 1e-11) continue;
        const double q = xb_[i] / ui;
        if (leave == kNone || q < ratio - 1e-14) {
          leave = i;
          ratio = q;
        } else if (q <= ratio + 1e-14) {
          const bool take = bland_ ? basis_[i] < basis_[leave] : ui > (*u)[leave];
          if (take) leave = i;
          ratio = std::min(ratio, q);
        }
      }
      if (leave == kNone) throw NumericalDegeneracy("dual LP unbounded (window data invalid)");

      // Anti-cycling: after repeated degenerate pivots stay on Bland's rule.
      if (ratio <= 1e-14) {
        if (++degenerate_run_ >= 3) bland_ = true;
      } else {
        degenerate_run_ = 0;
      }
      basis_[leave] = entering;
    }
  }

  void drive_out_artificials() {
    std::vector<double> col;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (basis_[i] < m_) continue;
      refresh();
      // Row i of B^-1 A: solve B^T z = e_i, then z . a_j.
      std::vector<double> bt(rows_ * rows_), e(rows_, 0.0);
      for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < rows_; ++c) bt[r * rows_ + c] = bmat_[c * rows_ + r];
      e[i] = 1.0;
      auto z = solve_dense(std::move(bt), std::move(e));
      if (!z) throw NumericalDegeneracy("simplex basis became singular");
      std::size_t pick = kNone;
      double best = 1e-9;
      for (std::size_t j = 0; j < m_; ++j) {
        if (std::find(basis_.begin(), basis_.end(), j) != basis_.end()) continue;
        column(j, col);
        double v = 0.0;
        for (std::size_t k = 0; k < rows_; ++k) v += (*z)[k] * col[k];
        if (std::abs(v) > best) {
          best = std::abs(v);
          pick = j;
        }
      }
      if (pick == kNone) throw NumericalDegeneracy("moment rows are linearly dependent");
      basis_[i] = pick;
    }
  }

  PolyFit extract() {
    refresh();
    PolyFit fit;
    fit.degree = static_cast<int>(rows_) - 1;
    fit.iterations = iterations_;

    std::vector<std::size_t> order(rows_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return basis_[a] < basis_[b]; });
    for (std::size_t i : order) {
      fit.active_set.push_back(basis_[i]);
      fit.multipliers.push_back(xb_[i]);
    }
    bool small = ill_conditioned_;
    auto coeffs = interpolate(win_, fit.active_set, &small);
    if (!coeffs) throw NumericalDegeneracy("active constraints do not determine the polynomial");
    fit.coeffs = std::move(*coeffs);
    fit.ill_conditioned = small;

    double primal = 0.0;
    for (std::size_t k = 0; k < rows_; ++k) primal += sign_[k] * rhs_[k] * fit.coeffs[k];
    double dual = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) dual += fit.multipliers[i] * win_.ys[fit.active_set[i]];
    fit.objective_value = primal;
    fit.dual_objective = dual;
    return fit;
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  const WindowData& win_;
  std::size_t rows_;
  std::size_t m_;
  std::vector<double> sign_;
  std::vector<double> rhs_;
  double cost_scale_ = 1.0;

  int phase_ = 1;
  bool bland_ = false;
  int degenerate_run_ = 0;
  std::size_t iterations_ = 0;
  bool ill_conditioned_ = false;
  std::vector<std::size_t> basis_;
  std::vector<double> bmat_;
  std::vector<double> xb_;
  std::vector<double> price_;
};

}  // namespace detail

// Optimal basic solution of the upper-polynomial LP via its dual.
inline PolyFit solve_upper_polynomial(const WindowData& win, const ObjectiveWeights& obj,
                                      int degree) {
  if (degree < 0) throw DomainError("degree must be non-negative");
  if (obj.degree() != degree) throw DomainError("objective weights do not match the degree");
  validate(win);
  if (win.size() < static_cast<std::size_t>(degree) + 1) throw DegreeTooHigh(win.size(), degree);
  detail::DualSimplex simplex(win, obj);
  return simplex.run();
}

// Enumerates every (d+1)-subset of constraints, keeps the feasible
// interpolants and returns the cheapest one; ties go to the
// lexicographically smallest subset. Verification oracle for the simplex.
inline PolyFit brute_force_solve(const WindowData& win, const ObjectiveWeights& obj, int degree) {
  if (degree < 0) throw DomainError("degree must be non-negative");
  if (obj.degree() != degree) throw DomainError("objective weights do not match the degree");
  validate(win);
  const std::size_t m = win.size();
  const std::size_t r = static_cast<std::size_t>(degree) + 1;
  if (m < r) throw DegreeTooHigh(m, degree);
  if (m > 40) throw DomainError("brute_force_solve: window too large for enumeration (m > 40)");

  std::vector<std::size_t> subset(r);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  std::optional<PolyFit> best;
  while (true) {
    bool small = false;
    if (auto c = detail::interpolate(win, subset, &small)) {
      bool feasible = true;
      for (std::size_t i = 0; i < m && feasible; ++i)
        feasible = eval_poly(*c, win.ts[i]) >= win.ys[i] - 1e-9;
      if (feasible) {
        double value = 0.0;
        for (std::size_t k = 0; k < r; ++k) value += obj.w[k] * (*c)[k];
        if (!best || value < best->objective_value - 1e-12) {
          PolyFit fit;
          fit.degree = degree;
          fit.coeffs = std::move(*c);
          fit.objective_value = value;
          fit.dual_objective = value;
          fit.active_set = subset;
          fit.ill_conditioned = small;
          best = std::move(fit);
        }
      }
    }
    // Next subset in lexicographic order.
    std::size_t pos = r;
    while (pos > 0 && subset[pos - 1] == m - r + (pos - 1)) --pos;
    if (pos == 0) break;
    ++subset[pos - 1];
    for (std::size_t k = pos; k < r; ++k) subset[k] = subset[k - 1] + 1;
  }
  if (!best) throw std::logic_error("brute_force_solve: no feasible vertex");
  return *best;
}

}  // namespace frontier
