#pragma once

// Shared generators for the test suites.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "frontier/model.hpp"
#include "frontier/polyopt.hpp"

namespace testing_support {

// A window as produced by a fixed equidistant design: m consecutive design
// points inside [x - h, x + h], standardized to [-1, 1], with responses from
// a random quadratic trend plus one-sided noise.
inline frontier::WindowData random_window(frontier::CounterRng& rng, int degree, int max_m,
                                          bool power_tail) {
  const int lo = std::max(degree + 1, 2 * degree);
  const int m = lo + static_cast<int>(rng() % static_cast<unsigned>(max_m - lo + 1));
  const double half = 0.5 * m;
  const double offset = rng.uniform();
  const double a = rng.uniform() - 0.5, b = rng.uniform() - 0.5, c = rng.uniform() - 0.5;
  frontier::ErrorLaw law = power_tail ? frontier::ErrorLaw{frontier::PowerTail{0.5 + 1.5 * rng.uniform()}}
                                      : frontier::ErrorLaw{frontier::MirroredExp{1.0 + 4.0 * rng.uniform()}};
  frontier::WindowData win;
  for (int j = 0; j < m; ++j) {
    const double t = (-half + offset + j) / half;
    win.ts.push_back(t);
    win.ys.push_back(a + b * t + c * t * t + frontier::quantile(law, rng.uniform()));
  }
  return win;
}

}  // namespace testing_support
