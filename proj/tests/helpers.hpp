// Shared oracles for the test suites: finite differences and relative errors.
#pragma once

#include "ganedit/core.hpp"

#include <cmath>
#include <functional>

namespace ganedit::testing {

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

inline double vec_rel_err(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Central finite difference of a scalar function along direction v.
inline double directional_fd(const std::function<double(const Vec&)>& f, const Vec& x,
                             const Vec& v, double h = 1e-5) {
  return (f(x + h * v) - f(x - h * v)) / (2.0 * h);
}

/// Full central-difference gradient of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h = 1e-5) {
  Vec g(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double hi = f(probe);
    probe[i] = saved - h;
    const double lo = f(probe);
    probe[i] = saved;
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

}  // namespace ganedit::testing
