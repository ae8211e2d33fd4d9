#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mvl {

// Central-difference check of an analytic gradient. Returns the max over
// coordinates of |g_fd - g_an| / max(1, |g_fd|, |g_an|).
inline double grad_check(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                         const std::vector<double>& analytic, double eps = 1e-5) {
  if (analytic.size() != x.size()) throw std::invalid_argument("grad_check: gradient length mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double fp = f(x);
    x[i] = saved - eps;
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::runtime_error("grad_check: non-finite objective");
    const double fd = (fp - fm) / (2.0 * eps);
    const double err = std::fabs(fd - analytic[i]) / std::max({1.0, std::fabs(fd), std::fabs(analytic[i])});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mvl
