#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace pac2 {

// Central finite differences with step h on each coordinate.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x,
    double h = 1e-5) {
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Worst relative mismatch between an analytic gradient and finite differences.
// Relative error uses max(1, |a|, |b|) as scale.
inline double gradient_check(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x, std::span<const double> analytic,
                             double h = 1e-5) {
  const std::vector<double> fd = finite_difference_gradient(f, x, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double scale = std::max({1.0, std::abs(fd[i]), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(fd[i] - analytic[i]) / scale);
  }
  return worst;
}

}  // namespace pac2
