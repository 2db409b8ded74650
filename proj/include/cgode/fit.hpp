#pragma once

// Least-squares line fits for slope measurements (convergence orders,
// round-off scaling laws, stability growth rates).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cgode {

struct LineFit {
  double slope = 0;
  double intercept = 0;
};

inline LineFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_linear: need >= 2 matched points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0) throw std::invalid_argument("fit_linear: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// slope of log10 y against log10 x
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0 || y[i] <= 0) throw std::invalid_argument("fit_loglog: positive data required");
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
  }
  return fit_linear(lx, ly);
}

}  // namespace cgode
