#pragma once

#include "folcoil/field.hpp"

#include <random>

namespace folcoil {

using Rng = std::mt19937_64;

/// Sum of `terms` random low-mode cosines with |k_a| <= max_mode per axis,
/// scaled so that sup|f| <= amplitude.
inline ScalarField random_smooth_field(const PeriodicGrid& g, Rng& rng, int max_mode = 3,
                                       double amplitude = 1.0, int terms = 6) {
  std::uniform_int_distribution<int> mode(-max_mode, max_mode);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<std::vector<int>> ks(terms, std::vector<int>(g.dim()));
  std::vector<double> amp(terms), ph(terms);
  double total = 0;
  for (int t = 0; t < terms; ++t) {
    for (auto& k : ks[t]) k = mode(rng);
    amp[t] = unit(rng);
    ph[t] = phase(rng);
    total += std::abs(amp[t]);
  }
  const double s = total > 0 ? amplitude / total : 0.0;
  return ScalarField::from_function(g, [&](const Eigen::VectorXd& x) {
    double v = 0;
    for (int t = 0; t < terms; ++t) {
      double arg = ph[t];
      for (int a = 0; a < g.dim(); ++a) arg += ks[t][a] * x[a];
      v += s * amp[t] * std::cos(arg);
    }
    return v;
  });
}

/// base + random low-mode perturbation of relative size `rel`. Small rel keeps
/// log f resolved, which the closedness of mu needs at spectral accuracy.
inline ScalarField random_positive_field(const PeriodicGrid& g, Rng& rng, double base = 1.5, int max_mode = 1,
                                         double rel = 0.2) {
  return random_smooth_field(g, rng, max_mode, rel * base) + base;
}

}  // namespace folcoil
