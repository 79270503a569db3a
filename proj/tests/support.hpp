#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/geometry.hpp"

namespace semgeo::gen {

inline Image random_image(std::mt19937_64& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w, c, 0.0);
  for (double& v : img.data()) v = u(rng);
  return img;
}

inline Mask random_mask(std::mt19937_64& rng, int h, int w, double p_set = 0.8) {
  std::bernoulli_distribution b(p_set);
  Mask m(h, w, 0);
  for (auto& v : m.values()) v = b(rng) ? 1 : 0;
  return m;
}

inline SemanticLabelMap random_labels(std::mt19937_64& rng, int h, int w, int k) {
  std::uniform_int_distribution<int> u(0, k - 1);
  SemanticLabelMap s(h, w, k);
  for (auto& v : s.labels.values()) v = u(rng);
  return s;
}

inline DepthMap random_depth(std::mt19937_64& rng, int h, int w, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  DepthMap d(h, w, 1.0);
  for (auto& v : d.depth.values()) v = u(rng);
  return d;
}

/// Central difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double step) {
  const double keep = x;
  x = keep + step;
  const double fp = f();
  x = keep - step;
  const double fm = f();
  x = keep;
  return (fp - fm) / (2.0 * step);
}

}  // namespace semgeo::gen
