#pragma once

#include <random>
#include <vector>

#include "bscch/elliptic.hpp"

namespace testing_helpers {

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

inline bscch::Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  bscch::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

/// Removes the components along the kernel directions so that every constraint vanishes.
inline bscch::Vector make_mean_free(const bscch::FormsBundle& f, bscch::Vector x, bscch::MeanMode mode, double w) {
  const auto V = f.nv(), B = f.nb();
  if (mode == bscch::MeanMode::combined) {
    bscch::Vector d(V + B);
    d << bscch::Vector::Constant(V, w), bscch::Vector::Ones(B);
    const bscch::Vector c = bscch::mean_functionals(f, mode, w)[0];
    x -= (c.dot(x) / c.dot(d)) * d;
  } else {
    x.head(V).array() -= f.lumped_bulk.dot(x.head(V)) / f.area;
    x.tail(B).array() -= f.lumped_surf.dot(x.tail(B)) / f.perimeter;
  }
  return x;
}

}  // namespace testing_helpers
