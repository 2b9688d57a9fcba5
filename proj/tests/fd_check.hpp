#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "mhe/energy.hpp"

// Central-difference oracles for gradient checks. These stay deliberately
// independent of the analytic gradient paths they verify.

namespace testutil {

template <class F>
mhe::Matrix fd_gradient(F&& f, const mhe::Matrix& x, double h = 1e-5) {
  mhe::Matrix g(x.rows(), x.cols());
  mhe::Matrix probe = x;
  for (mhe::Index c = 0; c < x.cols(); ++c) {
    for (mhe::Index r = 0; r < x.rows(); ++r) {
      probe(r, c) = x(r, c) + h;
      const double fp = f(probe);
      probe(r, c) = x(r, c) - h;
      const double fm = f(probe);
      probe(r, c) = x(r, c);
      g(r, c) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

inline double rel_error(const mhe::Matrix& got, const mhe::Matrix& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

// Random configuration with unnormalized column lengths in [0.5, 2], so the
// gradient's normalization chain is exercised with r != 1.
inline mhe::NeuronSet random_unnormalized(mhe::Index n, mhe::Index dim,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  mhe::Matrix w(dim, n);
  for (mhe::Index i = 0; i < n; ++i) {
    do {
      for (mhe::Index r = 0; r < dim; ++r) w(r, i) = gauss(rng);
    } while (w.col(i).norm() <= 1e-6);
    w.col(i) *= scale(rng) / w.col(i).norm();
  }
  return mhe::NeuronSet{std::move(w)};
}

inline mhe::Vector random_beta(mhe::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  mhe::Vector beta(n);
  for (mhe::Index i = 0; i < n; ++i) beta(i) = u(rng);
  return beta;
}

// Random orthogonal matrix via QR of a Gaussian matrix.
inline mhe::Matrix random_rotation(mhe::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  mhe::Matrix a(dim, dim);
  for (mhe::Index c = 0; c < dim; ++c)
    for (mhe::Index r = 0; r < dim; ++r) a(r, c) = gauss(rng);
  Eigen::HouseholderQR<mhe::Matrix> qr(a);
  mhe::Matrix q = qr.householderQ();
  return q;
}

}  // namespace testutil
