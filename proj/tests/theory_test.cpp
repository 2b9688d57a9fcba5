#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mhe/optimize.hpp"

using namespace mhe;

namespace {

// Monte Carlo cap measure, independent of the quadrature implementation.
double mc_cap_measure(int sphere_dim, double height, int samples,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(sphere_dim + 1);
  int inside = 0;
  for (int k = 0; k < samples; ++k) {
    for (Index r = 0; r < v.size(); ++r) v(r) = gauss(rng);
    if (v(0) / v.norm() >= height) ++inside;
  }
  return static_cast<double>(inside) / samples;
}

}  // namespace

TEST_CASE("cap measure closed forms for the circle and the 2-sphere") {
  CHECK(spherical_cap_measure(2, -1.0) == 1.0);
  CHECK(spherical_cap_measure(2, 1.0) == 0.0);
  for (double t : {-0.9, -0.3, 0.0, 0.4, 0.99})
    CHECK(spherical_cap_measure(2, t) ==
          doctest::Approx(0.5 * (1.0 - t)).epsilon(1e-15));
  for (double t : {-0.8, 0.0, 0.7})
    CHECK(spherical_cap_measure(1, t) ==
          doctest::Approx(std::acos(t) / std::numbers::pi).epsilon(1e-15));
}

TEST_CASE("cap measure quadrature agrees with Monte Carlo in d >= 3") {
  for (int d : {3, 5}) {
    for (double t : {-0.6, 0.0, 0.5}) {
      const double mc = mc_cap_measure(d, t, 400000, 99);
      CHECK(spherical_cap_measure(d, t) == doctest::Approx(mc).epsilon(0.02));
    }
  }
}

TEST_CASE("cap discrepancy separates structured from clustered point sets") {
  // A well-spread optimized configuration versus everything in one cluster.
  OptimizerConfig opt;
  opt.max_iters = 4000;
  opt.snapshot_stride = 0;
  const EnergySpec spec{1.0, Distance::euclidean, Space::full, {}};
  const Trajectory traj = minimize(random_sphere_init(40, 3, 3), spec, opt);

  Matrix cluster(3, 40);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 0.01);
  for (Index i = 0; i < 40; ++i) {
    cluster.col(i) = Vector::Unit(3, 0) +
                     0.01 * Vector::NullaryExpr(3, [&](Index) {
                       return gauss(rng);
                     });
    cluster.col(i).normalize();
  }

  const double d_opt = cap_discrepancy(traj.final_points, 1000, 7);
  const double d_cluster = cap_discrepancy(cluster, 1000, 7);
  CHECK(d_opt < 0.2);
  CHECK(d_cluster > 0.4);
  CHECK(d_opt < d_cluster);

  // Same seed, same statistic.
  CHECK(cap_discrepancy(traj.final_points, 1000, 7) == d_opt);
}

TEST_CASE("growth normalizer covers the three regimes and rejects others") {
  CHECK(growth_normalizer(1.0, 2, 10) == doctest::Approx(100.0));
  CHECK(growth_normalizer(2.0, 2, 10) ==
        doctest::Approx(100.0 * std::log(10.0)));
  CHECK(growth_normalizer(3.0, 2, 10) ==
        doctest::Approx(std::pow(10.0, 2.5)));
  for (double s : {0.0, -1.0}) {
    try {
      growth_normalizer(s, 2, 10);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidRegime);
    }
  }
}

TEST_CASE("uniform pair sampling confirms the s=1, d=2 energy integral") {
  // E[1/||u - v||] over independent uniform points on S^2 equals 1.
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(3), v(3);
  const int samples = 200000;
  double mean = 0.0;
  for (int k = 0; k < samples; ++k) {
    for (Index r = 0; r < 3; ++r) u(r) = gauss(rng);
    for (Index r = 0; r < 3; ++r) v(r) = gauss(rng);
    mean += 1.0 / (u / u.norm() - v / v.norm()).norm();
  }
  mean /= samples;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("asymptotic report at desk scale") {
  OptimizerConfig opt;
  opt.max_iters = 3000;
  opt.grad_tol = 1e-5;
  opt.seed = 7;
  const AsymptoticReport report =
      asymptotic_check(1.0, 2, {8, 16}, 2, opt, 500, 17);
  CHECK(report.regime == "0<s<d");
  REQUIRE(report.min_energies.size() == 2);
  CHECK(std::isfinite(report.min_energies[0]));
  CHECK(std::isfinite(report.min_energies[1]));
  // The N^2-normalized sequence grows toward its limit and stays below 1.
  CHECK(report.normalized_energies[0] < report.normalized_energies[1]);
  CHECK(report.normalized_energies[1] < 1.0);
  CHECK(report.largest_config.cols() == 16);
  CHECK(report.uniformity_stat > 0.0);
  CHECK(report.uniformity_stat < 0.5);

  const AsymptoticReport super =
      asymptotic_check(3.0, 2, {8, 12}, 1, opt, 100, 17);
  CHECK(super.regime == "s>d");

  CHECK_THROWS_AS(asymptotic_check(1.0, 2, {16, 8}, 1, opt), Error);
  CHECK_THROWS_AS(asymptotic_check(-1.0, 2, {8, 16}, 1, opt), Error);
}

TEST_CASE("s > d growth rate stays within a bounded band") {
  // Growth-rate check only; the limiting constant is not computed.
  OptimizerConfig opt;
  opt.max_iters = 8000;
  opt.grad_tol = 1e-5;
  opt.seed = 21;
  const AsymptoticReport report =
      asymptotic_check(3.0, 2, {20, 50, 100}, 1, opt, 100, 17);
  double lo = report.normalized_energies[0], hi = lo;
  for (double r : report.normalized_energies) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo - 1.0 < 0.25);
}
