#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "mhe/energy.hpp"

using namespace mhe;

TEST_CASE("analytic gradients match central differences for every variant") {
  // s x distance x space grid, plus the weighted euclidean variants.
  const double s_values[] = {0.0, 1.0, 2.0};
  const Distance distances[] = {Distance::euclidean, Distance::geodesic};
  const Space spaces[] = {Space::full, Space::half};
  const Index dims[] = {3, 4, 8};

  std::uint64_t seed = 1000;
  for (Index dim : dims) {
    const NeuronSet config = testutil::random_unnormalized(6, dim, seed++);
    for (double s : s_values) {
      for (Distance distance : distances) {
        for (Space space : spaces) {
          CAPTURE(dim);
          CAPTURE(s);
          CAPTURE(static_cast<int>(distance));
          CAPTURE(static_cast<int>(space));
          const EnergySpec spec{s, distance, space, {}};
          const Matrix analytic = energy_gradient(config, spec);
          const Matrix numeric = testutil::fd_gradient(
              [&spec](const Matrix& w) {
                return energy(NeuronSet{w}, spec).total;
              },
              config.weights);
          CHECK(testutil::rel_error(analytic, numeric) < 1e-5);

          if (distance == Distance::euclidean) {
            EnergySpec weighted = spec;
            weighted.beta = testutil::random_beta(6, seed);
            const Matrix analytic_w = energy_gradient(config, weighted);
            const Matrix numeric_w = testutil::fd_gradient(
                [&weighted](const Matrix& w) {
                  return energy(NeuronSet{w}, weighted).total;
                },
                config.weights);
            CHECK(testutil::rel_error(analytic_w, numeric_w) < 1e-5);
          }
        }
      }
    }
  }
}

TEST_CASE("gradients are tangent to each neuron direction") {
  const NeuronSet config = testutil::random_unnormalized(6, 4, 55);
  const EnergySpec specs[] = {
      {2.0, Distance::euclidean, Space::full, {}},
      {1.0, Distance::geodesic, Space::half, {}},
      {0.0, Distance::euclidean, Space::half, {}},
      {2.0, Distance::euclidean, Space::full, testutil::random_beta(6, 56)},
  };
  for (const EnergySpec& spec : specs) {
    const Matrix grad = energy_gradient(config, spec);
    for (Index i = 0; i < config.count(); ++i) {
      const double inner =
          std::abs(grad.col(i).dot(config.weights.col(i)));
      CHECK(inner <=
            1e-9 * grad.col(i).norm() * config.weights.col(i).norm() + 1e-300);
    }
  }
}

TEST_CASE("antipodal pair is a stationary point for any kernel") {
  NeuronSet pair{Matrix(3, 2)};
  pair.weights << 1, -1, 0, 0, 0, 0;
  for (double s : {0.0, 1.0, 2.0, 3.0}) {
    const EnergySpec spec{s, Distance::euclidean, Space::full, {}};
    const Matrix grad = energy_gradient(pair, spec);
    CHECK(grad.col(0).norm() < 1e-10);
    CHECK(grad.col(1).norm() < 1e-10);
  }
}

TEST_CASE("gradient refuses coincident configurations") {
  NeuronSet coincident{Matrix(3, 3)};
  coincident.weights << 1, 1, 0, 0, 0, 1, 0, 0, 0;
  const EnergySpec spec{2.0, Distance::euclidean, Space::full, {}};
  try {
    energy_gradient(coincident, spec);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteEnergy);
  }
}

TEST_CASE("minibatch gradient scatters into the full shape") {
  const NeuronSet config = testutil::random_unnormalized(6, 4, 77);
  const EnergySpec spec{2.0, Distance::euclidean, Space::full, {}};

  std::vector<Index> all{0, 1, 2, 3, 4, 5};
  CHECK(testutil::rel_error(minibatch_energy_gradient(config, spec, all),
                            energy_gradient(config, spec)) < 1e-14);

  std::vector<Index> batch{2, 0, 5};
  const Matrix g = minibatch_energy_gradient(config, spec, batch);
  CHECK(g.col(1).norm() == 0.0);
  CHECK(g.col(3).norm() == 0.0);
  CHECK(g.col(4).norm() == 0.0);
  CHECK(g.col(0).norm() > 0.0);
}

TEST_CASE("data-dependent output energy gradient matches finite differences") {
  const NeuronSet classifier = testutil::random_unnormalized(5, 3, 91);
  const std::vector<int> labels{0, 2, 2, 4, 1, 0};
  for (double s : {0.0, 1.0, 2.0}) {
    const Matrix analytic =
        output_minibatch_energy_gradient(classifier, labels, s);
    const Matrix numeric = testutil::fd_gradient(
        [&labels, s](const Matrix& w) {
          return output_minibatch_energy(NeuronSet{w}, labels, s);
        },
        classifier.weights);
    CHECK(testutil::rel_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("orthonormal penalty gradient matches finite differences") {
  const NeuronSet config = testutil::random_unnormalized(6, 4, 123);
  const Matrix analytic = orthonormal_penalty_gradient(config.weights);
  const Matrix numeric = testutil::fd_gradient(
      [](const Matrix& w) { return orthonormal_penalty(w); }, config.weights);
  CHECK(testutil::rel_error(analytic, numeric) < 1e-5);
}
