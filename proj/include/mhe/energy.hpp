#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mhe/error.hpp"

// Hyperspherical energies of point/neuron configurations.
//
// Conventions used throughout:
//   * Neurons are the COLUMNS of a (d+1) x N matrix and may be unnormalized;
//     every energy projects them onto the unit sphere first.
//   * Energies sum over ORDERED pairs i != j, i.e. each unordered pair is
//     counted twice. All normalizations divide by M(M-1) with M the effective
//     point count (2N in half-space mode).
//   * The Riesz kernel is f_s(z) = z^-s for s > 0 and f_0(z) = log(1/z).
//   * Coincident points (pair distance <= kNormEpsilon) make an energy +inf;
//     gradients at such configurations raise NonFiniteEnergy instead.

namespace mhe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kNormEpsilon = 1e-12;  // zero-norm / coincidence floor
inline constexpr double kCosEpsilon = 1e-12;   // acos clamp margin

enum class Distance { euclidean, geodesic };
enum class Space { full, half };
enum class LayerRole { hidden, output };

struct NeuronSet {
  Matrix weights;  // dim_ambient x count, one neuron per column

  Index count() const { return weights.cols(); }
  Index dim_ambient() const { return weights.rows(); }
};

struct EnergySpec {
  double s = 2.0;
  Distance distance = Distance::euclidean;
  Space space = Space::full;
  std::optional<Vector> beta;  // per-neuron positive weights (euclidean only)
};

struct EnergyValue {
  double total = 0.0;           // +inf iff some pair coincides
  std::int64_t pair_count = 0;  // ordered pairs, M(M-1)
  double normalized = 0.0;      // total / pair_count
};

namespace detail {

inline double kernel(double s, double z) {
  return s > 0.0 ? std::pow(z, -s) : -std::log(z);
}

inline double kernel_deriv(double s, double z) {
  return s > 0.0 ? -s * std::pow(z, -s - 1.0) : -1.0 / z;
}

inline double clamp_cosine(double t) {
  return std::clamp(t, -1.0 + kCosEpsilon, 1.0 - kCosEpsilon);
}

// Unit directions of all columns; throws ZeroNormNeuron. Norms are written
// to `norms` when provided.
inline Matrix unit_directions(const Matrix& weights, Vector* norms = nullptr) {
  Matrix unit(weights.rows(), weights.cols());
  if (norms) norms->resize(weights.cols());
  for (Index i = 0; i < weights.cols(); ++i) {
    const double r = weights.col(i).norm();
    if (!(r > kNormEpsilon))
      throw Error(ErrorKind::ZeroNormNeuron, "neuron has (near) zero norm", i);
    unit.col(i) = weights.col(i) / r;
    if (norms) (*norms)(i) = r;
  }
  return unit;
}

}  // namespace detail

/// Role-dependent validity of an energy spec. Half-space energies are a
/// hidden-layer device; weighted points leave the unit sphere, so geodesic
/// distance is undefined for them.
inline void validate_spec(const EnergySpec& spec, LayerRole role) {
  if (!(spec.s >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "energy power s must be >= 0");
  if (spec.space == Space::half && role == LayerRole::output)
    throw Error(ErrorKind::HalfSpaceOnOutput,
                "half-space energy cannot be applied to an output layer");
  if (spec.beta) {
    if (spec.distance == Distance::geodesic)
      throw Error(ErrorKind::GeodesicWithBeta,
                  "geodesic distance is undefined for beta-scaled points");
    for (Index i = 0; i < spec.beta->size(); ++i)
      if (!((*spec.beta)(i) > 0.0))
        throw Error(ErrorKind::InvalidArgument, "beta entries must be > 0", i);
  }
}

/// Projects every neuron onto the unit sphere.
inline NeuronSet normalize(const NeuronSet& neurons) {
  return NeuronSet{detail::unit_directions(neurons.weights)};
}

/// Appends the negation of every neuron: [w_1..w_N, -w_1..-w_N].
inline NeuronSet half_space_expand(const NeuronSet& neurons) {
  Matrix out(neurons.dim_ambient(), 2 * neurons.count());
  out.leftCols(neurons.count()) = neurons.weights;
  out.rightCols(neurons.count()) = -neurons.weights;
  return NeuronSet{std::move(out)};
}

namespace detail {

inline void validate_energy_inputs(const NeuronSet& neurons,
                                   const EnergySpec& spec) {
  validate_spec(spec, LayerRole::hidden);
  if (neurons.count() < 2)
    throw Error(ErrorKind::InvalidArgument,
                "energy requires at least 2 neurons");
  if (neurons.dim_ambient() < 2)
    throw Error(ErrorKind::InvalidArgument, "ambient dimension must be >= 2");
  if (spec.beta && spec.beta->size() != neurons.count())
    throw Error(ErrorKind::InvalidArgument,
                "beta length must equal the neuron count");
}

// Point matrix the pair sum runs over: unit directions, beta-scaled when
// weights are given, negations appended in half-space mode.
inline Matrix energy_points(const NeuronSet& neurons, const EnergySpec& spec,
                            Vector* norms = nullptr, Matrix* units = nullptr) {
  Matrix u = unit_directions(neurons.weights, norms);
  if (units) *units = u;
  Matrix p = spec.beta ? Matrix(u * spec.beta->asDiagonal()) : std::move(u);
  if (spec.space == Space::half) {
    Matrix q(p.rows(), 2 * p.cols());
    q.leftCols(p.cols()) = p;
    q.rightCols(p.cols()) = -p;
    return q;
  }
  return p;
}

}  // namespace detail

/// Total s-energy of a configuration under the given spec.
inline EnergyValue energy(const NeuronSet& neurons, const EnergySpec& spec) {
  detail::validate_energy_inputs(neurons, spec);
  const Matrix q = detail::energy_points(neurons, spec);
  const Index m = q.cols();

  EnergyValue value;
  value.pair_count = static_cast<std::int64_t>(m) * (m - 1);

  double total = 0.0;
  for (Index k = 0; k < m && std::isfinite(total); ++k) {
    for (Index l = k + 1; l < m; ++l) {
      const double chord = (q.col(k) - q.col(l)).norm();
      if (chord <= kNormEpsilon) {
        total = std::numeric_limits<double>::infinity();
        break;
      }
      const double z = spec.distance == Distance::euclidean
                           ? chord
                           : std::acos(detail::clamp_cosine(
                                 q.col(k).dot(q.col(l))));
      total += 2.0 * detail::kernel(spec.s, z);
    }
  }
  value.total = total;
  value.normalized = total / static_cast<double>(value.pair_count);
  return value;
}

/// Gradient of energy() with respect to the UNNORMALIZED weights.
/// Differentiates through the normalization map, the beta scaling, and the
/// virtual-neuron negation; the result is tangent to each neuron direction.
inline Matrix energy_gradient(const NeuronSet& neurons,
                              const EnergySpec& spec) {
  detail::validate_energy_inputs(neurons, spec);
  const Index n = neurons.count();
  const Index dim = neurons.dim_ambient();

  Vector norms;
  Matrix units;
  const Matrix q = detail::energy_points(neurons, spec, &norms, &units);
  const Index m = q.cols();
  const bool half = spec.space == Space::half;

  Matrix gq = Matrix::Zero(dim, m);
  for (Index k = 0; k < m; ++k) {
    for (Index l = k + 1; l < m; ++l) {
      const Vector diff = q.col(k) - q.col(l);
      const double chord = diff.norm();
      if (chord <= kNormEpsilon)
        throw Error(ErrorKind::NonFiniteEnergy,
                    "coincident pair makes the energy gradient undefined");
      if (spec.distance == Distance::euclidean) {
        const double w = 2.0 * detail::kernel_deriv(spec.s, chord) / chord;
        gq.col(k) += w * diff;
        gq.col(l) -= w * diff;
      } else {
        const double t = q.col(k).dot(q.col(l));
        // Flat where the acos clamp is active (e.g. a neuron against its own
        // virtual negation, whose angle is pinned at pi).
        if (t <= -1.0 + kCosEpsilon || t >= 1.0 - kCosEpsilon) continue;
        const double theta = std::acos(t);
        const double c = -2.0 * detail::kernel_deriv(spec.s, theta) /
                         std::sqrt(1.0 - t * t);
        gq.col(k) += c * q.col(l);
        gq.col(l) += c * q.col(k);
      }
    }
  }

  Matrix gp = half ? Matrix(gq.leftCols(n) - gq.rightCols(n)) : std::move(gq);

  Matrix grad(dim, n);
  for (Index i = 0; i < n; ++i) {
    const double scale =
        (spec.beta ? (*spec.beta)(i) : 1.0) / norms(i);
    const Vector u = units.col(i);
    grad.col(i) = scale * (gp.col(i) - u * u.dot(gp.col(i)));
  }
  return grad;
}

namespace detail {

inline void validate_batch(const NeuronSet& neurons,
                           std::span<const Index> batch) {
  if (batch.size() < 2)
    throw Error(ErrorKind::BatchTooSmall,
                "a neuron batch needs at least 2 members, got " +
                    std::to_string(batch.size()));
  std::vector<bool> seen(static_cast<std::size_t>(neurons.count()), false);
  for (Index idx : batch) {
    if (idx < 0 || idx >= neurons.count())
      throw Error(ErrorKind::InvalidArgument, "batch index out of range", idx);
    if (seen[static_cast<std::size_t>(idx)])
      throw Error(ErrorKind::InvalidArgument, "duplicate batch index", idx);
    seen[static_cast<std::size_t>(idx)] = true;
  }
}

inline NeuronSet subset(const NeuronSet& neurons,
                        std::span<const Index> batch) {
  Matrix w(neurons.dim_ambient(), static_cast<Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    w.col(static_cast<Index>(i)) = neurons.weights.col(batch[i]);
  return NeuronSet{std::move(w)};
}

inline EnergySpec subset_spec(const EnergySpec& spec,
                              std::span<const Index> batch) {
  EnergySpec sub = spec;
  if (spec.beta) {
    Vector b(static_cast<Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i)
      b(static_cast<Index>(i)) = (*spec.beta)(batch[i]);
    sub.beta = std::move(b);
  }
  return sub;
}

}  // namespace detail

/// Draws `batch_size` distinct neuron indices uniformly without replacement.
inline std::vector<Index> sample_neuron_batch(Index count, Index batch_size,
                                              std::mt19937_64& rng) {
  if (batch_size < 2 || batch_size > count)
    throw Error(ErrorKind::BatchTooSmall,
                "batch size must be in [2, count]");
  std::vector<Index> pool(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<Index> pick(i, count - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(batch_size));
  return pool;
}

/// Energy of the sub-configuration selected by `batch`.
inline EnergyValue minibatch_energy(const NeuronSet& neurons,
                                    const EnergySpec& spec,
                                    std::span<const Index> batch) {
  detail::validate_batch(neurons, batch);
  return energy(detail::subset(neurons, batch),
                detail::subset_spec(spec, batch));
}

/// Gradient of minibatch_energy() scattered into the full weight shape
/// (neurons outside the batch receive zero). Averaged over uniform batches
/// this is a positive multiple of the full gradient.
inline Matrix minibatch_energy_gradient(const NeuronSet& neurons,
                                        const EnergySpec& spec,
                                        std::span<const Index> batch) {
  detail::validate_batch(neurons, batch);
  const Matrix sub_grad = energy_gradient(detail::subset(neurons, batch),
                                          detail::subset_spec(spec, batch));
  Matrix grad = Matrix::Zero(neurons.dim_ambient(), neurons.count());
  for (std::size_t i = 0; i < batch.size(); ++i)
    grad.col(batch[i]) = sub_grad.col(static_cast<Index>(i));
  return grad;
}

namespace detail {

inline void validate_labels(const NeuronSet& classifier,
                            std::span<const int> labels) {
  if (classifier.count() < 2)
    throw Error(ErrorKind::InvalidArgument,
                "data-dependent energy requires at least 2 classifier neurons");
  if (labels.empty())
    throw Error(ErrorKind::InvalidArgument, "label batch must be non-empty");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= classifier.count())
      throw Error(ErrorKind::LabelOutOfRange,
                  "label " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(classifier.count()) + ")",
                  static_cast<std::ptrdiff_t>(i));
}

}  // namespace detail

/// Data-dependent output-layer energy:
///   1/(m(N-1)) * sum_i sum_{j != y_i} f_s(||u_{y_i} - u_j||)
/// over the batch labels y. Full-space, euclidean.
inline double output_minibatch_energy(const NeuronSet& classifier,
                                      std::span<const int> labels, double s) {
  detail::validate_labels(classifier, labels);
  if (!(s >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "energy power s must be >= 0");
  const Matrix u = detail::unit_directions(classifier.weights);
  const Index n = classifier.count();

  double total = 0.0;
  for (int label : labels) {
    for (Index j = 0; j < n; ++j) {
      if (j == label) continue;
      const double dist = (u.col(label) - u.col(j)).norm();
      if (dist <= kNormEpsilon)
        return std::numeric_limits<double>::infinity();
      total += detail::kernel(s, dist);
    }
  }
  return total / (static_cast<double>(labels.size()) *
                  static_cast<double>(n - 1));
}

/// Gradient of output_minibatch_energy() w.r.t. the unnormalized classifier
/// weights.
inline Matrix output_minibatch_energy_gradient(const NeuronSet& classifier,
                                               std::span<const int> labels,
                                               double s) {
  detail::validate_labels(classifier, labels);
  if (!(s >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "energy power s must be >= 0");
  Vector norms;
  const Matrix u = detail::unit_directions(classifier.weights, &norms);
  const Index n = classifier.count();

  Matrix gu = Matrix::Zero(classifier.dim_ambient(), n);
  for (int label : labels) {
    for (Index j = 0; j < n; ++j) {
      if (j == label) continue;
      const Vector diff = u.col(label) - u.col(j);
      const double dist = diff.norm();
      if (dist <= kNormEpsilon)
        throw Error(ErrorKind::NonFiniteEnergy,
                    "coincident classifier neurons");
      const double w = detail::kernel_deriv(s, dist) / dist;
      gu.col(label) += w * diff;
      gu.col(j) -= w * diff;
    }
  }

  const double scale = 1.0 / (static_cast<double>(labels.size()) *
                              static_cast<double>(n - 1));
  Matrix grad(classifier.dim_ambient(), n);
  for (Index i = 0; i < n; ++i) {
    const Vector ui = u.col(i);
    grad.col(i) = (scale / norms(i)) * (gu.col(i) - ui * ui.dot(gu.col(i)));
  }
  return grad;
}

/// Squared Frobenius penalty ||W^T W - I||_F^2 (columns are neurons).
inline double orthonormal_penalty(const Matrix& weights) {
  if (weights.cols() < 1)
    throw Error(ErrorKind::InvalidArgument, "empty weight matrix");
  Matrix gram = weights.transpose() * weights;
  gram.diagonal().array() -= 1.0;
  return gram.squaredNorm();
}

/// Gradient of orthonormal_penalty(): 4 W (W^T W - I).
inline Matrix orthonormal_penalty_gradient(const Matrix& weights) {
  if (weights.cols() < 1)
    throw Error(ErrorKind::InvalidArgument, "empty weight matrix");
  Matrix gram = weights.transpose() * weights;
  gram.diagonal().array() -= 1.0;
  return 4.0 * weights * gram;
}

/// Pairwise chordal (euclidean) distances of unit points.
inline Matrix pairwise_chordal(const Matrix& unit_points) {
  const Index n = unit_points.cols();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d(i, j) = d(j, i) = (unit_points.col(i) - unit_points.col(j)).norm();
  return d;
}

/// Pairwise geodesic angles acos(u_i . u_j) of unit points.
inline Matrix pairwise_geodesic(const Matrix& unit_points) {
  const Index n = unit_points.cols();
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      a(i, j) = a(j, i) = std::acos(
          detail::clamp_cosine(unit_points.col(i).dot(unit_points.col(j))));
  return a;
}

}  // namespace mhe
