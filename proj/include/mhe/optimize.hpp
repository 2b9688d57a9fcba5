#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mhe/energy.hpp"

// Projected gradient descent over point configurations on the unit sphere,
// plus the desk-scale experiments built on it: regularizer comparison,
// weighted-energy displacement, and the asymptotic checks for the minimal
// s-energy (growth rate and cap-discrepancy uniformity).

namespace mhe {

struct OptimizerConfig {
  double step_size = 0.1;
  int max_iters = 20000;
  double grad_tol = 1e-8;    // stop when max per-neuron gradient norm is below
  double step_decay = 0.5;   // applied on rejected steps
  std::uint64_t seed = 0;
  int snapshot_stride = 1;   // record every k-th accepted step; 0 = ends only
};

struct TrajectoryPoint {
  int iteration = 0;  // attempted-step index
  double energy = 0.0;
  Matrix points;      // unit columns
};

struct Trajectory {
  std::vector<TrajectoryPoint> iterates;
  bool converged = false;
  double final_grad_norm = 0.0;
  double final_energy = 0.0;
  Matrix final_points;
  int accepted_steps = 0;
  int attempted_steps = 0;
  std::vector<double> angular_path;  // cumulative geodesic motion per neuron
};

namespace detail {

inline constexpr double kCoincidenceFloor = 1e-9;  // step-rejection distance
inline constexpr double kMinStepSize = 1e-18;

inline void validate_optimizer(const OptimizerConfig& opt) {
  if (!(opt.step_size > 0.0))
    throw Error(ErrorKind::InvalidArgument, "step_size must be > 0");
  if (opt.max_iters < 1)
    throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  if (!(opt.grad_tol > 0.0))
    throw Error(ErrorKind::InvalidArgument, "grad_tol must be > 0");
  if (!(opt.step_decay > 0.0) || opt.step_decay > 1.0)
    throw Error(ErrorKind::InvalidArgument, "step_decay must be in (0, 1]");
  if (opt.snapshot_stride < 0)
    throw Error(ErrorKind::InvalidArgument, "snapshot_stride must be >= 0");
}

inline double min_pair_chord(const Matrix& points) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < points.cols(); ++i)
    for (Index j = i + 1; j < points.cols(); ++j)
      best = std::min(best, (points.col(i) - points.col(j)).norm());
  return best;
}

inline double max_column_norm(const Matrix& m) {
  double best = 0.0;
  for (Index i = 0; i < m.cols(); ++i)
    best = std::max(best, m.col(i).norm());
  return best;
}

// Monotone projected descent: step in ambient space, renormalize each column,
// accept only on strict objective decrease, decay the step size otherwise.
template <class ObjectiveFn, class GradientFn>
Trajectory project_descent(Matrix w, ObjectiveFn&& objective,
                           GradientFn&& gradient, const OptimizerConfig& opt) {
  validate_optimizer(opt);
  w = unit_directions(w);
  const Index n = w.cols();

  Trajectory traj;
  traj.angular_path.assign(static_cast<std::size_t>(n), 0.0);

  double value = objective(w);
  if (!std::isfinite(value))
    throw Error(ErrorKind::NonFiniteEnergy,
                "objective is not finite at the initial configuration");
  traj.iterates.push_back({0, value, w});

  Matrix grad = gradient(w);
  double grad_norm = max_column_norm(grad);
  double eta = opt.step_size;

  int iter = 0;
  while (iter < opt.max_iters && !(grad_norm < opt.grad_tol) &&
         eta > kMinStepSize) {
    ++iter;
    Matrix trial = unit_directions(w - eta * grad);
    bool accepted = false;
    double trial_value = std::numeric_limits<double>::infinity();
    if (min_pair_chord(trial) >= kCoincidenceFloor) {
      trial_value = objective(trial);
      accepted = trial_value < value;
    }
    if (accepted) {
      for (Index i = 0; i < n; ++i)
        traj.angular_path[static_cast<std::size_t>(i)] +=
            std::acos(clamp_cosine(w.col(i).dot(trial.col(i))));
      w = std::move(trial);
      value = trial_value;
      ++traj.accepted_steps;
      if (opt.snapshot_stride > 0 &&
          traj.accepted_steps % opt.snapshot_stride == 0)
        traj.iterates.push_back({iter, value, w});
      grad = gradient(w);
      grad_norm = max_column_norm(grad);
    } else {
      eta *= opt.step_decay;
    }
  }

  traj.attempted_steps = iter;
  traj.converged = grad_norm < opt.grad_tol;
  traj.final_grad_norm = grad_norm;
  traj.final_energy = value;
  traj.final_points = w;
  if (traj.iterates.back().iteration != iter)
    traj.iterates.push_back({iter, value, w});
  return traj;
}

}  // namespace detail

/// n points uniform on S^(dim_ambient-1): normalized iid Gaussian vectors.
inline NeuronSet random_sphere_init(Index n, Index dim_ambient,
                                    std::uint64_t seed) {
  if (n < 2 || dim_ambient < 2)
    throw Error(ErrorKind::InvalidArgument,
                "need n >= 2 points and ambient dimension >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix w(dim_ambient, n);
  for (Index i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      for (Index r = 0; r < dim_ambient; ++r) w(r, i) = gauss(rng);
      norm = w.col(i).norm();
    } while (norm <= 1e-6);
    w.col(i) /= norm;
  }
  return NeuronSet{std::move(w)};
}

/// Minimizes energy(., spec) by monotone projected gradient descent.
inline Trajectory minimize(const NeuronSet& init, const EnergySpec& spec,
                           const OptimizerConfig& opt) {
  validate_spec(spec, LayerRole::hidden);
  return detail::project_descent(
      init.weights,
      [&spec](const Matrix& w) { return energy(NeuronSet{w}, spec).total; },
      [&spec](const Matrix& w) { return energy_gradient(NeuronSet{w}, spec); },
      opt);
}

/// Smallest geodesic angle between any two points.
inline double min_pairwise_angle(const Matrix& unit_points) {
  double best = std::numbers::pi;
  for (Index i = 0; i < unit_points.cols(); ++i)
    for (Index j = i + 1; j < unit_points.cols(); ++j)
      best = std::min(best, std::acos(detail::clamp_cosine(
                                unit_points.col(i).dot(unit_points.col(j)))));
  return best;
}

/// Smallest angle within the expanded set {u_i, -u_i}: per pair the sharper
/// of theta and pi - theta.
inline double min_pairwise_angle_halfspace(const Matrix& unit_points) {
  double best = std::numbers::pi;
  for (Index i = 0; i < unit_points.cols(); ++i)
    for (Index j = i + 1; j < unit_points.cols(); ++j) {
      const double theta = std::acos(detail::clamp_cosine(
          unit_points.col(i).dot(unit_points.col(j))));
      best = std::min({best, theta, std::numbers::pi - theta});
    }
  return best;
}

struct RegularizerRun {
  std::uint64_t seed = 0;
  // Full-set minimum pairwise geodesic angle of each final configuration.
  double min_angle_mhe = 0.0;
  double min_angle_half = 0.0;
  double min_angle_ortho = 0.0;
  // Same measurement on the expanded sets {u, -u}.
  double half_set_angle_mhe = 0.0;
  double half_set_angle_half = 0.0;
  double half_set_angle_ortho = 0.0;
  double final_energy_mhe = 0.0;
  double final_energy_half = 0.0;
  double final_penalty_ortho = 0.0;
};

struct RegularizerComparison {
  Index n = 0;
  Index dim_ambient = 0;
  double s = 2.0;
  bool precondition_warning = false;  // set when n <= dim_ambient
  std::vector<RegularizerRun> runs;
  double median_min_angle_mhe = 0.0;
  double median_min_angle_half = 0.0;
  double median_min_angle_ortho = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(),
                   v.begin() + static_cast<std::ptrdiff_t>(mid - 1), v.end());
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace detail

/// Runs full-space s-energy, half-space s-energy, and orthonormal-penalty
/// descent from identical random initializations, one run per seed.
inline RegularizerComparison compare_regularizers(
    Index n, Index dim_ambient, const std::vector<std::uint64_t>& seeds,
    double s = 2.0, OptimizerConfig opt = {}) {
  if (seeds.empty())
    throw Error(ErrorKind::InvalidArgument, "need at least one seed");
  RegularizerComparison report;
  report.n = n;
  report.dim_ambient = dim_ambient;
  report.s = s;
  report.precondition_warning = n <= dim_ambient;

  const EnergySpec full_spec{s, Distance::euclidean, Space::full, {}};
  const EnergySpec half_spec{s, Distance::euclidean, Space::half, {}};
  opt.snapshot_stride = 0;

  std::vector<double> mhe_angles, half_angles, ortho_angles;
  for (std::uint64_t seed : seeds) {
    const NeuronSet init = random_sphere_init(n, dim_ambient, seed);
    const Trajectory t_full = minimize(init, full_spec, opt);
    const Trajectory t_half = minimize(init, half_spec, opt);
    const Trajectory t_ortho = detail::project_descent(
        init.weights,
        [](const Matrix& w) { return orthonormal_penalty(w); },
        [](const Matrix& w) { return orthonormal_penalty_gradient(w); }, opt);

    RegularizerRun run;
    run.seed = seed;
    run.min_angle_mhe = min_pairwise_angle(t_full.final_points);
    run.min_angle_half = min_pairwise_angle(t_half.final_points);
    run.min_angle_ortho = min_pairwise_angle(t_ortho.final_points);
    run.half_set_angle_mhe = min_pairwise_angle_halfspace(t_full.final_points);
    run.half_set_angle_half =
        min_pairwise_angle_halfspace(t_half.final_points);
    run.half_set_angle_ortho =
        min_pairwise_angle_halfspace(t_ortho.final_points);
    run.final_energy_mhe = t_full.final_energy;
    run.final_energy_half = t_half.final_energy;
    run.final_penalty_ortho = t_ortho.final_energy;
    report.runs.push_back(run);

    mhe_angles.push_back(run.min_angle_mhe);
    half_angles.push_back(run.min_angle_half);
    ortho_angles.push_back(run.min_angle_ortho);
  }
  report.median_min_angle_mhe = detail::median(std::move(mhe_angles));
  report.median_min_angle_half = detail::median(std::move(half_angles));
  report.median_min_angle_ortho = detail::median(std::move(ortho_angles));
  return report;
}

struct WeightedDisplacementResult {
  Vector beta;
  std::vector<double> displacement;  // total angular path length per neuron
  Trajectory trajectory;
};

/// Minimizes the weighted (beta-scaled) euclidean energy from a seeded
/// random start and reports how far each neuron travelled.
inline WeightedDisplacementResult weighted_displacement_experiment(
    Index n, Index dim_ambient, const Vector& beta, std::uint64_t seed,
    double s = 2.0, OptimizerConfig opt = {}) {
  if (beta.size() != n)
    throw Error(ErrorKind::InvalidArgument, "beta length must equal n");
  EnergySpec spec{s, Distance::euclidean, Space::full, beta};
  const NeuronSet init = random_sphere_init(n, dim_ambient, seed);
  WeightedDisplacementResult result;
  result.beta = beta;
  result.trajectory = minimize(init, spec, opt);
  result.displacement = result.trajectory.angular_path;
  return result;
}

struct MinimumEnergyResult {
  double energy = std::numeric_limits<double>::infinity();
  Matrix config;  // best final configuration, unit columns
  int best_restart = -1;
  std::vector<double> restart_energies;
};

/// Best final energy over seeded restarts of minimize(); an upper bound on
/// the minimal s-energy of n points on S^sphere_dim.
inline MinimumEnergyResult empirical_minimum_energy(Index n, Index sphere_dim,
                                                    double s, int restarts,
                                                    OptimizerConfig opt = {}) {
  if (restarts < 1)
    throw Error(ErrorKind::InvalidArgument, "restarts must be >= 1");
  const EnergySpec spec{s, Distance::euclidean, Space::full, {}};
  opt.snapshot_stride = 0;
  MinimumEnergyResult result;
  for (int r = 0; r < restarts; ++r) {
    const NeuronSet init = random_sphere_init(
        n, sphere_dim + 1, opt.seed + static_cast<std::uint64_t>(r));
    const Trajectory traj = minimize(init, spec, opt);
    result.restart_energies.push_back(traj.final_energy);
    if (traj.final_energy < result.energy) {
      result.energy = traj.final_energy;
      result.config = traj.final_points;
      result.best_restart = r;
    }
  }
  return result;
}

/// sigma^d-measure of the spherical cap {x in S^d : <x, z> >= height}.
inline double spherical_cap_measure(int sphere_dim, double height) {
  if (sphere_dim < 1)
    throw Error(ErrorKind::InvalidArgument, "sphere dimension must be >= 1");
  if (height <= -1.0) return 1.0;
  if (height >= 1.0) return 0.0;
  const double theta = std::acos(height);
  if (sphere_dim == 1) return theta / std::numbers::pi;
  if (sphere_dim == 2) return 0.5 * (1.0 - height);
  // integral of sin^(d-1) over [0, theta] / same over [0, pi], by Simpson
  const auto integral = [sphere_dim](double upper) {
    const int panels = 512;
    const double h = upper / (2 * panels);
    double sum = 0.0;
    for (int k = 0; k <= 2 * panels; ++k) {
      const double weight =
          (k == 0 || k == 2 * panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      sum += weight * std::pow(std::sin(k * h), sphere_dim - 1);
    }
    return sum * h / 3.0;
  };
  return integral(theta) / integral(std::numbers::pi);
}

/// Cap discrepancy: maximum |empirical - exact| cap measure over `num_caps`
/// seeded random caps (center uniform on the sphere, height uniform in
/// [-1, 1]).
inline double cap_discrepancy(const Matrix& unit_points, int num_caps,
                              std::uint64_t cap_seed) {
  if (unit_points.cols() < 1)
    throw Error(ErrorKind::InvalidArgument, "empty point set");
  if (num_caps < 1)
    throw Error(ErrorKind::InvalidArgument, "num_caps must be >= 1");
  const int sphere_dim = static_cast<int>(unit_points.rows()) - 1;
  std::mt19937_64 rng(cap_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform_height(-1.0, 1.0);

  const double inv_n = 1.0 / static_cast<double>(unit_points.cols());
  double worst = 0.0;
  Vector center(unit_points.rows());
  for (int c = 0; c < num_caps; ++c) {
    double norm = 0.0;
    do {
      for (Index r = 0; r < center.size(); ++r) center(r) = gauss(rng);
      norm = center.norm();
    } while (norm <= 1e-6);
    center /= norm;
    const double height = uniform_height(rng);

    Index inside = 0;
    for (Index i = 0; i < unit_points.cols(); ++i)
      if (center.dot(unit_points.col(i)) >= height) ++inside;
    const double empirical = static_cast<double>(inside) * inv_n;
    worst = std::max(worst,
                     std::abs(empirical -
                              spherical_cap_measure(sphere_dim, height)));
  }
  return worst;
}

struct AsymptoticReport {
  double s = 0.0;
  int d = 0;
  std::string regime;  // "0<s<d", "s=d", or "s>d"
  std::vector<int> sample_counts;
  std::vector<double> min_energies;         // best energy per N
  std::vector<double> normalized_energies;  // energy / p(N)
  double fitted_limit = 0.0;                // intercept of fit vs N^(-1/2)
  double uniformity_stat = 0.0;             // cap discrepancy at largest N
  Matrix largest_config;
};

/// Growth normalizer p(N) for the minimal s-energy: N^2 for 0<s<d,
/// N^2 log N for s=d, N^(1+s/d) for s>d.
inline double growth_normalizer(double s, int d, int n) {
  if (!(s > 0.0) || d < 1)
    throw Error(ErrorKind::InvalidRegime,
                "growth law requires s > 0 and d >= 1");
  const double nd = static_cast<double>(n);
  if (s < d) return nd * nd;
  if (s == d) return nd * nd * std::log(nd);
  return std::pow(nd, 1.0 + s / static_cast<double>(d));
}

/// Empirical check of the minimal-energy growth law and of asymptotic
/// uniformity: optimizes each N, normalizes by p(N), and measures the cap
/// discrepancy of the largest configuration.
inline AsymptoticReport asymptotic_check(double s, int d,
                                         const std::vector<int>& sample_counts,
                                         int restarts,
                                         OptimizerConfig opt = {},
                                         int num_caps = 1000,
                                         std::uint64_t cap_seed = 9001) {
  growth_normalizer(s, d, 2);  // regime guard
  if (sample_counts.empty())
    throw Error(ErrorKind::InvalidArgument, "sample_counts must be non-empty");
  for (std::size_t i = 0; i < sample_counts.size(); ++i) {
    if (sample_counts[i] < 2)
      throw Error(ErrorKind::InvalidArgument, "sample counts must be >= 2");
    if (i > 0 && sample_counts[i] <= sample_counts[i - 1])
      throw Error(ErrorKind::InvalidArgument,
                  "sample_counts must be strictly increasing");
  }

  AsymptoticReport report;
  report.s = s;
  report.d = d;
  report.regime = s < d ? "0<s<d" : (s == d ? "s=d" : "s>d");
  report.sample_counts = sample_counts;

  for (int n : sample_counts) {
    const MinimumEnergyResult best =
        empirical_minimum_energy(n, d, s, restarts, opt);
    report.min_energies.push_back(best.energy);
    report.normalized_energies.push_back(best.energy /
                                         growth_normalizer(s, d, n));
    if (n == sample_counts.back()) report.largest_config = best.config;
  }

  // Least-squares fit a + b * N^(-1/2); the intercept estimates the limit.
  const std::size_t k = sample_counts.size();
  if (k == 1) {
    report.fitted_limit = report.normalized_energies[0];
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double x = 1.0 / std::sqrt(static_cast<double>(sample_counts[i]));
      const double y = report.normalized_energies[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double denom = static_cast<double>(k) * sxx - sx * sx;
    const double slope = (static_cast<double>(k) * sxy - sx * sy) / denom;
    report.fitted_limit = (sy - slope * sx) / static_cast<double>(k);
  }

  report.uniformity_stat =
      cap_discrepancy(report.largest_config, num_caps, cap_seed);
  return report;
}

}  // namespace mhe
