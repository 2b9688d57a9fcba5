#pragma once

#include <cmath>
#include <initializer_list>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mhe/energy.hpp"
#include "mhe/mlp.hpp"
#include "mhe/optimize.hpp"

// JSON serialization for reports and configs, and CSV for point clouds and
// feature dumps. Field names are snake_case; point sets are emitted one
// point per row. Non-finite reals are encoded as the strings "inf", "-inf"
// and "nan" so that reports survive a JSON round trip.

namespace mhe {

using json = nlohmann::ordered_json;

inline json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double real_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error(ErrorKind::ConfigParse, "expected a real number, got " + j.dump());
}

/// Rejects JSON objects carrying keys outside the allowed set.
inline void check_keys(const json& j, const char* context,
                       std::initializer_list<std::string_view> allowed) {
  if (!j.is_object())
    throw Error(ErrorKind::ConfigParse,
                std::string(context) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (std::string_view k : allowed)
      if (k == item.key()) {
        known = true;
        break;
      }
    if (!known)
      throw Error(ErrorKind::ConfigParse, "unknown field \"" + item.key() +
                                              "\" in " + context);
  }
}

// ---- matrices -------------------------------------------------------------

/// One point per row (transpose of the internal column layout).
inline json points_to_json(const Matrix& points) {
  json rows = json::array();
  for (Index c = 0; c < points.cols(); ++c) {
    json row = json::array();
    for (Index r = 0; r < points.rows(); ++r) row.push_back(points(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix points_from_json(const json& j, const char* context) {
  if (!j.is_array() || j.empty())
    throw Error(ErrorKind::ConfigParse,
                std::string(context) + " must be a non-empty array of points");
  const std::size_t dim = j.front().is_array() ? j.front().size() : 0;
  if (dim == 0)
    throw Error(ErrorKind::ConfigParse,
                std::string(context) + " rows must be non-empty arrays");
  Matrix points(static_cast<Index>(dim), static_cast<Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    if (!j[c].is_array() || j[c].size() != dim)
      throw Error(ErrorKind::ConfigParse,
                  std::string(context) + " rows must all have length " +
                      std::to_string(dim));
    for (std::size_t r = 0; r < dim; ++r)
      points(static_cast<Index>(r), static_cast<Index>(c)) =
          j[c][r].get<double>();
  }
  return points;
}

/// Row-major square/rectangular matrix (not transposed).
inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const char* context) {
  if (!j.is_array())
    throw Error(ErrorKind::ConfigParse,
                std::string(context) + " must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols)
      throw Error(ErrorKind::ConfigParse,
                  std::string(context) + " rows have inconsistent lengths");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

// ---- enums ----------------------------------------------------------------

inline const char* to_string(Distance d) {
  return d == Distance::euclidean ? "euclidean" : "geodesic";
}
inline const char* to_string(Space s) {
  return s == Space::full ? "full" : "half";
}
inline const char* to_string(OutputEnergyMode m) {
  return m == OutputEnergyMode::full_sum ? "full_sum"
                                         : "data_dependent_minibatch";
}
inline const char* to_string(WeightDecayForm f) {
  return f == WeightDecayForm::norm ? "norm" : "squared_norm";
}

inline Distance distance_from_string(const std::string& s) {
  if (s == "euclidean") return Distance::euclidean;
  if (s == "geodesic") return Distance::geodesic;
  throw Error(ErrorKind::ConfigParse, "unknown distance \"" + s + "\"");
}
inline Space space_from_string(const std::string& s) {
  if (s == "full") return Space::full;
  if (s == "half") return Space::half;
  throw Error(ErrorKind::ConfigParse, "unknown space \"" + s + "\"");
}
inline OutputEnergyMode output_mode_from_string(const std::string& s) {
  if (s == "full_sum") return OutputEnergyMode::full_sum;
  if (s == "data_dependent_minibatch")
    return OutputEnergyMode::data_dependent_minibatch;
  throw Error(ErrorKind::ConfigParse, "unknown output_mode \"" + s + "\"");
}
inline WeightDecayForm decay_form_from_string(const std::string& s) {
  if (s == "norm") return WeightDecayForm::norm;
  if (s == "squared_norm") return WeightDecayForm::squared_norm;
  throw Error(ErrorKind::ConfigParse, "unknown decay_form \"" + s + "\"");
}

// ---- energy types ----------------------------------------------------------

inline json to_json(const EnergySpec& spec) {
  json j{{"s", spec.s},
         {"distance", to_string(spec.distance)},
         {"space", to_string(spec.space)}};
  if (spec.beta) {
    json beta = json::array();
    for (Index i = 0; i < spec.beta->size(); ++i)
      beta.push_back((*spec.beta)(i));
    j["beta"] = std::move(beta);
  }
  return j;
}

inline EnergySpec energy_spec_from_json(const json& j) {
  check_keys(j, "energy spec", {"s", "distance", "space", "beta"});
  EnergySpec spec;
  if (j.contains("s")) spec.s = j.at("s").get<double>();
  if (j.contains("distance"))
    spec.distance = distance_from_string(j.at("distance").get<std::string>());
  if (j.contains("space"))
    spec.space = space_from_string(j.at("space").get<std::string>());
  if (j.contains("beta")) {
    const auto& jb = j.at("beta");
    Vector beta(static_cast<Index>(jb.size()));
    for (std::size_t i = 0; i < jb.size(); ++i)
      beta(static_cast<Index>(i)) = jb[i].get<double>();
    spec.beta = std::move(beta);
  }
  return spec;
}

inline json to_json(const EnergyValue& v) {
  return json{{"total", real_to_json(v.total)},
              {"pair_count", v.pair_count},
              {"normalized", real_to_json(v.normalized)}};
}

inline EnergyValue energy_value_from_json(const json& j) {
  check_keys(j, "energy value", {"total", "pair_count", "normalized"});
  EnergyValue v;
  v.total = real_from_json(j.at("total"));
  v.pair_count = j.at("pair_count").get<std::int64_t>();
  v.normalized = real_from_json(j.at("normalized"));
  return v;
}

// ---- optimizer types -------------------------------------------------------

inline json to_json(const OptimizerConfig& opt) {
  return json{{"step_size", opt.step_size},   {"max_iters", opt.max_iters},
              {"grad_tol", opt.grad_tol},     {"step_decay", opt.step_decay},
              {"seed", opt.seed},             {"snapshot_stride",
                                               opt.snapshot_stride}};
}

inline OptimizerConfig optimizer_from_json(const json& j) {
  check_keys(j, "optimizer config",
             {"step_size", "max_iters", "grad_tol", "step_decay", "seed",
              "snapshot_stride"});
  OptimizerConfig opt;
  if (j.contains("step_size")) opt.step_size = j.at("step_size").get<double>();
  if (j.contains("max_iters")) opt.max_iters = j.at("max_iters").get<int>();
  if (j.contains("grad_tol")) opt.grad_tol = j.at("grad_tol").get<double>();
  if (j.contains("step_decay"))
    opt.step_decay = j.at("step_decay").get<double>();
  if (j.contains("seed")) opt.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("snapshot_stride"))
    opt.snapshot_stride = j.at("snapshot_stride").get<int>();
  return opt;
}

inline json to_json(const Trajectory& t) {
  json iterates = json::array();
  for (const TrajectoryPoint& p : t.iterates)
    iterates.push_back(json{{"iteration", p.iteration},
                            {"energy", real_to_json(p.energy)},
                            {"points", points_to_json(p.points)}});
  return json{{"converged", t.converged},
              {"final_grad_norm", t.final_grad_norm},
              {"final_energy", real_to_json(t.final_energy)},
              {"final_points", points_to_json(t.final_points)},
              {"accepted_steps", t.accepted_steps},
              {"attempted_steps", t.attempted_steps},
              {"angular_path", t.angular_path},
              {"iterates", std::move(iterates)}};
}

inline Trajectory trajectory_from_json(const json& j) {
  check_keys(j, "trajectory",
             {"converged", "final_grad_norm", "final_energy", "final_points",
              "accepted_steps", "attempted_steps", "angular_path",
              "iterates"});
  Trajectory t;
  t.converged = j.at("converged").get<bool>();
  t.final_grad_norm = j.at("final_grad_norm").get<double>();
  t.final_energy = real_from_json(j.at("final_energy"));
  t.final_points = points_from_json(j.at("final_points"), "final_points");
  t.accepted_steps = j.at("accepted_steps").get<int>();
  t.attempted_steps = j.at("attempted_steps").get<int>();
  t.angular_path = j.at("angular_path").get<std::vector<double>>();
  for (const json& p : j.at("iterates")) {
    check_keys(p, "trajectory iterate", {"iteration", "energy", "points"});
    t.iterates.push_back({p.at("iteration").get<int>(),
                          real_from_json(p.at("energy")),
                          points_from_json(p.at("points"), "iterate points")});
  }
  return t;
}

inline json to_json(const RegularizerRun& r) {
  return json{{"seed", r.seed},
              {"min_angle_mhe", r.min_angle_mhe},
              {"min_angle_half", r.min_angle_half},
              {"min_angle_ortho", r.min_angle_ortho},
              {"half_set_angle_mhe", r.half_set_angle_mhe},
              {"half_set_angle_half", r.half_set_angle_half},
              {"half_set_angle_ortho", r.half_set_angle_ortho},
              {"final_energy_mhe", r.final_energy_mhe},
              {"final_energy_half", r.final_energy_half},
              {"final_penalty_ortho", r.final_penalty_ortho}};
}

inline RegularizerRun regularizer_run_from_json(const json& j) {
  check_keys(j, "comparison run",
             {"seed", "min_angle_mhe", "min_angle_half", "min_angle_ortho",
              "half_set_angle_mhe", "half_set_angle_half",
              "half_set_angle_ortho", "final_energy_mhe", "final_energy_half",
              "final_penalty_ortho"});
  RegularizerRun r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.min_angle_mhe = j.at("min_angle_mhe").get<double>();
  r.min_angle_half = j.at("min_angle_half").get<double>();
  r.min_angle_ortho = j.at("min_angle_ortho").get<double>();
  r.half_set_angle_mhe = j.at("half_set_angle_mhe").get<double>();
  r.half_set_angle_half = j.at("half_set_angle_half").get<double>();
  r.half_set_angle_ortho = j.at("half_set_angle_ortho").get<double>();
  r.final_energy_mhe = j.at("final_energy_mhe").get<double>();
  r.final_energy_half = j.at("final_energy_half").get<double>();
  r.final_penalty_ortho = j.at("final_penalty_ortho").get<double>();
  return r;
}

inline json to_json(const RegularizerComparison& c) {
  json runs = json::array();
  for (const RegularizerRun& r : c.runs) runs.push_back(to_json(r));
  return json{{"n", c.n},
              {"dim_ambient", c.dim_ambient},
              {"s", c.s},
              {"precondition_warning", c.precondition_warning},
              {"median_min_angle_mhe", c.median_min_angle_mhe},
              {"median_min_angle_half", c.median_min_angle_half},
              {"median_min_angle_ortho", c.median_min_angle_ortho},
              {"runs", std::move(runs)}};
}

inline RegularizerComparison regularizer_comparison_from_json(const json& j) {
  check_keys(j, "comparison report",
             {"n", "dim_ambient", "s", "precondition_warning",
              "median_min_angle_mhe", "median_min_angle_half",
              "median_min_angle_ortho", "runs"});
  RegularizerComparison c;
  c.n = j.at("n").get<Index>();
  c.dim_ambient = j.at("dim_ambient").get<Index>();
  c.s = j.at("s").get<double>();
  c.precondition_warning = j.at("precondition_warning").get<bool>();
  c.median_min_angle_mhe = j.at("median_min_angle_mhe").get<double>();
  c.median_min_angle_half = j.at("median_min_angle_half").get<double>();
  c.median_min_angle_ortho = j.at("median_min_angle_ortho").get<double>();
  for (const json& r : j.at("runs"))
    c.runs.push_back(regularizer_run_from_json(r));
  return c;
}

inline json to_json(const AsymptoticReport& r) {
  return json{{"s", r.s},
              {"d", r.d},
              {"regime", r.regime},
              {"sample_counts", r.sample_counts},
              {"min_energies", r.min_energies},
              {"normalized_energies", r.normalized_energies},
              {"fitted_limit", r.fitted_limit},
              {"uniformity_stat", r.uniformity_stat},
              {"largest_config", points_to_json(r.largest_config)}};
}

inline AsymptoticReport asymptotic_report_from_json(const json& j) {
  check_keys(j, "asymptotic report",
             {"s", "d", "regime", "sample_counts", "min_energies",
              "normalized_energies", "fitted_limit", "uniformity_stat",
              "largest_config"});
  AsymptoticReport r;
  r.s = j.at("s").get<double>();
  r.d = j.at("d").get<int>();
  r.regime = j.at("regime").get<std::string>();
  r.sample_counts = j.at("sample_counts").get<std::vector<int>>();
  r.min_energies = j.at("min_energies").get<std::vector<double>>();
  r.normalized_energies =
      j.at("normalized_energies").get<std::vector<double>>();
  r.fitted_limit = j.at("fitted_limit").get<double>();
  r.uniformity_stat = j.at("uniformity_stat").get<double>();
  r.largest_config = points_from_json(j.at("largest_config"),
                                      "largest_config");
  return r;
}

// ---- trainer types ----------------------------------------------------------

inline json to_json(const RegularizerConfig& reg) {
  return json{{"lambda_w", reg.lambda_w},
              {"lambda_h", reg.lambda_h},
              {"lambda_o", reg.lambda_o},
              {"hidden", to_json(reg.hidden_spec)},
              {"output", to_json(reg.output_spec)},
              {"output_mode", to_string(reg.output_mode)},
              {"decay_form", to_string(reg.decay_form)},
              {"divide_hidden_by_layers", reg.divide_hidden_by_layers}};
}

inline RegularizerConfig regularizer_config_from_json(const json& j) {
  check_keys(j, "regularizer config",
             {"lambda_w", "lambda_h", "lambda_o", "hidden", "output",
              "output_mode", "decay_form", "divide_hidden_by_layers"});
  RegularizerConfig reg;
  if (j.contains("lambda_w")) reg.lambda_w = j.at("lambda_w").get<double>();
  if (j.contains("lambda_h")) reg.lambda_h = j.at("lambda_h").get<double>();
  if (j.contains("lambda_o")) reg.lambda_o = j.at("lambda_o").get<double>();
  if (j.contains("hidden"))
    reg.hidden_spec = energy_spec_from_json(j.at("hidden"));
  if (j.contains("output"))
    reg.output_spec = energy_spec_from_json(j.at("output"));
  if (j.contains("output_mode"))
    reg.output_mode =
        output_mode_from_string(j.at("output_mode").get<std::string>());
  if (j.contains("decay_form"))
    reg.decay_form =
        decay_form_from_string(j.at("decay_form").get<std::string>());
  if (j.contains("divide_hidden_by_layers"))
    reg.divide_hidden_by_layers = j.at("divide_hidden_by_layers").get<bool>();
  return reg;
}

inline json to_json(const EpochStats& e) {
  return json{{"total", e.total},
              {"data", e.data},
              {"hidden_energy", e.hidden_energy},
              {"output_energy", e.output_energy},
              {"weight_decay", e.weight_decay}};
}

inline EpochStats epoch_stats_from_json(const json& j) {
  check_keys(j, "epoch stats",
             {"total", "data", "hidden_energy", "output_energy",
              "weight_decay"});
  EpochStats e;
  e.total = j.at("total").get<double>();
  e.data = j.at("data").get<double>();
  e.hidden_energy = j.at("hidden_energy").get<double>();
  e.output_energy = j.at("output_energy").get<double>();
  e.weight_decay = j.at("weight_decay").get<double>();
  return e;
}

inline json to_json(const TrainReport& r) {
  json epochs = json::array();
  for (const EpochStats& e : r.epochs) epochs.push_back(to_json(e));
  return json{{"epochs", std::move(epochs)},
              {"accuracy", r.accuracy},
              {"per_class_recall", r.per_class_recall},
              {"classifier_angles", matrix_to_json(r.classifier_angles)},
              {"min_classifier_angle", r.min_classifier_angle}};
}

inline TrainReport train_report_from_json(const json& j) {
  check_keys(j, "train report",
             {"epochs", "accuracy", "per_class_recall", "classifier_angles",
              "min_classifier_angle"});
  TrainReport r;
  for (const json& e : j.at("epochs"))
    r.epochs.push_back(epoch_stats_from_json(e));
  r.accuracy = j.at("accuracy").get<double>();
  r.per_class_recall = j.at("per_class_recall").get<std::vector<double>>();
  r.classifier_angles =
      matrix_from_json(j.at("classifier_angles"), "classifier_angles");
  r.min_classifier_angle = j.at("min_classifier_angle").get<double>();
  return r;
}

// ---- CSV --------------------------------------------------------------------

/// One point per row, comma-separated, no header.
inline void write_points_csv(std::ostream& os, const Matrix& points) {
  os << std::setprecision(17);
  for (Index c = 0; c < points.cols(); ++c) {
    for (Index r = 0; r < points.rows(); ++r) {
      if (r > 0) os << ',';
      os << points(r, c);
    }
    os << '\n';
  }
}

/// Parses a headerless numeric CSV into points (one per row).
inline Matrix read_points_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(
                   static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size())
          throw Error(ErrorKind::ConfigParse,
                      "trailing characters in CSV cell \"" + cell + "\"");
      } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::ConfigParse,
                    "non-numeric CSV cell \"" + cell + "\"");
      } catch (const std::out_of_range&) {
        throw Error(ErrorKind::ConfigParse,
                    "out-of-range CSV cell \"" + cell + "\"");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::ConfigParse, "ragged CSV rows");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::ConfigParse, "empty CSV");
  Matrix points(static_cast<Index>(rows.front().size()),
                static_cast<Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t r = 0; r < rows[c].size(); ++r)
      points(static_cast<Index>(r), static_cast<Index>(c)) = rows[c][r];
  return points;
}

/// 2-D feature dump: header "x,y,label", one sample per row.
inline void write_features_csv(std::ostream& os, const Matrix& features,
                               std::span<const int> labels) {
  if (features.rows() != 2)
    throw Error(ErrorKind::InvalidArgument,
                "feature dump requires 2-dimensional features");
  if (static_cast<std::size_t>(features.cols()) != labels.size())
    throw Error(ErrorKind::DimensionMismatch,
                "feature/label counts disagree");
  os << "x,y,label\n" << std::setprecision(17);
  for (Index c = 0; c < features.cols(); ++c)
    os << features(0, c) << ',' << features(1, c) << ','
       << labels[static_cast<std::size_t>(c)] << '\n';
}

}  // namespace mhe
