#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mhe/io.hpp"

using namespace mhe;

TEST_CASE("energy spec and value survive a JSON round trip") {
  EnergySpec spec{1.5, Distance::geodesic, Space::half, {}};
  CHECK(to_json(energy_spec_from_json(to_json(spec))) == to_json(spec));

  EnergySpec weighted{2.0, Distance::euclidean, Space::full,
                      (Vector(3) << 1.0, 2.0, 3.0).finished()};
  CHECK(to_json(energy_spec_from_json(to_json(weighted))) ==
        to_json(weighted));

  EnergyValue value{std::numeric_limits<double>::infinity(), 6,
                    std::numeric_limits<double>::infinity()};
  const json j = to_json(value);
  CHECK(j.at("total") == "inf");
  const EnergyValue back = energy_value_from_json(j);
  CHECK(std::isinf(back.total));
  CHECK(back.pair_count == 6);
  CHECK(to_json(back) == j);
}

TEST_CASE("trajectory reports re-parse unchanged") {
  OptimizerConfig opt;
  opt.max_iters = 300;
  opt.snapshot_stride = 5;
  const EnergySpec spec{2.0, Distance::euclidean, Space::full, {}};
  const Trajectory traj =
      minimize(random_sphere_init(5, 3, 3), spec, opt);

  const json j = to_json(traj);
  const Trajectory back = trajectory_from_json(j);
  CHECK(to_json(back) == j);
  CHECK((back.final_points - traj.final_points).norm() == 0.0);
}

TEST_CASE("optimizer config round trip and defaults") {
  OptimizerConfig opt;
  opt.step_size = 0.25;
  opt.seed = 99;
  CHECK(to_json(optimizer_from_json(to_json(opt))) == to_json(opt));

  const OptimizerConfig filled = optimizer_from_json(json::object());
  CHECK(filled.step_size == OptimizerConfig{}.step_size);
  CHECK(filled.max_iters == OptimizerConfig{}.max_iters);
}

TEST_CASE("unknown config fields are rejected") {
  const json bad = {{"step_size", 0.1}, {"stepsize_typo", 0.2}};
  try {
    optimizer_from_json(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigParse);
    CHECK(std::string(e.what()).find("stepsize_typo") != std::string::npos);
  }
}

TEST_CASE("asymptotic and comparison reports round trip") {
  OptimizerConfig opt;
  opt.max_iters = 500;
  opt.grad_tol = 1e-4;
  const AsymptoticReport report =
      asymptotic_check(1.0, 2, {6, 10}, 1, opt, 50, 3);
  CHECK(to_json(asymptotic_report_from_json(to_json(report))) ==
        to_json(report));

  const RegularizerComparison cmp =
      compare_regularizers(6, 3, {1, 2, 3}, 2.0, opt);
  CHECK(to_json(regularizer_comparison_from_json(to_json(cmp))) ==
        to_json(cmp));
}

TEST_CASE("train report round trip") {
  const SyntheticDataset data = make_imbalanced_blobs(
      3, {15, 15, 15}, 5, 0.3, 7);
  MlpModel model = MlpModel::random({5, 6, 3}, 8);
  RegularizerConfig reg;
  reg.lambda_o = 1.0;
  const TrainReport report = train(model, data, reg, 3, 8, 0.05, 9);
  CHECK(to_json(train_report_from_json(to_json(report))) == to_json(report));

  CHECK(to_json(regularizer_config_from_json(to_json(reg))) == to_json(reg));
}

TEST_CASE("point CSV rows round trip at full precision") {
  const Matrix pts = random_sphere_init(7, 4, 123).weights;
  std::stringstream ss;
  write_points_csv(ss, pts);
  const Matrix back = read_points_csv(ss);
  CHECK(back.rows() == pts.rows());
  CHECK(back.cols() == pts.cols());
  CHECK((back - pts).norm() == 0.0);
}

TEST_CASE("CSV parsing rejects damaged input") {
  std::stringstream ragged("1,2,3\n4,5\n");
  CHECK_THROWS_AS(read_points_csv(ragged), Error);

  std::stringstream garbage("1,banana\n");
  CHECK_THROWS_AS(read_points_csv(garbage), Error);

  std::stringstream empty("");
  CHECK_THROWS_AS(read_points_csv(empty), Error);
}

TEST_CASE("feature CSV carries the x,y,label header") {
  Matrix feats(2, 3);
  feats << 0.5, -1.0, 2.0, 1.5, 0.25, -3.0;
  const std::vector<int> labels{0, 2, 1};
  std::stringstream ss;
  write_features_csv(ss, feats, labels);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "x,y,label");
  int rows = 0;
  while (std::getline(ss, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);

  Matrix bad(3, 2);
  CHECK_THROWS_AS(write_features_csv(ss, bad, labels), Error);
}
