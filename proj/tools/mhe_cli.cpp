// Command-line front end for hyperspherical-energy experiments.
//
// Subcommands: energy, minimize, compare, theory, train. Each takes a JSON
// config (--config), writes machine-readable reports under --out, and prints
// a summary JSON to stdout. Every report embeds the fully resolved config,
// and all randomness derives from the config's single "seed" field.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mhe/io.hpp"
#include "mhe/mlp.hpp"
#include "mhe/optimize.hpp"

namespace fs = std::filesystem;
using mhe::json;

namespace {

bool g_verbose = false;

void note(const std::string& message) {
  if (g_verbose) std::cerr << "[mhe] " << message << "\n";
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw mhe::Error(mhe::ErrorKind::Io, "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw mhe::Error(mhe::ErrorKind::ConfigParse, e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw mhe::Error(mhe::ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw mhe::Error(mhe::ErrorKind::Io, "failed writing " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw mhe::Error(mhe::ErrorKind::Io,
                     "cannot create output directory " + dir.string());
  return dir;
}

mhe::Matrix load_points(const json& cfg) {
  if (cfg.contains("points") == cfg.contains("points_csv"))
    throw mhe::Error(mhe::ErrorKind::ConfigParse,
                     "provide exactly one of \"points\" or \"points_csv\"");
  if (cfg.contains("points"))
    return mhe::points_from_json(cfg.at("points"), "points");
  const std::string path = cfg.at("points_csv").get<std::string>();
  std::ifstream in(path);
  if (!in) throw mhe::Error(mhe::ErrorKind::Io, "cannot open " + path);
  return mhe::read_points_csv(in);
}

std::vector<int> per_class_counts(const json& j, int classes,
                                  const char* context) {
  std::vector<int> counts;
  if (j.is_number_integer()) {
    counts.assign(static_cast<std::size_t>(classes), j.get<int>());
  } else if (j.is_array()) {
    counts = j.get<std::vector<int>>();
  } else {
    throw mhe::Error(mhe::ErrorKind::ConfigParse,
                     std::string(context) +
                         " must be an integer or an array of integers");
  }
  return counts;
}

int cmd_energy(const std::string& config_path) {
  const json cfg = load_config(config_path);
  mhe::check_keys(cfg, "energy config",
                  {"points", "points_csv", "spec", "seed"});
  const mhe::Matrix points = load_points(cfg);
  const mhe::EnergySpec spec =
      cfg.contains("spec") ? mhe::energy_spec_from_json(cfg.at("spec"))
                           : mhe::EnergySpec{};

  const mhe::EnergyValue value = mhe::energy(mhe::NeuronSet{points}, spec);

  json out{{"command", "energy"},
           {"config",
            {{"points", mhe::points_to_json(points)},
             {"spec", mhe::to_json(spec)}}},
           {"result", mhe::to_json(value)}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_minimize(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_config(config_path);
  mhe::check_keys(cfg, "minimize config",
                  {"n", "dim_ambient", "seed", "points", "points_csv", "spec",
                   "optimizer"});

  const std::uint64_t seed =
      cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;
  mhe::EnergySpec spec = cfg.contains("spec")
                             ? mhe::energy_spec_from_json(cfg.at("spec"))
                             : mhe::EnergySpec{};
  mhe::OptimizerConfig opt =
      cfg.contains("optimizer") ? mhe::optimizer_from_json(cfg.at("optimizer"))
                                : mhe::OptimizerConfig{};
  opt.seed = seed;

  mhe::Matrix init;
  if (cfg.contains("points") || cfg.contains("points_csv")) {
    init = load_points(cfg);
  } else {
    if (!cfg.contains("n") || !cfg.contains("dim_ambient"))
      throw mhe::Error(mhe::ErrorKind::ConfigParse,
                       "need \"n\" and \"dim_ambient\" (or explicit points)");
    init = mhe::random_sphere_init(cfg.at("n").get<mhe::Index>(),
                                   cfg.at("dim_ambient").get<mhe::Index>(),
                                   seed)
               .weights;
  }

  note("minimizing " + std::to_string(init.cols()) + " points in dimension " +
       std::to_string(init.rows()));
  const mhe::Trajectory traj =
      mhe::minimize(mhe::NeuronSet{init}, spec, opt);

  const json config_echo{{"points", mhe::points_to_json(init)},
                         {"seed", seed},
                         {"spec", mhe::to_json(spec)},
                         {"optimizer", mhe::to_json(opt)}};
  const fs::path dir = prepare_out_dir(out_dir);
  const fs::path traj_path = dir / "trajectory.json";
  const fs::path csv_path = dir / "final_points.csv";

  write_text(traj_path, json{{"command", "minimize"},
                             {"config", config_echo},
                             {"result", mhe::to_json(traj)}}
                            .dump(2) +
                            "\n");
  std::ostringstream csv;
  mhe::write_points_csv(csv, traj.final_points);
  write_text(csv_path, csv.str());

  json summary{{"command", "minimize"},
               {"converged", traj.converged},
               {"final_energy", mhe::real_to_json(traj.final_energy)},
               {"final_grad_norm", traj.final_grad_norm},
               {"accepted_steps", traj.accepted_steps},
               {"attempted_steps", traj.attempted_steps},
               {"trajectory_json", traj_path.string()},
               {"final_points_csv", csv_path.string()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_config(config_path);
  mhe::check_keys(cfg, "compare config",
                  {"n", "dim_ambient", "num_seeds", "seed", "s", "optimizer"});
  const auto n = cfg.at("n").get<mhe::Index>();
  const auto dim = cfg.at("dim_ambient").get<mhe::Index>();
  const auto num_seeds =
      cfg.contains("num_seeds") ? cfg.at("num_seeds").get<int>() : 20;
  const std::uint64_t seed =
      cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;
  const double s = cfg.contains("s") ? cfg.at("s").get<double>() : 2.0;
  mhe::OptimizerConfig opt =
      cfg.contains("optimizer") ? mhe::optimizer_from_json(cfg.at("optimizer"))
                                : mhe::OptimizerConfig{};
  if (num_seeds < 1)
    throw mhe::Error(mhe::ErrorKind::InvalidArgument, "num_seeds must be >= 1");

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i)
    seeds.push_back(seed + static_cast<std::uint64_t>(i));

  note("comparing regularizers over " + std::to_string(num_seeds) + " seeds");
  const mhe::RegularizerComparison report =
      mhe::compare_regularizers(n, dim, seeds, s, opt);
  if (report.precondition_warning)
    std::cerr << "[mhe] warning: n <= dim_ambient; the orthonormal penalty "
                 "is not crowded in this regime\n";

  const json config_echo{{"n", n},
                         {"dim_ambient", dim},
                         {"num_seeds", num_seeds},
                         {"seed", seed},
                         {"s", s},
                         {"optimizer", mhe::to_json(opt)}};
  const fs::path dir = prepare_out_dir(out_dir);
  const fs::path path = dir / "compare_report.json";
  write_text(path, json{{"command", "compare"},
                        {"config", config_echo},
                        {"result", mhe::to_json(report)}}
                       .dump(2) +
                       "\n");

  json summary{{"command", "compare"},
               {"precondition_warning", report.precondition_warning},
               {"median_min_angle_mhe", report.median_min_angle_mhe},
               {"median_min_angle_half", report.median_min_angle_half},
               {"median_min_angle_ortho", report.median_min_angle_ortho},
               {"report_json", path.string()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_theory(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_config(config_path);
  mhe::check_keys(cfg, "theory config",
                  {"s", "d", "sample_counts", "restarts", "seed", "optimizer",
                   "num_caps"});
  const double s = cfg.at("s").get<double>();
  const int d = cfg.at("d").get<int>();
  const auto sample_counts = cfg.at("sample_counts").get<std::vector<int>>();
  const int restarts =
      cfg.contains("restarts") ? cfg.at("restarts").get<int>() : 3;
  const std::uint64_t seed =
      cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;
  const int num_caps =
      cfg.contains("num_caps") ? cfg.at("num_caps").get<int>() : 1000;
  mhe::OptimizerConfig opt =
      cfg.contains("optimizer") ? mhe::optimizer_from_json(cfg.at("optimizer"))
                                : mhe::OptimizerConfig{};
  opt.seed = seed;
  const std::uint64_t cap_seed = seed + 1000003;  // derived cap-set stream

  note("asymptotic check, " + std::to_string(sample_counts.size()) +
       " sample counts");
  const mhe::AsymptoticReport report =
      mhe::asymptotic_check(s, d, sample_counts, restarts, opt, num_caps,
                            cap_seed);

  const json config_echo{{"s", s},
                         {"d", d},
                         {"sample_counts", sample_counts},
                         {"restarts", restarts},
                         {"seed", seed},
                         {"num_caps", num_caps},
                         {"optimizer", mhe::to_json(opt)}};
  const fs::path dir = prepare_out_dir(out_dir);
  const fs::path path = dir / "theory_report.json";
  const fs::path csv_path = dir / "largest_config.csv";
  write_text(path, json{{"command", "theory"},
                        {"config", config_echo},
                        {"result", mhe::to_json(report)}}
                       .dump(2) +
                       "\n");
  std::ostringstream csv;
  mhe::write_points_csv(csv, report.largest_config);
  write_text(csv_path, csv.str());

  json summary{{"command", "theory"},
               {"regime", report.regime},
               {"normalized_energies", report.normalized_energies},
               {"fitted_limit", report.fitted_limit},
               {"uniformity_stat", report.uniformity_stat},
               {"report_json", path.string()},
               {"largest_config_csv", csv_path.string()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_config(config_path);
  mhe::check_keys(cfg, "train config",
                  {"seed", "dataset", "eval", "model", "regularizer", "epochs",
                   "batch_size", "lr", "dump_features"});
  const std::uint64_t seed =
      cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;

  const json& ds = cfg.at("dataset");
  mhe::check_keys(ds, "dataset config",
                  {"classes", "per_class", "dim", "spread"});
  const int classes = ds.at("classes").get<int>();
  const std::vector<int> per_class =
      per_class_counts(ds.at("per_class"), classes, "dataset per_class");
  const auto dim = ds.at("dim").get<mhe::Index>();
  const double spread =
      ds.contains("spread") ? ds.at("spread").get<double>() : 0.25;

  // Train and eval samples come from one generated pool (shared class
  // means), split per class; sub-seeds derive from the config's single seed.
  mhe::SyntheticDataset train_data;
  std::optional<mhe::SyntheticDataset> eval_data;
  if (cfg.contains("eval")) {
    mhe::check_keys(cfg.at("eval"), "eval config", {"per_class"});
    const std::vector<int> eval_counts = per_class_counts(
        cfg.at("eval").at("per_class"), classes, "eval per_class");
    std::vector<int> pool_counts = per_class;
    for (std::size_t c = 0; c < pool_counts.size(); ++c)
      pool_counts[c] += eval_counts[c];
    const mhe::SyntheticDataset pool =
        mhe::make_imbalanced_blobs(classes, pool_counts, dim, spread, seed);
    auto [tr, ev] = mhe::split_dataset(pool, per_class);
    train_data = std::move(tr);
    eval_data = std::move(ev);
  } else {
    train_data = mhe::make_imbalanced_blobs(classes, per_class, dim, spread,
                                            seed);
  }

  const json& model_cfg = cfg.at("model");
  mhe::check_keys(model_cfg, "model config",
                  {"hidden_dims", "linear_feature_layer"});
  std::vector<mhe::Index> dims{dim};
  for (const auto& h :
       model_cfg.at("hidden_dims").get<std::vector<mhe::Index>>())
    dims.push_back(h);
  dims.push_back(classes);
  mhe::MlpModel model = mhe::MlpModel::random(dims, seed + 2);
  model.linear_feature_layer =
      model_cfg.contains("linear_feature_layer") &&
      model_cfg.at("linear_feature_layer").get<bool>();

  const mhe::RegularizerConfig reg =
      cfg.contains("regularizer")
          ? mhe::regularizer_config_from_json(cfg.at("regularizer"))
          : mhe::RegularizerConfig{};
  const int epochs = cfg.contains("epochs") ? cfg.at("epochs").get<int>() : 30;
  const auto batch_size = cfg.contains("batch_size")
                              ? cfg.at("batch_size").get<mhe::Index>()
                              : mhe::Index{64};
  const double lr = cfg.contains("lr") ? cfg.at("lr").get<double>() : 0.05;
  const bool dump_features =
      cfg.contains("dump_features") && cfg.at("dump_features").get<bool>();
  if (dump_features && model.feature_dim() != 2)
    throw mhe::Error(mhe::ErrorKind::InvalidArgument,
                     "feature dumps require a 2-dimensional feature layer");

  note("training " + std::to_string(epochs) + " epochs on " +
       std::to_string(train_data.size()) + " samples");
  const mhe::TrainReport report =
      mhe::train(model, train_data, reg, epochs, batch_size, lr, seed + 3,
                 eval_data ? &*eval_data : nullptr, dump_features);

  json config_echo{{"seed", seed},
                   {"dataset",
                    {{"classes", classes},
                     {"per_class", per_class},
                     {"dim", dim},
                     {"spread", spread}}},
                   {"model",
                    {{"hidden_dims", model_cfg.at("hidden_dims")},
                     {"linear_feature_layer", model.linear_feature_layer}}},
                   {"regularizer", mhe::to_json(reg)},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"lr", lr},
                   {"dump_features", dump_features}};
  if (eval_data)
    config_echo["eval"] = {{"per_class", cfg.at("eval").at("per_class")}};

  const fs::path dir = prepare_out_dir(out_dir);
  const fs::path report_path = dir / "train_report.json";
  write_text(report_path, json{{"command", "train"},
                               {"config", config_echo},
                               {"result", mhe::to_json(report)}}
                              .dump(2) +
                              "\n");
  json summary{{"command", "train"},
               {"accuracy", report.accuracy},
               {"per_class_recall", report.per_class_recall},
               {"min_classifier_angle", report.min_classifier_angle},
               {"report_json", report_path.string()}};
  if (dump_features) {
    const fs::path features_path = dir / "features.csv";
    std::ostringstream csv;
    mhe::write_features_csv(csv, report.features, report.feature_labels);
    write_text(features_path, csv.str());
    summary["features_csv"] = features_path.string();
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

json error_json(const mhe::Error& e) {
  json j{{"error",
          {{"kind", mhe::to_string(e.kind())}, {"message", e.what()}}}};
  if (e.index()) j["error"]["index"] = *e.index();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspherical energy toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")
        ->required();
    sub->add_option("--out", out_dir, "output directory for reports");
    sub->add_flag("--verbose", g_verbose, "progress notes on stderr");
  };

  CLI::App* energy = app.add_subcommand(
      "energy", "evaluate the energy of a point configuration");
  CLI::App* minimize = app.add_subcommand(
      "minimize", "projected gradient descent on a configuration");
  CLI::App* compare = app.add_subcommand(
      "compare", "energy vs orthonormal regularization comparison");
  CLI::App* theory = app.add_subcommand(
      "theory", "minimal-energy growth and uniformity checks");
  CLI::App* train = app.add_subcommand(
      "train", "train an energy-regularized MLP on synthetic blobs");
  for (CLI::App* sub : {energy, minimize, compare, theory, train})
    add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    if (energy->parsed()) return cmd_energy(config_path);
    if (minimize->parsed()) return cmd_minimize(config_path, out_dir);
    if (compare->parsed()) return cmd_compare(config_path, out_dir);
    if (theory->parsed()) return cmd_theory(config_path, out_dir);
    if (train->parsed()) return cmd_train(config_path, out_dir);
  } catch (const mhe::Error& e) {
    std::cout << error_json(e).dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cout << json{{"error",
                       {{"kind", "Internal"}, {"message", e.what()}}}}
                     .dump(2)
              << "\n";
    return 1;
  }
  return 0;
}
