#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhe/energy.hpp"

// A small ReLU feedforward classifier trained with a composite objective:
// softmax cross-entropy plus hyperspherical-energy terms on the hidden and
// output layers and a decoupled weight-decay term on neuron magnitudes.
//
// Layer arithmetic is written as explicit index loops in a fixed order so
// that runs are reproducible bit for bit and independently re-derivable.

namespace mhe {

struct MlpModel {
  struct Layer {
    Matrix weights;  // fan_in x fan_out, columns are neurons
    Vector bias;     // fan_out
  };
  std::vector<Layer> layers;
  // Identity activation on the penultimate (feature) layer instead of ReLU;
  // the usual choice when features are kept 2-D for plotting, since ReLU
  // would confine them to the positive quadrant.
  bool linear_feature_layer = false;

  Index input_dim() const { return layers.front().weights.rows(); }
  Index num_classes() const { return layers.back().weights.cols(); }
  Index feature_dim() const { return layers.back().weights.rows(); }

  void validate() const {
    if (layers.empty())
      throw Error(ErrorKind::InvalidArgument, "model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Layer& layer = layers[l];
      if (layer.bias.size() != layer.weights.cols())
        throw Error(ErrorKind::DimensionMismatch,
                    "bias length mismatch in layer " + std::to_string(l));
      if (l > 0 && layer.weights.rows() != layers[l - 1].weights.cols())
        throw Error(ErrorKind::DimensionMismatch,
                    "layer dimensions do not chain at layer " +
                        std::to_string(l));
      if (!layer.weights.allFinite() || !layer.bias.allFinite())
        throw Error(ErrorKind::InvalidArgument,
                    "non-finite parameter in layer " + std::to_string(l));
    }
  }

  /// He-style init: weights ~ N(0, 2/fan_in), zero biases.
  /// dims = {input, hidden..., classes}.
  static MlpModel random(const std::vector<Index>& dims, std::uint64_t seed) {
    if (dims.size() < 2)
      throw Error(ErrorKind::InvalidArgument,
                  "need at least input and output dimensions");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MlpModel model;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Layer layer;
      layer.weights.resize(dims[l], dims[l + 1]);
      const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
      for (Index c = 0; c < layer.weights.cols(); ++c)
        for (Index r = 0; r < layer.weights.rows(); ++r)
          layer.weights(r, c) = scale * gauss(rng);
      layer.bias = Vector::Zero(dims[l + 1]);
      model.layers.push_back(std::move(layer));
    }
    return model;
  }
};

enum class OutputEnergyMode { full_sum, data_dependent_minibatch };
enum class WeightDecayForm { norm, squared_norm };

struct RegularizerConfig {
  double lambda_w = 0.0;
  double lambda_h = 0.0;
  double lambda_o = 0.0;
  EnergySpec hidden_spec{};  // s = 2, euclidean, full by default
  EnergySpec output_spec{};  // space must remain full
  OutputEnergyMode output_mode = OutputEnergyMode::full_sum;
  WeightDecayForm decay_form = WeightDecayForm::norm;
  bool divide_hidden_by_layers = false;

  void validate() const {
    if (!(lambda_w >= 0.0) || !(lambda_h >= 0.0) || !(lambda_o >= 0.0))
      throw Error(ErrorKind::InvalidArgument,
                  "regularization weights must be finite and >= 0");
    validate_spec(hidden_spec, LayerRole::hidden);
    validate_spec(output_spec, LayerRole::output);
  }
};

struct SyntheticDataset {
  Matrix points;  // dim x m, one sample per column
  std::vector<int> labels;
  std::vector<int> class_counts;

  int num_classes() const { return static_cast<int>(class_counts.size()); }
  Index size() const { return points.cols(); }
};

/// Gaussian blobs with class means uniform on the unit sphere and isotropic
/// stddev `spread`; per_class[k] samples for class k.
inline SyntheticDataset make_imbalanced_blobs(int classes,
                                              const std::vector<int>& per_class,
                                              Index dim, double spread,
                                              std::uint64_t seed) {
  if (classes < 2)
    throw Error(ErrorKind::InvalidArgument, "need at least 2 classes");
  if (static_cast<int>(per_class.size()) != classes)
    throw Error(ErrorKind::InvalidArgument,
                "per_class length must equal the class count");
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dim must be >= 1");
  if (!(spread >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "spread must be >= 0");
  for (int c : per_class)
    if (c < 1)
      throw Error(ErrorKind::InvalidArgument, "per-class counts must be >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix means(dim, classes);
  for (int c = 0; c < classes; ++c) {
    double norm = 0.0;
    do {
      for (Index r = 0; r < dim; ++r) means(r, c) = gauss(rng);
      norm = means.col(c).norm();
    } while (norm <= 1e-6);
    means.col(c) /= norm;
  }

  const Index total = std::accumulate(per_class.begin(), per_class.end(), 0);
  SyntheticDataset data;
  data.points.resize(dim, total);
  data.labels.reserve(static_cast<std::size_t>(total));
  data.class_counts = per_class;
  Index col = 0;
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class[static_cast<std::size_t>(c)]; ++k, ++col) {
      for (Index r = 0; r < dim; ++r)
        data.points(r, col) = means(r, c) + spread * gauss(rng);
      data.labels.push_back(c);
    }
  }
  return data;
}

/// Per-class split: the first take[k] samples of class k form the first
/// dataset, the remainder the second. Both halves keep the generating
/// distribution, so this is the train/test device for blob experiments.
inline std::pair<SyntheticDataset, SyntheticDataset> split_dataset(
    const SyntheticDataset& data, const std::vector<int>& take) {
  if (static_cast<int>(take.size()) != data.num_classes())
    throw Error(ErrorKind::InvalidArgument,
                "take length must equal the class count");
  for (std::size_t c = 0; c < take.size(); ++c)
    if (take[c] < 0 || take[c] > data.class_counts[c])
      throw Error(ErrorKind::InvalidArgument,
                  "take count outside [0, class count]",
                  static_cast<std::ptrdiff_t>(c));

  SyntheticDataset first, second;
  first.class_counts = take;
  second.class_counts.resize(take.size());
  for (std::size_t c = 0; c < take.size(); ++c)
    second.class_counts[c] = data.class_counts[c] - take[c];

  const Index total_first =
      std::accumulate(take.begin(), take.end(), 0);
  first.points.resize(data.points.rows(), total_first);
  second.points.resize(data.points.rows(), data.size() - total_first);

  std::vector<int> seen(take.size(), 0);
  Index dst_first = 0, dst_second = 0;
  for (Index src = 0; src < data.size(); ++src) {
    const auto c =
        static_cast<std::size_t>(data.labels[static_cast<std::size_t>(src)]);
    if (seen[c]++ < take[c]) {
      first.points.col(dst_first++) = data.points.col(src);
      first.labels.push_back(static_cast<int>(c));
    } else {
      second.points.col(dst_second++) = data.points.col(src);
      second.labels.push_back(static_cast<int>(c));
    }
  }
  return {std::move(first), std::move(second)};
}

struct ForwardCache {
  std::vector<Vector> inputs;    // input to each layer (inputs[0] = x)
  std::vector<Vector> pre_acts;  // affine outputs z per layer
};

/// logits = W_L^T a + b_L after ReLU hidden layers.
inline Vector forward(const MlpModel& model, const Vector& x,
                      ForwardCache* cache = nullptr) {
  if (x.size() != model.input_dim())
    throw Error(ErrorKind::DimensionMismatch,
                "input length does not match the first layer");
  if (cache) {
    cache->inputs.clear();
    cache->pre_acts.clear();
  }
  Vector a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const MlpModel::Layer& layer = model.layers[l];
    if (cache) cache->inputs.push_back(a);
    Vector z(layer.weights.cols());
    for (Index k = 0; k < layer.weights.cols(); ++k) {
      double acc = layer.bias(k);
      for (Index i = 0; i < layer.weights.rows(); ++i)
        acc += a(i) * layer.weights(i, k);
      z(k) = acc;
    }
    if (cache) cache->pre_acts.push_back(z);
    const bool relu = l + 1 < model.layers.size() &&
                      !(model.linear_feature_layer &&
                        l + 2 == model.layers.size());
    if (relu) {
      a.resize(z.size());
      for (Index k = 0; k < z.size(); ++k) a(k) = z(k) > 0.0 ? z(k) : 0.0;
    } else {
      a = std::move(z);
    }
  }
  return a;
}

struct LossTerms {
  double total = 0.0;
  double data = 0.0;
  double hidden_energy = 0.0;  // unweighted regularizer values
  double output_energy = 0.0;
  double weight_decay = 0.0;
};

struct ModelGradient {
  std::vector<MlpModel::Layer> layers;

  static ModelGradient zeros_like(const MlpModel& model) {
    ModelGradient g;
    for (const MlpModel::Layer& layer : model.layers)
      g.layers.push_back({Matrix::Zero(layer.weights.rows(),
                                       layer.weights.cols()),
                          Vector::Zero(layer.bias.size())});
    return g;
  }
};

namespace detail {

// Mean softmax cross-entropy over the batch; accumulates parameter
// gradients when `grad` is given. Samples are processed in column order.
inline double data_loss_and_gradient(const MlpModel& model,
                                     const Matrix& batch_x,
                                     std::span<const int> batch_y,
                                     ModelGradient* grad) {
  const Index m = batch_x.cols();
  const std::size_t num_layers = model.layers.size();
  const double inv_m = 1.0 / static_cast<double>(m);

  double loss = 0.0;
  ForwardCache cache;
  for (Index j = 0; j < m; ++j) {
    const Vector logits = forward(model, batch_x.col(j), &cache);
    const int label = batch_y[static_cast<std::size_t>(j)];

    double max_logit = logits(0);
    for (Index k = 1; k < logits.size(); ++k)
      max_logit = std::max(max_logit, logits(k));
    double z_sum = 0.0;
    Vector probs(logits.size());
    for (Index k = 0; k < logits.size(); ++k) {
      probs(k) = std::exp(logits(k) - max_logit);
      z_sum += probs(k);
    }
    loss += (std::log(z_sum) - (logits(label) - max_logit)) * inv_m;
    if (!grad) continue;

    Vector delta(logits.size());
    for (Index k = 0; k < logits.size(); ++k)
      delta(k) = probs(k) / z_sum * inv_m;
    delta(label) -= inv_m;

    for (std::size_t l = num_layers; l-- > 0;) {
      const MlpModel::Layer& layer = model.layers[l];
      const Vector& a_in = cache.inputs[l];
      Matrix& g_w = grad->layers[l].weights;
      Vector& g_b = grad->layers[l].bias;
      for (Index k = 0; k < layer.weights.cols(); ++k) {
        for (Index i = 0; i < layer.weights.rows(); ++i)
          g_w(i, k) += a_in(i) * delta(k);
        g_b(k) += delta(k);
      }
      if (l == 0) break;
      const bool gated = !(model.linear_feature_layer && l == num_layers - 1);
      Vector next(layer.weights.rows());
      for (Index i = 0; i < layer.weights.rows(); ++i) {
        double acc = 0.0;
        for (Index k = 0; k < layer.weights.cols(); ++k)
          acc += layer.weights(i, k) * delta(k);
        next(i) = !gated || cache.pre_acts[l - 1](i) > 0.0 ? acc : 0.0;
      }
      delta = std::move(next);
    }
  }
  return loss;
}

}  // namespace detail

/// Composite objective on one batch:
///   data + lambda_h * T_h + lambda_o * T_o + lambda_w * T_w
/// where T_h sums the normalized hidden-layer energies, T_o is the
/// (normalized or data-dependent) output-layer energy, and T_w is the mean
/// neuron norm. Terms with a zero weight are skipped entirely.
inline LossTerms composite_loss(const MlpModel& model, const Matrix& batch_x,
                                std::span<const int> batch_y,
                                const RegularizerConfig& reg,
                                ModelGradient* grad = nullptr) {
  model.validate();
  reg.validate();
  if (batch_x.cols() == 0)
    throw Error(ErrorKind::InvalidArgument, "batch must be non-empty");
  if (static_cast<std::size_t>(batch_x.cols()) != batch_y.size())
    throw Error(ErrorKind::DimensionMismatch,
                "batch points and labels disagree in length");
  for (std::size_t j = 0; j < batch_y.size(); ++j)
    if (batch_y[j] < 0 || batch_y[j] >= model.num_classes())
      throw Error(ErrorKind::LabelOutOfRange,
                  "label " + std::to_string(batch_y[j]) + " outside [0, " +
                      std::to_string(model.num_classes()) + ")",
                  static_cast<std::ptrdiff_t>(j));

  if (grad) *grad = ModelGradient::zeros_like(model);
  LossTerms terms;
  terms.data = detail::data_loss_and_gradient(model, batch_x, batch_y, grad);

  const std::size_t num_layers = model.layers.size();
  if (reg.lambda_h > 0.0 && num_layers > 1) {
    const double layer_scale =
        reg.divide_hidden_by_layers
            ? 1.0 / static_cast<double>(num_layers - 1)
            : 1.0;
    for (std::size_t l = 0; l + 1 < num_layers; ++l) {
      const NeuronSet neurons{model.layers[l].weights};
      const EnergyValue value = energy(neurons, reg.hidden_spec);
      terms.hidden_energy += layer_scale * value.normalized;
      if (grad) {
        const double scale =
            reg.lambda_h * layer_scale /
            static_cast<double>(value.pair_count);
        grad->layers[l].weights +=
            scale * energy_gradient(neurons, reg.hidden_spec);
      }
    }
  }

  if (reg.lambda_o > 0.0) {
    const NeuronSet classifier{model.layers.back().weights};
    if (reg.output_mode == OutputEnergyMode::full_sum) {
      const EnergyValue value = energy(classifier, reg.output_spec);
      terms.output_energy = value.normalized;
      if (grad)
        grad->layers.back().weights +=
            (reg.lambda_o / static_cast<double>(value.pair_count)) *
            energy_gradient(classifier, reg.output_spec);
    } else {
      terms.output_energy =
          output_minibatch_energy(classifier, batch_y, reg.output_spec.s);
      if (grad)
        grad->layers.back().weights +=
            reg.lambda_o * output_minibatch_energy_gradient(
                               classifier, batch_y, reg.output_spec.s);
    }
  }

  if (reg.lambda_w > 0.0) {
    Index neuron_count = 0;
    for (const MlpModel::Layer& layer : model.layers)
      neuron_count += layer.weights.cols();
    const double inv_count = 1.0 / static_cast<double>(neuron_count);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const Matrix& w = model.layers[l].weights;
      for (Index c = 0; c < w.cols(); ++c) {
        const double norm = w.col(c).norm();
        if (reg.decay_form == WeightDecayForm::norm) {
          terms.weight_decay += norm * inv_count;
          if (grad && norm > kNormEpsilon)
            grad->layers[l].weights.col(c) +=
                (reg.lambda_w * inv_count / norm) * w.col(c);
        } else {
          terms.weight_decay += norm * norm * inv_count;
          if (grad)
            grad->layers[l].weights.col(c) +=
                (2.0 * reg.lambda_w * inv_count) * w.col(c);
        }
      }
    }
  }

  terms.total = terms.data + reg.lambda_h * terms.hidden_energy +
                reg.lambda_o * terms.output_energy +
                reg.lambda_w * terms.weight_decay;
  if (!std::isfinite(terms.total))
    throw Error(ErrorKind::NonFiniteEnergy, "composite loss is not finite");
  return terms;
}

/// Geodesic angles between the normalized output-layer neurons.
inline Matrix classifier_neuron_angles(const MlpModel& model) {
  model.validate();
  return pairwise_geodesic(
      detail::unit_directions(model.layers.back().weights));
}

struct EpochStats {
  double total = 0.0;
  double data = 0.0;
  double hidden_energy = 0.0;
  double output_energy = 0.0;
  double weight_decay = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;  // sample-weighted means over batches
  double accuracy = 0.0;
  std::vector<double> per_class_recall;
  Matrix classifier_angles;
  double min_classifier_angle = 0.0;
  Matrix features;  // penultimate activations of the eval set (optional)
  std::vector<int> feature_labels;
};

/// Argmax accuracy on a dataset; fills per-class recall when requested.
inline double evaluate(const MlpModel& model, const SyntheticDataset& data,
                       std::vector<double>* recall = nullptr) {
  std::vector<Index> correct(static_cast<std::size_t>(data.num_classes()), 0);
  std::vector<Index> seen(static_cast<std::size_t>(data.num_classes()), 0);
  Index hits = 0;
  for (Index j = 0; j < data.size(); ++j) {
    const Vector logits = forward(model, data.points.col(j));
    Index best = 0;
    for (Index k = 1; k < logits.size(); ++k)
      if (logits(k) > logits(best)) best = k;
    const auto label = static_cast<std::size_t>(data.labels[
        static_cast<std::size_t>(j)]);
    ++seen[label];
    if (best == static_cast<Index>(label)) {
      ++hits;
      ++correct[label];
    }
  }
  if (recall) {
    recall->assign(static_cast<std::size_t>(data.num_classes()), 0.0);
    for (std::size_t c = 0; c < recall->size(); ++c)
      (*recall)[c] = seen[c] > 0 ? static_cast<double>(correct[c]) /
                                       static_cast<double>(seen[c])
                                 : 0.0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Mini-batch gradient descent with a fixed learning rate. Deterministic
/// given the seed; evaluation uses `eval_data` when provided, the training
/// set otherwise.
inline TrainReport train(MlpModel& model, const SyntheticDataset& data,
                         const RegularizerConfig& reg, int epochs,
                         Index batch_size, double lr, std::uint64_t seed,
                         const SyntheticDataset* eval_data = nullptr,
                         bool dump_features = false) {
  model.validate();
  reg.validate();
  if (epochs < 0)
    throw Error(ErrorKind::InvalidArgument, "epochs must be >= 0");
  if (batch_size < 1)
    throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (!(lr > 0.0))
    throw Error(ErrorKind::InvalidArgument, "learning rate must be > 0");
  if (data.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "empty training set");
  if (data.points.rows() != model.input_dim())
    throw Error(ErrorKind::DimensionMismatch,
                "dataset dimension does not match the model input");

  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i)
    order[static_cast<std::size_t>(i)] = i;

  TrainReport report;
  ModelGradient grad;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    for (Index start = 0; start < data.size(); start += batch_size) {
      const Index m = std::min(batch_size, data.size() - start);
      Matrix batch_x(data.points.rows(), m);
      std::vector<int> batch_y(static_cast<std::size_t>(m));
      for (Index j = 0; j < m; ++j) {
        const Index src = order[static_cast<std::size_t>(start + j)];
        batch_x.col(j) = data.points.col(src);
        batch_y[static_cast<std::size_t>(j)] =
            data.labels[static_cast<std::size_t>(src)];
      }

      const LossTerms terms =
          composite_loss(model, batch_x, batch_y, reg, &grad);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        MlpModel::Layer& layer = model.layers[l];
        const MlpModel::Layer& g = grad.layers[l];
        for (Index c = 0; c < layer.weights.cols(); ++c)
          for (Index r = 0; r < layer.weights.rows(); ++r)
            layer.weights(r, c) -= lr * g.weights(r, c);
        for (Index k = 0; k < layer.bias.size(); ++k)
          layer.bias(k) -= lr * g.bias(k);
      }

      const double w = static_cast<double>(m) /
                       static_cast<double>(data.size());
      stats.total += w * terms.total;
      stats.data += w * terms.data;
      stats.hidden_energy += w * terms.hidden_energy;
      stats.output_energy += w * terms.output_energy;
      stats.weight_decay += w * terms.weight_decay;
    }
    report.epochs.push_back(stats);
  }

  const SyntheticDataset& eval = eval_data ? *eval_data : data;
  report.accuracy = evaluate(model, eval, &report.per_class_recall);
  report.classifier_angles = classifier_neuron_angles(model);
  report.min_classifier_angle = std::numbers::pi;
  for (Index i = 0; i < report.classifier_angles.rows(); ++i)
    for (Index j = i + 1; j < report.classifier_angles.cols(); ++j)
      report.min_classifier_angle =
          std::min(report.min_classifier_angle, report.classifier_angles(i, j));

  if (dump_features) {
    report.features.resize(model.feature_dim(), eval.size());
    ForwardCache cache;
    for (Index j = 0; j < eval.size(); ++j) {
      forward(model, eval.points.col(j), &cache);
      report.features.col(j) = cache.inputs.back();
    }
    report.feature_labels = eval.labels;
  }
  return report;
}

}  // namespace mhe
