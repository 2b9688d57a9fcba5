#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mhe/mlp.hpp"

// Plain-array re-implementation of the ReLU classifier arithmetic, written
// directly from the softmax cross-entropy formulas. Used as the second path
// of the dual-path oracle: library runs with all regularizers off must agree
// with this trainer bit for bit.

namespace testutil {

using Array = std::vector<double>;

struct RefLayer {
  std::size_t fan_in = 0, fan_out = 0;
  Array w;  // column-major: w[i + k * fan_in]
  Array b;
};

struct RefModel {
  std::vector<RefLayer> layers;

  static RefModel from(const mhe::MlpModel& model) {
    RefModel ref;
    for (const auto& layer : model.layers) {
      RefLayer rl;
      rl.fan_in = static_cast<std::size_t>(layer.weights.rows());
      rl.fan_out = static_cast<std::size_t>(layer.weights.cols());
      rl.w.resize(rl.fan_in * rl.fan_out);
      rl.b.resize(rl.fan_out);
      for (std::size_t k = 0; k < rl.fan_out; ++k) {
        for (std::size_t i = 0; i < rl.fan_in; ++i)
          rl.w[i + k * rl.fan_in] =
              layer.weights(static_cast<mhe::Index>(i),
                            static_cast<mhe::Index>(k));
        rl.b[k] = layer.bias(static_cast<mhe::Index>(k));
      }
      ref.layers.push_back(std::move(rl));
    }
    return ref;
  }
};

inline Array ref_forward(const RefModel& model, const Array& x,
                         std::vector<Array>* inputs = nullptr,
                         std::vector<Array>* pre_acts = nullptr) {
  if (inputs) inputs->clear();
  if (pre_acts) pre_acts->clear();
  Array a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const RefLayer& layer = model.layers[l];
    if (inputs) inputs->push_back(a);
    Array z(layer.fan_out);
    for (std::size_t k = 0; k < layer.fan_out; ++k) {
      double acc = layer.b[k];
      for (std::size_t i = 0; i < layer.fan_in; ++i)
        acc += a[i] * layer.w[i + k * layer.fan_in];
      z[k] = acc;
    }
    if (pre_acts) pre_acts->push_back(z);
    if (l + 1 < model.layers.size()) {
      a.resize(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) a[k] = z[k] > 0.0 ? z[k] : 0.0;
    } else {
      a = z;
    }
  }
  return a;
}

// Mean cross-entropy over the batch; gradients accumulated sample by sample.
inline double ref_ce_loss(const RefModel& model,
                          const std::vector<Array>& batch_x,
                          const std::vector<int>& batch_y,
                          std::vector<RefLayer>* grad) {
  const double inv_m = 1.0 / static_cast<double>(batch_x.size());
  if (grad) {
    grad->clear();
    for (const RefLayer& layer : model.layers) {
      RefLayer g;
      g.fan_in = layer.fan_in;
      g.fan_out = layer.fan_out;
      g.w.assign(layer.w.size(), 0.0);
      g.b.assign(layer.b.size(), 0.0);
      grad->push_back(std::move(g));
    }
  }

  double loss = 0.0;
  std::vector<Array> inputs, pre_acts;
  for (std::size_t j = 0; j < batch_x.size(); ++j) {
    const Array logits = ref_forward(model, batch_x[j], &inputs, &pre_acts);
    const int label = batch_y[j];

    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z_sum = 0.0;
    Array e(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      e[k] = std::exp(logits[k] - mx);
      z_sum += e[k];
    }
    loss += (std::log(z_sum) -
             (logits[static_cast<std::size_t>(label)] - mx)) * inv_m;
    if (!grad) continue;

    Array delta(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k)
      delta[k] = e[k] / z_sum * inv_m;
    delta[static_cast<std::size_t>(label)] -= inv_m;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const RefLayer& layer = model.layers[l];
      RefLayer& g = (*grad)[l];
      const Array& a_in = inputs[l];
      for (std::size_t k = 0; k < layer.fan_out; ++k) {
        for (std::size_t i = 0; i < layer.fan_in; ++i)
          g.w[i + k * layer.fan_in] += a_in[i] * delta[k];
        g.b[k] += delta[k];
      }
      if (l == 0) break;
      Array next(layer.fan_in);
      for (std::size_t i = 0; i < layer.fan_in; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < layer.fan_out; ++k)
          acc += layer.w[i + k * layer.fan_in] * delta[k];
        next[i] = pre_acts[l - 1][i] > 0.0 ? acc : 0.0;
      }
      delta = std::move(next);
    }
  }
  return loss;
}

// Plain mini-batch SGD on the cross-entropy alone, mirroring the library's
// shuffling and update order.
inline RefModel ref_train(const mhe::MlpModel& init,
                          const mhe::SyntheticDataset& data, int epochs,
                          mhe::Index batch_size, double lr,
                          std::uint64_t seed) {
  RefModel model = RefModel::from(init);
  std::mt19937_64 rng(seed);
  std::vector<mhe::Index> order(static_cast<std::size_t>(data.size()));
  for (mhe::Index i = 0; i < data.size(); ++i)
    order[static_cast<std::size_t>(i)] = i;

  std::vector<RefLayer> grad;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (mhe::Index start = 0; start < data.size(); start += batch_size) {
      const mhe::Index m = std::min(batch_size, data.size() - start);
      std::vector<Array> batch_x;
      std::vector<int> batch_y;
      for (mhe::Index j = 0; j < m; ++j) {
        const mhe::Index src = order[static_cast<std::size_t>(start + j)];
        Array x(static_cast<std::size_t>(data.points.rows()));
        for (mhe::Index r = 0; r < data.points.rows(); ++r)
          x[static_cast<std::size_t>(r)] = data.points(r, src);
        batch_x.push_back(std::move(x));
        batch_y.push_back(data.labels[static_cast<std::size_t>(src)]);
      }
      ref_ce_loss(model, batch_x, batch_y, &grad);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        RefLayer& layer = model.layers[l];
        const RefLayer& g = grad[l];
        for (std::size_t k = 0; k < layer.fan_out; ++k)
          for (std::size_t i = 0; i < layer.fan_in; ++i)
            layer.w[i + k * layer.fan_in] -= lr * g.w[i + k * layer.fan_in];
        for (std::size_t k = 0; k < layer.fan_out; ++k)
          layer.b[k] -= lr * g.b[k];
      }
    }
  }
  return model;
}

}  // namespace testutil
