#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "constellation/errors.hpp"
#include "constellation/rng.hpp"

namespace constellation {

// Fully connected net: ReLU on hidden layers, linear output. Weights are
// row-major (out x in). Hidden layers use He-uniform init; the output layer
// starts at zero so an untrained net scores every action identically.
struct MlpParameters {
  std::vector<int> layer_sizes;              // [in, hidden..., out]
  std::vector<std::vector<double>> weights;  // per layer, row-major
  std::vector<std::vector<double>> biases;   // per layer

  std::size_t layer_count() const { return weights.size(); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }

  static MlpParameters he_uniform(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("MlpParameters: need at least 2 layer sizes");
    for (int s : sizes)
      if (s < 1) throw std::invalid_argument("MlpParameters: layer sizes must be >= 1");
    MlpParameters p;
    p.layer_sizes = sizes;
    const std::size_t layers = sizes.size() - 1;
    p.weights.resize(layers);
    p.biases.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      const int fan_in = sizes[l], fan_out = sizes[l + 1];
      p.weights[l].assign(static_cast<std::size_t>(fan_in) * fan_out, 0.0);
      p.biases[l].assign(fan_out, 0.0);
      if (l + 1 == layers) continue;  // zero-initialized output layer
      const double bound = std::sqrt(6.0 / fan_in);
      for (auto& w : p.weights[l]) w = rng.uniform(-bound, bound);
    }
    return p;
  }
};

// Per-layer inputs and pre-activations captured during forward, consumed by
// backward.
struct ForwardTrace {
  std::vector<std::vector<double>> layer_inputs;     // a^(l), l = 0..L-1
  std::vector<std::vector<double>> pre_activations;  // z^(l), l = 0..L-1
};

inline std::vector<double> forward(const MlpParameters& p, const std::vector<double>& input,
                                   ForwardTrace* trace = nullptr) {
  if (static_cast<int>(input.size()) != p.input_size())
    throw std::invalid_argument("forward: input size mismatch");
  if (trace) {
    trace->layer_inputs.assign(p.layer_count(), {});
    trace->pre_activations.assign(p.layer_count(), {});
  }
  std::vector<double> a = input;
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const int in = p.layer_sizes[l], out = p.layer_sizes[l + 1];
    if (trace) trace->layer_inputs[l] = a;
    std::vector<double> z(out);
    const double* w = p.weights[l].data();
    for (int o = 0; o < out; ++o) {
      double sum = p.biases[l][o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) sum += row[i] * a[i];
      z[o] = sum;
    }
    if (trace) trace->pre_activations[l] = z;
    if (l + 1 < p.layer_count())
      for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
    a = std::move(z);
  }
  return a;
}

struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGradients zeros_like(const MlpParameters& p) {
    MlpGradients g;
    g.weights.resize(p.layer_count());
    g.biases.resize(p.layer_count());
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
      g.weights[l].assign(p.weights[l].size(), 0.0);
      g.biases[l].assign(p.biases[l].size(), 0.0);
    }
    return g;
  }

  void scale(double s) {
    for (auto& layer : weights)
      for (double& v : layer) v *= s;
    for (auto& layer : biases)
      for (double& v : layer) v *= s;
  }
};

// Backpropagate d(loss)/d(output) through a recorded forward pass,
// accumulating into `grads`. Returns d(loss)/d(input).
inline std::vector<double> backward_into(const MlpParameters& p, const ForwardTrace& trace,
                                         const std::vector<double>& out_grad, MlpGradients& grads) {
  if (static_cast<int>(out_grad.size()) != p.output_size())
    throw std::invalid_argument("backward: out_grad size mismatch");
  std::vector<double> delta = out_grad;  // d loss / d z for the current layer
  for (std::size_t li = p.layer_count(); li-- > 0;) {
    const int in = p.layer_sizes[li], out = p.layer_sizes[li + 1];
    const std::vector<double>& a = trace.layer_inputs[li];
    double* gw = grads.weights[li].data();
    for (int o = 0; o < out; ++o) {
      grads.biases[li][o] += delta[o];
      double* row = gw + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) row[i] += delta[o] * a[i];
    }
    std::vector<double> prev(in, 0.0);
    const double* w = p.weights[li].data();
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    if (li > 0) {
      // Gate by the previous layer's ReLU.
      const std::vector<double>& z_prev = trace.pre_activations[li - 1];
      for (int i = 0; i < in; ++i)
        if (z_prev[i] <= 0.0) prev[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return delta;
}

inline std::pair<MlpGradients, std::vector<double>> backward(const MlpParameters& p,
                                                             const ForwardTrace& trace,
                                                             const std::vector<double>& out_grad) {
  MlpGradients g = MlpGradients::zeros_like(p);
  std::vector<double> in_grad = backward_into(p, trace, out_grad, g);
  return {std::move(g), std::move(in_grad)};
}

// Global L2 norm across every gradient entry.
inline double gradient_norm(const MlpGradients& g) {
  double sq = 0.0;
  for (const auto& layer : g.weights)
    for (double v : layer) sq += v * v;
  for (const auto& layer : g.biases)
    for (double v : layer) sq += v * v;
  return std::sqrt(sq);
}

// Scale gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_gradient_norm(MlpGradients& g, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_gradient_norm: max_norm must be > 0");
  const double norm = gradient_norm(g);
  if (norm > max_norm) g.scale(max_norm / norm);
  return norm;
}

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  long t = 0;

  static AdamState zeros_like(const MlpParameters& p) {
    AdamState s;
    s.m_w.resize(p.layer_count());
    s.v_w.resize(p.layer_count());
    s.m_b.resize(p.layer_count());
    s.v_b.resize(p.layer_count());
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
      s.m_w[l].assign(p.weights[l].size(), 0.0);
      s.v_w[l].assign(p.weights[l].size(), 0.0);
      s.m_b[l].assign(p.biases[l].size(), 0.0);
      s.v_b[l].assign(p.biases[l].size(), 0.0);
    }
    return s;
  }
};

// One Adam update with bias correction.
inline void adam_step(MlpParameters& p, const MlpGradients& g, AdamState& s, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  s.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
  auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  };
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    update(p.weights[l], g.weights[l], s.m_w[l], s.v_w[l]);
    update(p.biases[l], g.biases[l], s.m_b[l], s.v_b[l]);
  }
}

inline constexpr const char* kMlpCheckpointFormat = "mlp-checkpoint-v1";

inline nlohmann::json mlp_to_json(const MlpParameters& p) {
  return {{"format", kMlpCheckpointFormat},
          {"layer_sizes", p.layer_sizes},
          {"weights", p.weights},
          {"biases", p.biases}};
}

inline MlpParameters mlp_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kMlpCheckpointFormat)
    throw ConfigError("mlp_from_json: missing or unsupported checkpoint format");
  MlpParameters p;
  p.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (p.layer_sizes.size() < 2 || p.weights.size() != p.layer_sizes.size() - 1 ||
      p.biases.size() != p.weights.size())
    throw ConfigError("mlp_from_json: inconsistent layer structure");
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const std::size_t in = static_cast<std::size_t>(p.layer_sizes[l]);
    const std::size_t out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    if (p.weights[l].size() != in * out || p.biases[l].size() != out)
      throw ConfigError("mlp_from_json: layer " + std::to_string(l) + " has wrong shape");
  }
  return p;
}

}  // namespace constellation
