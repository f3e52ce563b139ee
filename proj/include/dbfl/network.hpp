#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dbfl/errors.hpp"
#include "dbfl/matrix.hpp"
#include "dbfl/rng.hpp"

namespace dbfl {

enum class Activation { Linear, Relu, Sigmoid, Softmax };
enum class Loss { CrossEntropy, MeanSquared };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "softmax") return Activation::Softmax;
  throw ParseError("unknown activation '" + s + "'");
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
  Activation activation = Activation::Linear;

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct DenseNetwork {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  friend bool operator==(const DenseNetwork&, const DenseNetwork&) = default;
};

inline void validate(const DenseNetwork& net) {
  if (net.layers.empty()) throw DimensionMismatch("network has no layers");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw DimensionMismatch("layer " + std::to_string(k) + " parameter sizes do not match its shape");
    }
    if (k > 0 && net.layers[k - 1].out != l.in) {
      throw DimensionMismatch("layer " + std::to_string(k) + " input " + std::to_string(l.in) +
                              " does not chain with previous output " + std::to_string(net.layers[k - 1].out));
    }
    for (double v : l.weights) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite weight in layer " + std::to_string(k));
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite bias in layer " + std::to_string(k));
    }
  }
}

// Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)), zero biases.
inline DenseLayer init_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0), act};
  const double r = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : l.weights) v = rng.uniform(-r, r);
  return l;
}

// Appends the layers of `top` after those of `bottom`.
inline DenseNetwork stack(const DenseNetwork& bottom, const DenseNetwork& top) {
  DenseNetwork out = bottom;
  out.layers.insert(out.layers.end(), top.layers.begin(), top.layers.end());
  validate(out);
  return out;
}

// Splits a network into its first `k` layers and the rest.
inline std::pair<DenseNetwork, DenseNetwork> split(const DenseNetwork& net, std::size_t k) {
  DenseNetwork a, b;
  a.layers.assign(net.layers.begin(), net.layers.begin() + static_cast<std::ptrdiff_t>(k));
  b.layers.assign(net.layers.begin() + static_cast<std::ptrdiff_t>(k), net.layers.end());
  return {a, b};
}

namespace detail {

inline void softmax_row(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

inline void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::Linear: break;
    case Activation::Relu:
      for (std::size_t k = 0; k < z.rows() * z.cols(); ++k) z.data()[k] = std::max(0.0, z.data()[k]);
      break;
    case Activation::Sigmoid:
      for (std::size_t k = 0; k < z.rows() * z.cols(); ++k) z.data()[k] = 1.0 / (1.0 + std::exp(-z.data()[k]));
      break;
    case Activation::Softmax:
      for (std::size_t r = 0; r < z.rows(); ++r) softmax_row(z.row(r));
      break;
  }
}

// Derivative of the activation expressed through its output `a`.
inline double activation_derivative(Activation act, double a) {
  switch (act) {
    case Activation::Linear: return 1.0;
    case Activation::Relu: return a > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return a * (1.0 - a);
    case Activation::Softmax: break;
  }
  throw InvalidArgument("softmax is only supported as the output of a cross-entropy network");
}

// z = x * W^T + b. The inner loop runs over outputs so each output is
// accumulated sequentially over inputs.
inline void affine(const DenseLayer& l, const Matrix& x, Matrix& z, std::vector<double>& wt) {
  wt.resize(l.in * l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    for (std::size_t i = 0; i < l.in; ++i) wt[i * l.out + o] = l.weights[o * l.in + i];
  }
  z = Matrix(x.rows(), l.out);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    double* zr = z.row(b).data();
    const double* xr = x.row(b).data();
    std::copy(l.bias.begin(), l.bias.end(), zr);
    for (std::size_t i = 0; i < l.in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wr = wt.data() + i * l.out;
      for (std::size_t o = 0; o < l.out; ++o) zr[o] += xv * wr[o];
    }
  }
}

inline void check_input(const DenseNetwork& net, const Matrix& x) {
  if (net.layers.empty()) throw DimensionMismatch("network has no layers");
  if (x.cols() != net.input_dim()) {
    throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                            std::to_string(net.input_dim()));
  }
}

}  // namespace detail

// Output of the final layer for every row of `x`.
inline Matrix forward(const DenseNetwork& net, const Matrix& x) {
  detail::check_input(net, x);
  std::vector<double> wt;
  Matrix cur = x, next;
  for (const auto& l : net.layers) {
    detail::affine(l, cur, next, wt);
    detail::apply_activation(l.activation, next);
    std::swap(cur, next);
  }
  return cur;
}

// Row-stochastic matrix of class probabilities, one row per sample.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;
  explicit ProbabilityMatrix(Matrix values, double tol = 1e-9) : values_(std::move(values)) {
    for (std::size_t r = 0; r < values_.rows(); ++r) {
      double sum = 0.0;
      for (double v : values_.row(r)) {
        if (!(v >= 0.0 && v <= 1.0 + tol)) throw InvalidArgument("probability outside [0, 1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol) throw InvalidArgument("probability row does not sum to 1");
    }
  }

  std::size_t rows() const { return values_.rows(); }
  std::size_t cols() const { return values_.cols(); }
  double operator()(std::size_t r, std::size_t c) const { return values_(r, c); }
  std::span<const double> row(std::size_t r) const { return values_.row(r); }
  const Matrix& matrix() const { return values_; }

  friend bool operator==(const ProbabilityMatrix&, const ProbabilityMatrix&) = default;

 private:
  Matrix values_;
};

// Softmax of the final layer's pre-activation, whatever its declared activation.
inline ProbabilityMatrix predict_proba(const DenseNetwork& net, const Matrix& x) {
  detail::check_input(net, x);
  std::vector<double> wt;
  Matrix cur = x, next;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    detail::affine(l, cur, next, wt);
    if (k + 1 < net.layers.size()) {
      detail::apply_activation(l.activation, next);
    } else {
      detail::apply_activation(Activation::Softmax, next);
    }
    std::swap(cur, next);
  }
  return ProbabilityMatrix(std::move(cur));
}

inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline double accuracy(const std::vector<int>& predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DimensionMismatch("prediction / label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

inline double accuracy(const DenseNetwork& net, const Matrix& x, std::span<const int> labels) {
  return accuracy(argmax_rows(forward(net, x)), labels);
}

// Parameter gradients of the mean loss over a batch.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
  double loss = 0.0;
};

namespace detail {

struct Targets {
  std::span<const int> labels;      // cross-entropy
  const Matrix* values = nullptr;   // mean squared error
};

inline void check_loss_shape(const DenseNetwork& net, Loss loss) {
  const Activation last = net.layers.back().activation;
  if (loss == Loss::CrossEntropy && last != Activation::Softmax) {
    throw InvalidArgument("cross-entropy requires a softmax output layer");
  }
  if (loss == Loss::MeanSquared && last == Activation::Softmax) {
    throw InvalidArgument("mean squared error does not support a softmax output layer");
  }
}

// Reusable buffers for one training run.
struct Workspace {
  std::vector<Matrix> acts;    // acts[0] = input batch, acts[k+1] = output of layer k
  std::vector<double> wt;
  Matrix delta, delta_prev;
};

inline void forward_cached(const DenseNetwork& net, Workspace& ws) {
  ws.acts.resize(net.layers.size() + 1);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    affine(net.layers[k], ws.acts[k], ws.acts[k + 1], ws.wt);
    apply_activation(net.layers[k].activation, ws.acts[k + 1]);
  }
}

// Fills `g` with the gradients for the batch in ws.acts[0]. Targets are
// indexed by batch row through `rows`.
inline void backward(const DenseNetwork& net, Loss loss, const Targets& t, std::span<const std::size_t> rows,
                     Workspace& ws, Gradients& g) {
  const std::size_t L = net.layers.size();
  const Matrix& out = ws.acts[L];
  const std::size_t B = out.rows();
  const double inv_b = 1.0 / static_cast<double>(B);
  ws.delta = Matrix(B, out.cols());
  g.loss = 0.0;
  if (loss == Loss::CrossEntropy) {
    for (std::size_t b = 0; b < B; ++b) {
      const int y = t.labels[rows[b]];
      for (std::size_t c = 0; c < out.cols(); ++c) ws.delta(b, c) = out(b, c) * inv_b;
      ws.delta(b, static_cast<std::size_t>(y)) -= inv_b;
      g.loss -= std::log(std::max(out(b, static_cast<std::size_t>(y)), 1e-300));
    }
    g.loss *= inv_b;
  } else {
    const double scale = 1.0 / static_cast<double>(B * out.cols());
    const Activation act = net.layers.back().activation;
    for (std::size_t b = 0; b < B; ++b) {
      const auto target = t.values->row(rows[b]);
      for (std::size_t c = 0; c < out.cols(); ++c) {
        const double diff = out(b, c) - target[c];
        g.loss += diff * diff;
        ws.delta(b, c) = 2.0 * diff * scale * activation_derivative(act, out(b, c));
      }
    }
    g.loss *= scale;
  }

  g.weights.resize(L);
  g.bias.resize(L);
  for (std::size_t k = L; k-- > 0;) {
    const auto& l = net.layers[k];
    const Matrix& in = ws.acts[k];
    auto& gw = g.weights[k];
    auto& gb = g.bias[k];
    gw.assign(l.in * l.out, 0.0);
    gb.assign(l.out, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const double* xr = in.row(b).data();
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = ws.delta(b, o);
        gb[o] += d;
        if (d == 0.0) continue;
        double* gr = gw.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) gr[i] += d * xr[i];
      }
    }
    if (k == 0) break;
    ws.delta_prev = Matrix(B, l.in);
    const Activation prev_act = net.layers[k - 1].activation;
    for (std::size_t b = 0; b < B; ++b) {
      double* dp = ws.delta_prev.row(b).data();
      for (std::size_t o = 0; o < l.out; ++o) {
        const double d = ws.delta(b, o);
        if (d == 0.0) continue;
        const double* wr = l.weights.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) dp[i] += d * wr[i];
      }
      const double* a = in.row(b).data();
      for (std::size_t i = 0; i < l.in; ++i) dp[i] *= activation_derivative(prev_act, a[i]);
    }
    std::swap(ws.delta, ws.delta_prev);
  }
}

inline Gradients gradients(const DenseNetwork& net, const Matrix& x, Loss loss, const Targets& t) {
  detail::check_input(net, x);
  check_loss_shape(net, loss);
  Workspace ws;
  ws.acts.resize(net.layers.size() + 1);
  ws.acts[0] = x;
  forward_cached(net, ws);
  std::vector<std::size_t> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Gradients g;
  backward(net, loss, t, rows, ws, g);
  return g;
}

}  // namespace detail

inline Gradients classifier_gradients(const DenseNetwork& net, const Matrix& x, std::span<const int> labels) {
  return detail::gradients(net, x, Loss::CrossEntropy, {labels, nullptr});
}

inline Gradients regression_gradients(const DenseNetwork& net, const Matrix& x, const Matrix& targets) {
  return detail::gradients(net, x, Loss::MeanSquared, {{}, &targets});
}

// Mean cross-entropy of a softmax network over a labelled set.
inline double cross_entropy(const DenseNetwork& net, const Matrix& x, std::span<const int> labels) {
  const Matrix p = forward(net, x);
  double sum = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    sum -= std::log(std::max(p(r, static_cast<std::size_t>(labels[r])), 1e-300));
  }
  return p.rows() ? sum / static_cast<double>(p.rows()) : 0.0;
}

// Mean over all entries of the squared difference between output and target.
inline double mean_squared_error(const DenseNetwork& net, const Matrix& x, const Matrix& targets) {
  const Matrix out = forward(net, x);
  double sum = 0.0;
  for (std::size_t k = 0; k < out.rows() * out.cols(); ++k) {
    const double d = out.data()[k] - targets.data()[k];
    sum += d * d;
  }
  return out.rows() ? sum / static_cast<double>(out.rows() * out.cols()) : 0.0;
}

struct SgdOptions {
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  int epochs = 1;
  std::uint64_t seed = 0;
  // When set, each epoch visits samples in an order that depends only on
  // (seed, epoch); otherwise samples are visited in input order.
  bool shuffle = true;
};

inline std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  return rng.permutation(n);
}

namespace detail {

inline void sgd(DenseNetwork& net, const Matrix& x, Loss loss, const Targets& t, const SgdOptions& opt) {
  check_input(net, x);
  check_loss_shape(net, loss);
  if (opt.batch_size == 0) throw InvalidArgument("batch size must be positive");
  const std::size_t n = x.rows();
  Workspace ws;
  ws.acts.resize(net.layers.size() + 1);
  Gradients g;
  std::vector<std::size_t> order(n);
  for (int e = 0; e < opt.epochs; ++e) {
    if (opt.shuffle) {
      order = epoch_order(opt.seed, e, n);
    } else {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
    }
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t end = std::min(n, start + opt.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      ws.acts[0] = take_rows(x, rows);
      forward_cached(net, ws);
      backward(net, loss, t, rows, ws, g);
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& l = net.layers[k];
        for (std::size_t j = 0; j < l.weights.size(); ++j) l.weights[j] -= opt.learning_rate * g.weights[k][j];
        for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= opt.learning_rate * g.bias[k][j];
      }
    }
  }
}

}  // namespace detail

inline void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes) {
  if (labels.size() != rows) {
    throw DimensionMismatch("label count " + std::to_string(labels.size()) + " != sample count " +
                            std::to_string(rows));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

// Continues training a softmax classifier with mini-batch SGD on cross-entropy.
inline void fit_classifier(DenseNetwork& net, const Matrix& x, std::span<const int> labels, const SgdOptions& opt) {
  check_labels(labels, x.rows(), net.output_dim());
  detail::sgd(net, x, Loss::CrossEntropy, {labels, nullptr}, opt);
}

// Continues training a network to reproduce `targets` under mean squared error.
inline void fit_regression(DenseNetwork& net, const Matrix& x, const Matrix& targets, const SgdOptions& opt) {
  if (targets.rows() != x.rows() || targets.cols() != net.output_dim()) {
    throw DimensionMismatch("regression targets do not match the network output");
  }
  detail::sgd(net, x, Loss::MeanSquared, {{}, &targets}, opt);
}

struct ClassifierConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_units = 80;  // 0 builds a single softmax layer
  std::size_t num_classes = 9;
  double learning_rate = 0.01;
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

inline void validate(const ClassifierConfig& c) {
  if (c.input_dim == 0 || c.num_classes == 0 || c.batch_size == 0 || !(c.learning_rate > 0.0) || c.epochs < 0) {
    throw InvalidArgument("classifier config: dimensions, batch size and learning rate must be positive");
  }
}

inline DenseNetwork init_classifier(const ClassifierConfig& c) {
  validate(c);
  Rng rng(derive_seed(c.seed, Stream::ModelInit));
  DenseNetwork net;
  if (c.hidden_units == 0) {
    net.layers.push_back(init_layer(c.input_dim, c.num_classes, Activation::Softmax, rng));
  } else {
    net.layers.push_back(init_layer(c.input_dim, c.hidden_units, Activation::Relu, rng));
    net.layers.push_back(init_layer(c.hidden_units, c.num_classes, Activation::Softmax, rng));
  }
  return net;
}

inline SgdOptions sgd_options(const ClassifierConfig& c) {
  return {c.learning_rate, c.batch_size, c.epochs, derive_seed(c.seed, Stream::LocalTraining), true};
}

inline DenseNetwork train_classifier(const ClassifierConfig& c, const Matrix& features, std::span<const int> labels) {
  validate(c);
  if (features.rows() == 0) throw EmptyDataset("train_classifier: no samples");
  if (features.cols() != c.input_dim) {
    throw DimensionMismatch("train_classifier: features have " + std::to_string(features.cols()) +
                            " columns, config expects " + std::to_string(c.input_dim));
  }
  DenseNetwork net = init_classifier(c);
  fit_classifier(net, features, labels, sgd_options(c));
  return net;
}

struct AutoencoderConfig {
  std::size_t input_dim = 1;
  std::size_t latent_dim = 25;
  double learning_rate = 0.01;
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Activation latent_activation = Activation::Sigmoid;
  Activation output_activation = Activation::Linear;
};

struct Autoencoder {
  DenseNetwork encoder;
  DenseNetwork decoder;
};

inline Autoencoder init_autoencoder(const AutoencoderConfig& c) {
  if (c.input_dim == 0 || c.latent_dim == 0 || c.latent_dim > c.input_dim) {
    throw InvalidArgument("autoencoder config: need 0 < latent_dim <= input_dim");
  }
  if (c.output_activation == Activation::Softmax || c.latent_activation == Activation::Softmax) {
    throw InvalidArgument("autoencoder layers cannot use softmax");
  }
  Rng rng(derive_seed(c.seed, Stream::Autoencoder));
  Autoencoder ae;
  ae.encoder.layers.push_back(init_layer(c.input_dim, c.latent_dim, c.latent_activation, rng));
  ae.decoder.layers.push_back(init_layer(c.latent_dim, c.input_dim, c.output_activation, rng));
  return ae;
}

inline Autoencoder train_autoencoder(const AutoencoderConfig& c, const Matrix& features) {
  if (features.rows() == 0) throw EmptyDataset("train_autoencoder: no samples");
  if (features.cols() != c.input_dim) {
    throw DimensionMismatch("train_autoencoder: features have " + std::to_string(features.cols()) +
                            " columns, config expects " + std::to_string(c.input_dim));
  }
  Autoencoder ae = init_autoencoder(c);
  DenseNetwork full = stack(ae.encoder, ae.decoder);
  fit_regression(full, features, features,
                 {c.learning_rate, c.batch_size, c.epochs, derive_seed(c.seed, Stream::LocalTraining), true});
  auto [enc, dec] = split(full, ae.encoder.layers.size());
  return {std::move(enc), std::move(dec)};
}

inline Matrix encode(const DenseNetwork& encoder, const Matrix& features) { return forward(encoder, features); }

// Text dump: a header line, then per layer its shape and activation followed
// by row-major weights and biases as hexadecimal floats, which round-trip
// bit for bit.
inline void save_network(std::ostream& os, const DenseNetwork& net) {
  os << "dbfl-network 1\n" << net.layers.size() << "\n";
  char buf[64];
  auto put = [&](double v) {
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    os.write(buf, r.ptr - buf);
  };
  for (const auto& l : net.layers) {
    os << l.in << ' ' << l.out << ' ' << to_string(l.activation) << '\n';
    for (std::size_t k = 0; k < l.weights.size(); ++k) {
      if (k) os << ' ';
      put(l.weights[k]);
    }
    os << '\n';
    for (std::size_t k = 0; k < l.bias.size(); ++k) {
      if (k) os << ' ';
      put(l.bias[k]);
    }
    os << '\n';
  }
}

inline DenseNetwork load_network(std::istream& is) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(is >> magic >> version >> count) || magic != "dbfl-network" || version != 1) {
    throw ParseError("not a dbfl-network v1 dump");
  }
  auto get = [&](double& v) {
    std::string tok;
    if (!(is >> tok)) throw ParseError("truncated network dump");
    const char* first = tok.data();
    bool neg = false;
    if (*first == '-') {
      neg = true;
      ++first;
    }
    auto r = std::from_chars(first, tok.data() + tok.size(), v, std::chars_format::hex);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) throw ParseError("bad number '" + tok + "'");
    if (neg) v = -v;
  };
  DenseNetwork net;
  for (std::size_t k = 0; k < count; ++k) {
    DenseLayer l;
    std::string act;
    if (!(is >> l.in >> l.out >> act)) throw ParseError("truncated layer header");
    l.activation = activation_from_string(act);
    l.weights.resize(l.in * l.out);
    l.bias.resize(l.out);
    for (double& v : l.weights) get(v);
    for (double& v : l.bias) get(v);
    net.layers.push_back(std::move(l));
  }
  validate(net);
  return net;
}

}  // namespace dbfl
