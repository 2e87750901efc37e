#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "metabbo/io.hpp"
#include "metabbo/metadataset.hpp"
#include "metabbo/problems.hpp"
#include "metabbo/rng.hpp"

namespace metabbo {

inline constexpr const char* kEmbeddingFormat = "meta-bbo-ae-v1";

enum class Activation { tanh, relu };

inline std::string activation_name(Activation a) {
  return a == Activation::tanh ? "tanh" : "relu";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

/// Fully connected network shape: layer sizes from input to output, hidden
/// activation, and an optional sigmoid-bounded output box.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation hidden_activation = Activation::tanh;
  std::optional<BoxDomain> output_box;

  void validate() const {
    if (layer_sizes.size() < 2)
      throw std::invalid_argument("MlpSpec: need at least input and output layers");
    for (const int s : layer_sizes)
      if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
    if (output_box && output_box->dim() != layer_sizes.back())
      throw std::invalid_argument("MlpSpec: output box dimension must match the last layer");
  }

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
};

struct MlpLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

namespace detail {

inline Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& a) {
  if (act == Activation::tanh) return a.array().tanh();
  return a.cwiseMax(0.0);
}

inline Eigen::MatrixXd activation_derivative(Activation act, const Eigen::MatrixXd& a,
                                             const Eigen::MatrixXd& h) {
  if (act == Activation::tanh) return 1.0 - h.array().square();
  return (a.array() > 0.0).cast<double>();
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) {
  return (1.0 + (-a.array()).exp()).inverse();
}

}  // namespace detail

/// Forward activations kept for backpropagation: inputs[l] feeds layer l,
/// pre[l] is its affine output, and sig holds the output sigmoid when the
/// spec bounds the output.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
  Eigen::MatrixXd sig;
};

struct Mlp {
  MlpSpec spec;
  std::vector<MlpLayer> layers;

  /// Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, MlpCache* cache = nullptr) const {
    if (input.rows() != spec.input_dim())
      throw std::invalid_argument("Mlp: input dimension mismatch");
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Eigen::MatrixXd h = input;
    const std::size_t depth = layers.size();
    for (std::size_t l = 0; l < depth; ++l) {
      if (cache) cache->inputs.push_back(h);
      Eigen::MatrixXd a = (layers[l].W * h).colwise() + layers[l].b;
      if (cache) cache->pre.push_back(a);
      if (l + 1 < depth) {
        h = detail::apply_activation(spec.hidden_activation, a);
      } else if (spec.output_box) {
        Eigen::MatrixXd s = detail::sigmoid(a);
        if (cache) cache->sig = s;
        const Eigen::VectorXd width = spec.output_box->width();
        h = (s.array().colwise() * width.array()).colwise() + spec.output_box->lower.array();
      } else {
        h = std::move(a);
      }
    }
    return h;
  }

  /// Accumulates parameter gradients from the output gradient and returns the
  /// gradient with respect to the network input.
  Eigen::MatrixXd backward(const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                           std::vector<MlpLayer>& grads) const {
    const std::size_t depth = layers.size();
    Eigen::MatrixXd g = output_grad;
    for (std::size_t l = depth; l-- > 0;) {
      Eigen::MatrixXd da;
      if (l + 1 == depth) {
        if (spec.output_box) {
          const Eigen::VectorXd width = spec.output_box->width();
          const Eigen::ArrayXXd dsig = cache.sig.array() * (1.0 - cache.sig.array());
          da = g.array() * (dsig.colwise() * width.array());
        } else {
          da = g;
        }
      } else {
        const Eigen::MatrixXd h =
            detail::apply_activation(spec.hidden_activation, cache.pre[l]);
        da = g.array() * detail::activation_derivative(spec.hidden_activation, cache.pre[l], h)
                             .array();
      }
      grads[l].W += da * cache.inputs[l].transpose();
      grads[l].b += da.rowwise().sum();
      g = layers[l].W.transpose() * da;
    }
    return g;
  }
};

/// Linear decoder x_hat = A z + b; outputs are clipped to the domain at
/// inference time.
struct LinearDecoder {
  Eigen::MatrixXd A;  // n_x x n_z
  Eigen::VectorXd b;  // n_x
};

/// Encoder/decoder pair over a box domain. The encoder consumes inputs
/// normalized to [0, 1]^{n_x} by the affine map of the domain and produces
/// latent points in [0, 1]^{n_z}; the decoder maps latents back into the
/// domain.
struct Embedding {
  int n_x = 0;
  int n_z = 0;
  BoxDomain input_domain{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  Mlp encoder;
  std::variant<Mlp, LinearDecoder> decoder;

  bool has_linear_decoder() const { return std::holds_alternative<LinearDecoder>(decoder); }
};

inline Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& x_cols, const BoxDomain& domain) {
  const Eigen::VectorXd width = domain.width();
  return ((x_cols.array().colwise() - domain.lower.array()).colwise() / width.array());
}

inline Eigen::VectorXd encode(const Embedding& e, const Eigen::VectorXd& x) {
  if (x.size() != e.n_x) throw std::invalid_argument("encode: dimension mismatch");
  return e.encoder.forward(normalize_inputs(x, e.input_domain));
}

inline Eigen::VectorXd decode(const Embedding& e, const Eigen::VectorXd& z) {
  if (z.size() != e.n_z) throw std::invalid_argument("decode: dimension mismatch");
  if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder))
    return clip_to_domain(lin->A * z + lin->b, e.input_domain);
  return std::get<Mlp>(e.decoder).forward(z);
}

/// Weight of sample k is lambda^rank(k) with ranks assigned by ascending
/// objective value (ties broken by original index); the best sample always
/// receives weight 1, including in the lambda -> 0 limit (0^0 := 1).
inline Eigen::VectorXd rank_weights(const Eigen::VectorXd& f_values, double lambda) {
  if (f_values.size() < 1) throw std::invalid_argument("rank_weights: need at least one value");
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw std::invalid_argument("rank_weights: lambda must lie in [0, 1)");
  const Eigen::Index k = f_values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return f_values[a] < f_values[b]; });
  Eigen::VectorXd weights(k);
  for (Eigen::Index rank = 0; rank < k; ++rank)
    weights[order[static_cast<std::size_t>(rank)]] =
        rank == 0 ? 1.0 : std::pow(lambda, static_cast<double>(rank));
  return weights;
}

namespace detail {

/// Training-path reconstruction: the linear decoder is left unclipped here so
/// the objective stays differentiable; decode() clips at inference.
inline Eigen::MatrixXd reconstruct_for_training(const Embedding& e, const Eigen::MatrixXd& u_cols,
                                                MlpCache* enc_cache = nullptr,
                                                MlpCache* dec_cache = nullptr,
                                                Eigen::MatrixXd* latent_out = nullptr) {
  Eigen::MatrixXd z = e.encoder.forward(u_cols, enc_cache);
  if (latent_out) *latent_out = z;
  if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder))
    return (lin->A * z).colwise() + lin->b;
  return std::get<Mlp>(e.decoder).forward(z, dec_cache);
}

struct FlatSamples {
  Eigen::MatrixXd x_cols;  // n_x x T, raw coordinates
  Eigen::MatrixXd u_cols;  // n_x x T, normalized to [0, 1]
  Eigen::VectorXd weights;
  int instance_count = 0;
};

inline FlatSamples flatten_dataset(const MetaDataset& data, double lambda) {
  if (data.instances.empty()) throw std::invalid_argument("autoencoder: dataset is empty");
  const Eigen::Index total =
      std::accumulate(data.instances.begin(), data.instances.end(), Eigen::Index{0},
                      [](Eigen::Index acc, const MetaInstance& m) { return acc + m.points.rows(); });
  FlatSamples flat;
  flat.x_cols.resize(data.n_x, total);
  flat.weights.resize(total);
  flat.instance_count = static_cast<int>(data.instances.size());
  Eigen::Index col = 0;
  for (const auto& instance : data.instances) {
    const Eigen::VectorXd w = rank_weights(instance.values, lambda);
    for (Eigen::Index k = 0; k < instance.points.rows(); ++k) {
      flat.x_cols.col(col) = instance.points.row(k).transpose();
      flat.weights[col] = w[k];
      ++col;
    }
  }
  flat.u_cols = normalize_inputs(flat.x_cols, data.domain);
  return flat;
}

}  // namespace detail

/// Average over instances of the rank-weighted squared reconstruction error.
inline double weighted_loss(const Embedding& e, const MetaDataset& data, double lambda) {
  const detail::FlatSamples flat = detail::flatten_dataset(data, lambda);
  double total = 0.0;
  for (Eigen::Index s = 0; s < flat.x_cols.cols(); ++s) {
    const Eigen::VectorXd reconstructed = decode(e, encode(e, flat.x_cols.col(s)));
    total += flat.weights[s] * (flat.x_cols.col(s) - reconstructed).squaredNorm();
  }
  return total / flat.instance_count;
}

enum class DecoderKind { mlp, linear };

struct EmbeddingSpec {
  MlpSpec encoder;
  MlpSpec decoder;  // ignored when decoder_kind == linear
  DecoderKind decoder_kind = DecoderKind::mlp;
  BoxDomain domain{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};

  void validate() const {
    encoder.validate();
    if (encoder.input_dim() != domain.dim())
      throw std::invalid_argument("EmbeddingSpec: encoder input must match the domain dimension");
    if (decoder_kind == DecoderKind::mlp) {
      decoder.validate();
      if (decoder.input_dim() != encoder.output_dim() ||
          decoder.output_dim() != encoder.input_dim())
        throw std::invalid_argument("EmbeddingSpec: decoder must mirror the encoder dimensions");
    }
  }
};

/// The architecture used for the benchmark studies: two hidden layers of 128
/// and 64 units, mirrored in the decoder, tanh activations, sigmoid-bounded
/// outputs on both sides.
inline EmbeddingSpec default_embedding_spec(int n_x, int n_z, const BoxDomain& domain,
                                            DecoderKind kind = DecoderKind::mlp) {
  if (n_z < 1 || n_z >= n_x)
    throw std::invalid_argument("default_embedding_spec: require 1 <= n_z < n_x");
  EmbeddingSpec spec;
  spec.encoder.layer_sizes = {n_x, 128, 64, n_z};
  spec.encoder.output_box = BoxDomain::unit(n_z);
  spec.decoder.layer_sizes = {n_z, 64, 128, n_x};
  spec.decoder.output_box = domain;
  spec.decoder_kind = kind;
  spec.domain = domain;
  return spec;
}

namespace detail {

inline void init_mlp(Mlp& mlp, RngStream& rng) {
  mlp.layers.clear();
  const auto& sizes = mlp.spec.layer_sizes;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    MlpLayer layer;
    const int fan_in = sizes[l - 1];
    const int fan_out = sizes[l];
    const double amplitude = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.W.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.W(r, c) = rng.uniform(-amplitude, amplitude);
    layer.b = Eigen::VectorXd::Zero(fan_out);
    mlp.layers.push_back(std::move(layer));
  }
}

}  // namespace detail

/// Symmetric uniform fan-in initialization, deterministic in the stream.
inline Embedding initialize_embedding(const EmbeddingSpec& spec, RngStream rng) {
  spec.validate();
  Embedding e;
  e.n_x = spec.encoder.input_dim();
  e.n_z = spec.encoder.output_dim();
  e.input_domain = spec.domain;
  e.encoder.spec = spec.encoder;
  detail::init_mlp(e.encoder, rng);
  if (spec.decoder_kind == DecoderKind::mlp) {
    Mlp dec;
    dec.spec = spec.decoder;
    detail::init_mlp(dec, rng);
    e.decoder = std::move(dec);
  } else {
    LinearDecoder lin;
    const double amplitude = 1.0 / std::sqrt(static_cast<double>(e.n_z));
    lin.A.resize(e.n_x, e.n_z);
    for (int r = 0; r < e.n_x; ++r)
      for (int c = 0; c < e.n_z; ++c) lin.A(r, c) = rng.uniform(-amplitude, amplitude);
    lin.b = Eigen::VectorXd::Zero(e.n_x);
    e.decoder = std::move(lin);
  }
  return e;
}

struct TrainConfig {
  double lambda = 0.5;
  int epochs = 2000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;  // fraction of the rate linearly removed by the last epoch
  RngStream seed{0, 0};

  void validate() const {
    if (!(lambda >= 0.0 && lambda < 1.0))
      throw std::invalid_argument("TrainConfig: lambda must lie in [0, 1)");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(lr_decay >= 0.0 && lr_decay <= 1.0))
      throw std::invalid_argument("TrainConfig: lr_decay must lie in [0, 1]");
  }
};

namespace detail {

struct MlpGrads {
  std::vector<MlpLayer> encoder;
  std::vector<MlpLayer> decoder;  // single entry {A, b} for a linear decoder

  static MlpGrads zeros_like(const Embedding& e) {
    MlpGrads g;
    for (const auto& layer : e.encoder.layers)
      g.encoder.push_back(MlpLayer{Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                                   Eigen::VectorXd::Zero(layer.b.size())});
    if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
      g.decoder.push_back(MlpLayer{Eigen::MatrixXd::Zero(lin->A.rows(), lin->A.cols()),
                                   Eigen::VectorXd::Zero(lin->b.size())});
    } else {
      for (const auto& layer : std::get<Mlp>(e.decoder).layers)
        g.decoder.push_back(MlpLayer{Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                                     Eigen::VectorXd::Zero(layer.b.size())});
    }
    return g;
  }
};

/// Training objective on a batch (columns of u/x), scaled by `scale`:
/// scale * sum_s w_s |x_s - reconstruct(x_s)|^2. Returns the loss and
/// accumulates parameter gradients.
inline double weighted_batch_loss_grad(const Embedding& e, const Eigen::MatrixXd& u_cols,
                                       const Eigen::MatrixXd& x_cols,
                                       const Eigen::VectorXd& weights, double scale,
                                       MlpGrads& grads) {
  MlpCache enc_cache, dec_cache;
  Eigen::MatrixXd latent;
  const Eigen::MatrixXd reconstructed =
      reconstruct_for_training(e, u_cols, &enc_cache, &dec_cache, &latent);
  const Eigen::MatrixXd residual = reconstructed - x_cols;
  double loss = 0.0;
  for (Eigen::Index s = 0; s < residual.cols(); ++s)
    loss += weights[s] * residual.col(s).squaredNorm();
  loss *= scale;

  Eigen::MatrixXd g_out =
      residual.array().rowwise() * (2.0 * scale * weights.transpose().array());
  Eigen::MatrixXd g_latent;
  if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
    grads.decoder[0].W += g_out * latent.transpose();
    grads.decoder[0].b += g_out.rowwise().sum();
    g_latent = lin->A.transpose() * g_out;
  } else {
    g_latent = std::get<Mlp>(e.decoder).backward(dec_cache, g_out, grads.decoder);
  }
  e.encoder.backward(enc_cache, g_latent, grads.encoder);
  return loss;
}

inline double full_training_loss(const Embedding& e, const FlatSamples& flat) {
  const Eigen::MatrixXd reconstructed = reconstruct_for_training(e, flat.u_cols);
  double total = 0.0;
  for (Eigen::Index s = 0; s < flat.x_cols.cols(); ++s)
    total += flat.weights[s] * (reconstructed.col(s) - flat.x_cols.col(s)).squaredNorm();
  return total / flat.instance_count;
}

struct AdamState {
  MlpGrads m;
  MlpGrads v;
  long t = 0;
};

inline void adam_update_layer(MlpLayer& param, const MlpLayer& grad, MlpLayer& m, MlpLayer& v,
                              double lr, long t) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  m.W = beta1 * m.W + (1.0 - beta1) * grad.W;
  v.W = beta2 * v.W.array() + (1.0 - beta2) * grad.W.array().square();
  param.W.array() -=
      lr * (m.W.array() / correction1) / ((v.W.array() / correction2).sqrt() + eps);
  m.b = beta1 * m.b + (1.0 - beta1) * grad.b;
  v.b = beta2 * v.b.array() + (1.0 - beta2) * grad.b.array().square();
  param.b.array() -=
      lr * (m.b.array() / correction1) / ((v.b.array() / correction2).sqrt() + eps);
}

inline void adam_step(Embedding& e, const MlpGrads& grads, AdamState& state, double lr) {
  ++state.t;
  for (std::size_t l = 0; l < e.encoder.layers.size(); ++l)
    adam_update_layer(e.encoder.layers[l], grads.encoder[l], state.m.encoder[l],
                      state.v.encoder[l], lr, state.t);
  if (auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
    MlpLayer view{lin->A, lin->b};
    adam_update_layer(view, grads.decoder[0], state.m.decoder[0], state.v.decoder[0], lr,
                      state.t);
    lin->A = std::move(view.W);
    lin->b = std::move(view.b);
  } else {
    auto& dec = std::get<Mlp>(e.decoder);
    for (std::size_t l = 0; l < dec.layers.size(); ++l)
      adam_update_layer(dec.layers[l], grads.decoder[l], state.m.decoder[l], state.v.decoder[l],
                        lr, state.t);
  }
}

}  // namespace detail

/// Mini-batch Adam on the rank-weighted reconstruction loss. Deterministic in
/// cfg.seed. The returned embedding never scores worse on the full training
/// set than the initialization; non-finite batch losses abort with an error
/// suggesting a smaller learning rate.
inline Embedding train_autoencoder(const EmbeddingSpec& spec, const MetaDataset& data,
                                   const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (spec.encoder.input_dim() != data.n_x)
    throw std::invalid_argument("train_autoencoder: dataset dimension does not match encoder");

  const detail::FlatSamples flat = detail::flatten_dataset(data, cfg.lambda);
  Embedding e = initialize_embedding(spec, cfg.seed.derive(0));
  if (cfg.epochs == 0) return e;

  const Embedding initial_model = e;
  const double initial_loss = detail::full_training_loss(e, flat);

  const Eigen::Index total = flat.x_cols.cols();
  detail::AdamState adam{detail::MlpGrads::zeros_like(e), detail::MlpGrads::zeros_like(e), 0};
  RngStream shuffle_rng = cfg.seed.derive(1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.learning_rate * (1.0 - cfg.lr_decay * progress);
    for (Eigen::Index i = total - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[shuffle_rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    for (Eigen::Index start = 0; start < total; start += cfg.batch_size) {
      const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, total - start);
      Eigen::MatrixXd u_batch(flat.u_cols.rows(), batch);
      Eigen::MatrixXd x_batch(flat.x_cols.rows(), batch);
      Eigen::VectorXd w_batch(batch);
      for (Eigen::Index s = 0; s < batch; ++s) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + s)];
        u_batch.col(s) = flat.u_cols.col(src);
        x_batch.col(s) = flat.x_cols.col(src);
        w_batch[s] = flat.weights[src];
      }
      // Unbiased estimate of the full loss: scale by T / (N * B).
      const double scale = static_cast<double>(total) /
                           (static_cast<double>(flat.instance_count) * batch);
      detail::MlpGrads grads = detail::MlpGrads::zeros_like(e);
      const double batch_loss =
          detail::weighted_batch_loss_grad(e, u_batch, x_batch, w_batch, scale, grads);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error(
            "train_autoencoder: loss diverged; try a smaller learning rate");
      detail::adam_step(e, grads, adam, lr);
    }
  }

  const double final_loss = detail::full_training_loss(e, flat);
  if (!std::isfinite(final_loss))
    throw std::runtime_error("train_autoencoder: loss diverged; try a smaller learning rate");
  if (final_loss > initial_loss) return initial_model;
  return e;
}

inline long count_parameters(const Embedding& e) {
  long total = 0;
  for (const auto& layer : e.encoder.layers) total += layer.W.size() + layer.b.size();
  if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
    total += lin->A.size() + lin->b.size();
  } else {
    for (const auto& layer : std::get<Mlp>(e.decoder).layers)
      total += layer.W.size() + layer.b.size();
  }
  return total;
}

namespace detail {

inline std::vector<double*> parameter_pointers(Embedding& e) {
  std::vector<double*> params;
  auto add_layer = [&params](Eigen::MatrixXd& W, Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < W.size(); ++i) params.push_back(W.data() + i);
    for (Eigen::Index i = 0; i < b.size(); ++i) params.push_back(b.data() + i);
  };
  for (auto& layer : e.encoder.layers) add_layer(layer.W, layer.b);
  if (auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
    add_layer(lin->A, lin->b);
  } else {
    for (auto& layer : std::get<Mlp>(e.decoder).layers) add_layer(layer.W, layer.b);
  }
  return params;
}

inline std::vector<double> flatten_grads(const Embedding& e, const MlpGrads& grads) {
  std::vector<double> flat;
  auto add_layer = [&flat](const MlpLayer& layer) {
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) flat.push_back(*(layer.W.data() + i));
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) flat.push_back(*(layer.b.data() + i));
  };
  for (const auto& layer : grads.encoder) add_layer(layer);
  for (const auto& layer : grads.decoder) add_layer(layer);
  (void)e;
  return flat;
}

}  // namespace detail

/// Compares the analytic gradient of the weighted reconstruction loss against
/// central finite differences (step 1e-6) on a freshly initialized small
/// network; returns the maximum relative disagreement over all parameters.
/// `corrupt_layer` >= 0 flips the sign of that layer's analytic gradient
/// (layers numbered encoder first, then decoder) and serves as a negative
/// control for the check itself.
inline double gradient_check(const EmbeddingSpec& spec, const Eigen::MatrixXd& sample_points,
                             const Eigen::VectorXd& sample_weights, RngStream rng,
                             int corrupt_layer = -1) {
  spec.validate();
  if (sample_points.rows() < 1 || sample_points.cols() != spec.encoder.input_dim())
    throw std::invalid_argument("gradient_check: samples must be rows of encoder inputs");
  if (sample_weights.size() != sample_points.rows())
    throw std::invalid_argument("gradient_check: one weight per sample required");

  Embedding e = initialize_embedding(spec, rng);
  if (count_parameters(e) > 200)
    throw std::invalid_argument("gradient_check: network exceeds 200 parameters");

  const Eigen::MatrixXd x_cols = sample_points.transpose();
  const Eigen::MatrixXd u_cols = normalize_inputs(x_cols, e.input_domain);

  detail::MlpGrads grads = detail::MlpGrads::zeros_like(e);
  detail::weighted_batch_loss_grad(e, u_cols, x_cols, sample_weights, 1.0, grads);
  if (corrupt_layer >= 0) {
    const auto encoder_layers = static_cast<int>(grads.encoder.size());
    if (corrupt_layer < encoder_layers) {
      grads.encoder[static_cast<std::size_t>(corrupt_layer)].W *= -1.0;
      grads.encoder[static_cast<std::size_t>(corrupt_layer)].b *= -1.0;
    } else {
      const auto d = static_cast<std::size_t>(corrupt_layer - encoder_layers);
      if (d >= grads.decoder.size())
        throw std::invalid_argument("gradient_check: corrupt_layer out of range");
      grads.decoder[d].W *= -1.0;
      grads.decoder[d].b *= -1.0;
    }
  }
  const std::vector<double> analytic = detail::flatten_grads(e, grads);

  const std::vector<double*> params = detail::parameter_pointers(e);
  const auto loss_at = [&]() {
    detail::MlpGrads scratch = detail::MlpGrads::zeros_like(e);
    return detail::weighted_batch_loss_grad(e, u_cols, x_cols, sample_weights, 1.0, scratch);
  };

  constexpr double kStep = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = *params[p];
    *params[p] = saved + kStep;
    const double plus = loss_at();
    *params[p] = saved - kStep;
    const double minus = loss_at();
    *params[p] = saved;
    const double numeric = (plus - minus) / (2.0 * kStep);
    const double relative = std::abs(analytic[p] - numeric) /
                            (std::abs(analytic[p]) + std::abs(numeric) + 1e-12);
    worst = std::max(worst, relative);
  }
  return worst;
}

/// Entrywise magnitudes of the decoder matrix after normalizing each column
/// to unit Euclidean norm; highlights which output coordinates respond to
/// each latent direction.
inline Eigen::MatrixXd linear_decoder_magnitudes(const LinearDecoder& d) {
  Eigen::MatrixXd out = d.A;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double norm = out.col(c).norm();
    if (norm == 0.0)
      throw std::invalid_argument("linear_decoder_magnitudes: column " + std::to_string(c) +
                                  " is zero");
    out.col(c) /= norm;
  }
  return out.cwiseAbs();
}

namespace detail {

inline json mlp_to_json(const Mlp& mlp) {
  json layers = json::array();
  for (const auto& layer : mlp.layers)
    layers.push_back(json{{"W", matrix_to_json(layer.W)}, {"b", vector_to_json(layer.b)}});
  json out{{"layer_sizes", mlp.spec.layer_sizes},
           {"activation", activation_name(mlp.spec.hidden_activation)},
           {"layers", std::move(layers)}};
  if (mlp.spec.output_box)
    out["output_box"] = json{{"lower", vector_to_json(mlp.spec.output_box->lower)},
                             {"upper", vector_to_json(mlp.spec.output_box->upper)}};
  return out;
}

inline Mlp mlp_from_json(const json& j) {
  Mlp mlp;
  mlp.spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  mlp.spec.hidden_activation = activation_from_name(j.at("activation").get<std::string>());
  if (j.contains("output_box"))
    mlp.spec.output_box = BoxDomain(vector_from_json(j.at("output_box").at("lower")),
                                    vector_from_json(j.at("output_box").at("upper")));
  mlp.spec.validate();
  const json& layers = j.at("layers");
  if (layers.size() + 1 != mlp.spec.layer_sizes.size())
    throw std::runtime_error("embedding: layer count does not match layer_sizes");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    MlpLayer layer;
    layer.W = matrix_from_json(layers[l].at("W"), mlp.spec.layer_sizes[l + 1],
                               mlp.spec.layer_sizes[l]);
    layer.b = vector_from_json(layers[l].at("b"));
    if (layer.b.size() != mlp.spec.layer_sizes[l + 1])
      throw std::runtime_error("embedding: bias length does not match layer size");
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace detail

inline json embedding_to_json(const Embedding& e) {
  json out{{"format", kEmbeddingFormat},
           {"n_x", e.n_x},
           {"n_z", e.n_z},
           {"domain", json{{"lower", vector_to_json(e.input_domain.lower)},
                           {"upper", vector_to_json(e.input_domain.upper)}}},
           {"encoder", detail::mlp_to_json(e.encoder)}};
  if (const auto* lin = std::get_if<LinearDecoder>(&e.decoder)) {
    out["decoder"] = json{{"type", "linear"},
                          {"A", matrix_to_json(lin->A)},
                          {"b", vector_to_json(lin->b)}};
  } else {
    json dec = detail::mlp_to_json(std::get<Mlp>(e.decoder));
    dec["type"] = "mlp";
    out["decoder"] = std::move(dec);
  }
  return out;
}

inline Embedding embedding_from_json(const json& j, const std::string& path) {
  require_format(j, kEmbeddingFormat, path);
  Embedding e;
  try {
    e.n_x = j.at("n_x").get<int>();
    e.n_z = j.at("n_z").get<int>();
    e.input_domain = BoxDomain(vector_from_json(j.at("domain").at("lower")),
                               vector_from_json(j.at("domain").at("upper")));
    e.encoder = detail::mlp_from_json(j.at("encoder"));
    const json& dec = j.at("decoder");
    const std::string type = dec.at("type").get<std::string>();
    if (type == "linear") {
      LinearDecoder lin;
      lin.b = vector_from_json(dec.at("b"));
      lin.A = matrix_from_json(dec.at("A"), e.n_x, e.n_z);
      e.decoder = std::move(lin);
    } else if (type == "mlp") {
      e.decoder = detail::mlp_from_json(dec);
    } else {
      throw std::runtime_error("embedding: unknown decoder type '" + type + "'");
    }
  } catch (const json::exception& ex) {
    throw std::runtime_error("'" + path + "': malformed embedding: " + ex.what());
  }
  if (e.encoder.spec.input_dim() != e.n_x || e.encoder.spec.output_dim() != e.n_z)
    throw std::runtime_error("'" + path + "': encoder shape does not match (n_x, n_z)");
  return e;
}

inline void save_embedding(const Embedding& e, const std::string& path) {
  write_file(path, embedding_to_json(e).dump(2) + "\n");
}

inline Embedding load_embedding(const std::string& path) {
  return embedding_from_json(load_json_file(path), path);
}

}  // namespace metabbo
