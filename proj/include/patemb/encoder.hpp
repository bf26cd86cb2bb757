#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "patemb/corpus.hpp"
#include "patemb/errors.hpp"
#include "patemb/linalg.hpp"
#include "patemb/rng.hpp"

namespace patemb {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Trainable state: token-embedding table E (|V| x d), projector weight
/// W (d x d) and bias b (d). The projector (linear + tanh) is used only
/// inside the training loss; inference embeddings are the normalized pooled
/// feature.
struct EncoderParams {
  std::int32_t vocab_size = 0;
  std::int32_t dim = 0;
  std::vector<double> E;  // vocab_size x dim, row-major
  std::vector<double> W;  // dim x dim
  std::vector<double> b;  // dim
  std::int64_t step = 0;

  std::span<const double> embedding(TokenId t) const {
    return {E.data() + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)};
  }

  static EncoderParams init(std::int32_t vocab_size, std::int32_t dim, std::uint64_t seed) {
    if (dim < 2) throw usage_error("encoder dim must be >= 2");
    EncoderParams p;
    p.vocab_size = vocab_size;
    p.dim = dim;
    Rng rng(derive_seed(seed, "encoder-init"));
    p.E.resize(static_cast<std::size_t>(vocab_size) * dim);
    for (double& x : p.E) x = rng.uniform(-0.05, 0.05);
    p.W.resize(static_cast<std::size_t>(dim) * dim);
    for (double& x : p.W) x = rng.uniform(-0.05, 0.05);
    p.b.assign(dim, 0.0);
    return p;
  }
};

/// Gradient accumulator, same shapes as the parameters.
struct EncoderGrads {
  std::vector<double> E;
  std::vector<double> W;
  std::vector<double> b;

  explicit EncoderGrads(const EncoderParams& p)
      : E(p.E.size(), 0.0), W(p.W.size(), 0.0), b(p.b.size(), 0.0) {}

  void reset() {
    std::fill(E.begin(), E.end(), 0.0);
    std::fill(W.begin(), W.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
  }
};

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// One Bernoulli(1-p) keep-mask over the pooled feature. Inverted scaling
/// by 1/(1-p) happens at application time.
struct DropoutMask {
  std::vector<double> keep;  // 0/1 per dimension
  double p = 0.0;
};

inline DropoutMask make_dropout_mask(std::int32_t dim, double p, Rng& rng) {
  DropoutMask m;
  m.p = p;
  m.keep.resize(dim);
  for (double& k : m.keep) k = rng.bernoulli(p) ? 0.0 : 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

/// Pooled feature: mean of embedded non-pad tokens, then optional dropout
/// with inverted scaling. Returns the (possibly masked) pooled vector.
inline std::vector<double> encode(const TokenSeq& seq, const EncoderParams& params,
                                  const DropoutMask* mask = nullptr) {
  std::vector<double> v(params.dim, 0.0);
  std::size_t n = 0;
  for (TokenId t : seq) {
    if (t == kPadToken) continue;
    if (t < 0 || t >= params.vocab_size) throw data_error("token id out of range");
    auto row = params.embedding(t);
    for (std::int32_t j = 0; j < params.dim; ++j) v[j] += row[j];
    ++n;
  }
  if (n == 0) throw data_error("empty_sequence");
  for (double& x : v) x /= static_cast<double>(n);
  if (mask) {
    double scale = 1.0 / (1.0 - mask->p);
    for (std::int32_t j = 0; j < params.dim; ++j) v[j] *= mask->keep[j] * scale;
  }
  return v;
}

/// Training-space projection: tanh(W v + b).
inline std::vector<double> project(std::span<const double> v, const EncoderParams& params) {
  std::vector<double> h(params.dim);
  for (std::int32_t i = 0; i < params.dim; ++i) {
    double s = params.b[i];
    const double* wrow = params.W.data() + static_cast<std::size_t>(i) * params.dim;
    for (std::int32_t j = 0; j < params.dim; ++j) s += wrow[j] * v[j];
    h[i] = std::tanh(s);
  }
  return h;
}

/// Inference embedding for one view: pooled feature, L2-normalized, no
/// dropout, projector dropped.
inline std::vector<double> embed_inference(const TokenSeq& seq, const EncoderParams& params) {
  auto v = encode(seq, params, nullptr);
  normalize(v);
  return v;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Backprop through the projector: given its input v and output h =
/// tanh(Wv+b), maps upstream dL/dh to dL/dv and accumulates dW, db.
inline std::vector<double> project_backward(std::span<const double> v,
                                            std::span<const double> h,
                                            std::span<const double> upstream,
                                            const EncoderParams& params,
                                            EncoderGrads& grads) {
  const std::int32_t d = params.dim;
  std::vector<double> dv(d, 0.0);
  for (std::int32_t i = 0; i < d; ++i) {
    double g = upstream[i] * (1.0 - h[i] * h[i]);  // tanh'
    grads.b[i] += g;
    double* wgrow = grads.W.data() + static_cast<std::size_t>(i) * d;
    const double* wrow = params.W.data() + static_cast<std::size_t>(i) * d;
    for (std::int32_t j = 0; j < d; ++j) {
      wgrow[j] += g * v[j];
      dv[j] += g * wrow[j];
    }
  }
  return dv;
}

/// Backprop through dropout and mean pooling: distributes the upstream
/// gradient (w.r.t. the encode() output) over the embedding rows of the
/// non-pad tokens.
inline void encode_backward(const TokenSeq& seq, const EncoderParams& params,
                            const DropoutMask* mask, std::span<const double> upstream,
                            EncoderGrads& grads) {
  if (upstream.size() != static_cast<std::size_t>(params.dim)) {
    throw numeric_error("shape_mismatch in encode_backward");
  }
  const std::int32_t d = params.dim;
  std::vector<double> dv(upstream.begin(), upstream.end());
  if (mask) {
    double scale = 1.0 / (1.0 - mask->p);
    for (std::int32_t j = 0; j < d; ++j) dv[j] *= mask->keep[j] * scale;
  }
  std::size_t n = 0;
  for (TokenId t : seq) {
    if (t != kPadToken) ++n;
  }
  if (n == 0) throw data_error("empty_sequence");
  double inv = 1.0 / static_cast<double>(n);
  for (TokenId t : seq) {
    if (t == kPadToken) continue;
    double* erow = grads.E.data() + static_cast<std::size_t>(t) * d;
    for (std::int32_t j = 0; j < d; ++j) erow[j] += dv[j] * inv;
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline void save_checkpoint(const EncoderParams& p, const std::string& path,
                            const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["vocab_size"] = p.vocab_size;
  j["dim"] = p.dim;
  j["step"] = p.step;
  j["config_hash"] = config_hash;
  j["E"] = p.E;
  j["W"] = p.W;
  j["b"] = p.b;
  std::ofstream out(path);
  if (!out) throw data_error("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

inline EncoderParams load_checkpoint(const std::string& path, std::string* config_hash = nullptr) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("version", 0) != 1) throw data_error("unsupported checkpoint version");
  EncoderParams p;
  p.vocab_size = j.at("vocab_size").get<std::int32_t>();
  p.dim = j.at("dim").get<std::int32_t>();
  p.step = j.at("step").get<std::int64_t>();
  p.E = j.at("E").get<std::vector<double>>();
  p.W = j.at("W").get<std::vector<double>>();
  p.b = j.at("b").get<std::vector<double>>();
  if (p.E.size() != static_cast<std::size_t>(p.vocab_size) * p.dim) {
    throw data_error("checkpoint E shape mismatch");
  }
  if (config_hash) *config_hash = j.value("config_hash", "");
  return p;
}

}  // namespace patemb
