#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "patemb/errors.hpp"
#include "patemb/linalg.hpp"

namespace patemb {

// ---------------------------------------------------------------------------
// InfoNCE
// ---------------------------------------------------------------------------

struct InfoNceResult {
  double loss = 0.0;
  Matrix grad_anchors;    // dL/dH
  Matrix grad_positives;  // dL/dH+
};

/// InfoNCE over one batch: anchors H (N x d) against positives H+ (N x d),
/// cosine similarity scaled by temperature, in-batch negatives drawn from the
/// positive side only. Returns the mean loss and exact gradients, including
/// the cosine-normalization Jacobian.
inline InfoNceResult infonce_loss(const Matrix& H, const Matrix& Hp, double tau) {
  const std::size_t N = H.rows, d = H.cols;
  if (N < 2 || Hp.rows != N || Hp.cols != d) throw numeric_error("infonce: bad shapes");
  if (!(tau > 0.0)) throw usage_error("infonce: temperature must be positive");

  std::vector<double> na(N), nb(N);
  for (std::size_t i = 0; i < N; ++i) {
    na[i] = norm2(H.row(i));
    nb[i] = norm2(Hp.row(i));
    if (na[i] < 1e-12 || nb[i] < 1e-12) throw numeric_error("zero_norm_row in infonce");
  }

  Matrix C(N, N);  // cosine similarities
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      C(i, j) = dot(H.row(i), Hp.row(j)) / (na[i] * nb[j]);
    }
  }

  InfoNceResult r;
  r.grad_anchors = Matrix(N, d);
  r.grad_positives = Matrix(N, d);

  Matrix G(N, N);  // dL/dC
  for (std::size_t i = 0; i < N; ++i) {
    // row-wise log-sum-exp of C(i,:)/tau
    double mx = C(i, 0) / tau;
    for (std::size_t j = 1; j < N; ++j) mx = std::max(mx, C(i, j) / tau);
    double sum = 0.0;
    for (std::size_t j = 0; j < N; ++j) sum += std::exp(C(i, j) / tau - mx);
    double lse = mx + std::log(sum);
    r.loss += lse - C(i, i) / tau;
    for (std::size_t j = 0; j < N; ++j) {
      double p = std::exp(C(i, j) / tau - lse);  // softmax
      G(i, j) = (p - (i == j ? 1.0 : 0.0)) / (static_cast<double>(N) * tau);
    }
  }
  r.loss /= static_cast<double>(N);

  // cosine Jacobian: dC_ij/da_i = b_j/(|a||b|) - C_ij a_i/|a|^2, same by symmetry for b_j
  for (std::size_t i = 0; i < N; ++i) {
    auto a = H.row(i);
    auto ga = r.grad_anchors.row(i);
    for (std::size_t j = 0; j < N; ++j) {
      double g = G(i, j);
      if (g == 0.0) continue;
      auto b = Hp.row(j);
      auto gb = r.grad_positives.row(j);
      double inv_ab = 1.0 / (na[i] * nb[j]);
      double ca = C(i, j) / (na[i] * na[i]);
      double cb = C(i, j) / (nb[j] * nb[j]);
      for (std::size_t k = 0; k < d; ++k) {
        ga[k] += g * (b[k] * inv_ab - ca * a[k]);
        gb[k] += g * (a[k] * inv_ab - cb * b[k]);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear warmup then cosine decay to zero
// ---------------------------------------------------------------------------

inline double lr_at(long step, long total_steps, double base_lr, double warmup_frac) {
  if (step < 0 || step > total_steps) throw usage_error("lr_at: step out of range");
  long warmup = static_cast<long>(std::ceil(warmup_frac * static_cast<double>(total_steps)));
  if (warmup > 0 && step < warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps <= warmup) return base_lr;
  double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment estimates for one parameter tensor.
struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamWState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected AdamW update with decoupled weight decay. Decay is
/// skipped when apply_decay is false (bias parameters). Nonfinite gradients
/// abort with the state untouched.
inline void adamw_step(std::vector<double>& params, const std::vector<double>& grads,
                       AdamWState& state, double lr, const AdamWConfig& cfg,
                       bool apply_decay = true) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw numeric_error("adamw: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw numeric_error("nonfinite_gradient in adamw_step");
  }
  ++state.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) +
                       (apply_decay ? cfg.weight_decay * params[i] : 0.0));
  }
}

}  // namespace patemb
