#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "patemb/corpus.hpp"
#include "patemb/diagnostics.hpp"
#include "patemb/encoder.hpp"
#include "patemb/errors.hpp"
#include "patemb/eval.hpp"
#include "patemb/optim.hpp"
#include "patemb/rng.hpp"
#include "patemb/views.hpp"

namespace patemb {

struct TrainConfig {
  double temperature = 0.05;
  int batch_size = 64;
  double lr = 1e-3;
  double warmup_frac = 0.10;
  int epochs = 1;
  double dropout_p = 0.1;
  AugmentationPolicy policy{{PolicyKind::Dropout}, {}, true, false};
  int diag_every = 250;
  std::uint64_t seed = 0;
  int dim = 64;
  int max_len = 128;
  double eval_frac = 0.15;  // held-out slice for the training trace
  int knn_k = 10;
  AdamWConfig adamw;

  void validate() const {
    if (!(temperature > 0.0)) throw usage_error("temperature must be > 0");
    if (batch_size < 2) throw usage_error("batch size must be >= 2");
    if (warmup_frac < 0.0 || warmup_frac >= 1.0) throw usage_error("warmup fraction in [0,1)");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw usage_error("dropout p in [0,1)");
    if (epochs < 1) throw usage_error("epochs must be >= 1");
  }
};

struct TraceRow {
  long step = 0;
  double loss = 0.0;
  double ssd_norm = 0.0;
  double knn_p1 = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<TraceRow> trace;
  FallbackCounts fallbacks;
  std::vector<std::string> eval_doc_ids;  // held-out slice, disjoint from training
};

inline void save_trace_csv(const std::vector<TraceRow>& trace, const std::string& path,
                           const std::string& config_hash = "") {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write trace file: " + path);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "step,loss,ssd_norm,knn_p1\n";
  out.precision(17);
  for (const auto& r : trace) {
    out << r.step << "," << r.loss << "," << r.ssd_norm << "," << r.knn_p1 << "\n";
  }
}

/// InfoNCE training over one corpus. The corpus is split into a training set
/// and a held-out eval slice; every diag_every update the eval slice is
/// embedded on the inference path and (step, loss, SSD/log d, KNN P@1)
/// appended to the trace. Diagnostics also run once before any update and at
/// the final step. Deterministic given (corpus, config).
inline TrainResult train(const std::vector<PatentDoc>& docs, const Vocab& vocab,
                         const TrainConfig& cfg,
                         std::map<std::string, std::string> paraphrases = {}) {
  cfg.validate();
  if (docs.empty()) throw data_error("empty corpus");

  // held-out split
  std::vector<std::size_t> idx(docs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng split_rng(derive_seed(cfg.seed, "train-split"));
  split_rng.shuffle(idx);
  std::size_t n_eval = static_cast<std::size_t>(cfg.eval_frac * static_cast<double>(docs.size()));
  std::vector<PatentDoc> eval_docs, train_docs;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_eval ? eval_docs : train_docs).push_back(docs[idx[i]]);
  }
  if (train_docs.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw data_error("insufficient_docs: training split smaller than one batch");
  }

  ViewBuilder builder(train_docs, vocab, cfg.max_len, std::move(paraphrases));

  EncoderParams params = EncoderParams::init(vocab.table_size(), cfg.dim, cfg.seed);
  EncoderGrads grads(params);
  AdamWState sE(params.E.size()), sW(params.W.size()), sb(params.b.size());

  // eval-slice machinery for the trace: TA tokens plus an internal 85/15
  // neighbor/test split for the KNN probe
  std::vector<TokenSeq> eval_tokens;
  for (const auto& d : eval_docs) eval_tokens.push_back(builder.ta_tokens(d));
  std::size_t knn_train_n = eval_docs.size() - eval_docs.size() * 15 / 100;

  auto run_diagnostics = [&](long step_no, double loss, std::vector<TraceRow>& trace) {
    if (eval_docs.size() < 4) return;
    Matrix Z(eval_docs.size(), cfg.dim);
    for (std::size_t i = 0; i < eval_docs.size(); ++i) {
      auto v = embed_inference(eval_tokens[i], params);
      std::copy(v.begin(), v.end(), Z.row(i).begin());
    }
    SsdResult s = ssd(Z);
    std::vector<KnnExample> knn_train, knn_test;
    for (std::size_t i = 0; i < eval_docs.size(); ++i) {
      KnnExample ex;
      ex.vec.assign(Z.row(i).begin(), Z.row(i).end());
      ex.labels.insert(eval_docs[i].ipc_subgroups.begin(), eval_docs[i].ipc_subgroups.end());
      (i < knn_train_n ? knn_train : knn_test).push_back(std::move(ex));
    }
    double p1 = 0.0;
    if (!knn_test.empty() && !knn_train.empty()) {
      p1 = knn_classify(knn_train, knn_test, cfg.knn_k, {1}).p_at.at(1);
    }
    trace.push_back({step_no, loss, s.ssd_norm, p1});
  };

  long steps_per_epoch = std::max<long>(1, static_cast<long>(train_docs.size()) / cfg.batch_size);
  long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  TrainResult result;
  const std::size_t N = static_cast<std::size_t>(cfg.batch_size);
  const int d = cfg.dim;

  for (long step = 0; step < total_steps; ++step) {
    Rng step_rng(derive_seed(cfg.seed, "train-step", static_cast<std::uint64_t>(step)));
    Batch batch = builder.make_batch(cfg.policy, N, step_rng);

    // forward: both sides through encoder with independent dropout masks,
    // then the projector; loss lives in projected space
    Matrix A(N, d), B(N, d);
    std::vector<std::vector<double>> va(N), vb(N), ha(N), hb(N);
    std::vector<DropoutMask> ma(N), mb(N);
    for (std::size_t i = 0; i < N; ++i) {
      ma[i] = make_dropout_mask(d, cfg.dropout_p, step_rng);
      mb[i] = make_dropout_mask(d, cfg.dropout_p, step_rng);
      va[i] = encode(batch.pairs[i].anchor, params, &ma[i]);
      vb[i] = encode(batch.pairs[i].positive, params, &mb[i]);
      ha[i] = project(va[i], params);
      hb[i] = project(vb[i], params);
      std::copy(ha[i].begin(), ha[i].end(), A.row(i).begin());
      std::copy(hb[i].begin(), hb[i].end(), B.row(i).begin());
    }
    InfoNceResult nce = infonce_loss(A, B, cfg.temperature);

    if (step == 0) run_diagnostics(0, nce.loss, result.trace);

    // backward
    grads.reset();
    for (std::size_t i = 0; i < N; ++i) {
      auto dva = project_backward(va[i], ha[i], nce.grad_anchors.row(i), params, grads);
      encode_backward(batch.pairs[i].anchor, params, &ma[i], dva, grads);
      auto dvb = project_backward(vb[i], hb[i], nce.grad_positives.row(i), params, grads);
      encode_backward(batch.pairs[i].positive, params, &mb[i], dvb, grads);
    }

    double lr = lr_at(step, total_steps, cfg.lr, cfg.warmup_frac);
    adamw_step(params.E, grads.E, sE, lr, cfg.adamw, true);
    adamw_step(params.W, grads.W, sW, lr, cfg.adamw, true);
    adamw_step(params.b, grads.b, sb, lr, cfg.adamw, false);
    params.step = step + 1;

    if ((step + 1) % cfg.diag_every == 0 || step + 1 == total_steps) {
      run_diagnostics(step + 1, nce.loss, result.trace);
    }
  }

  result.params = std::move(params);
  result.fallbacks = builder.fallbacks();
  for (const auto& d : eval_docs) result.eval_doc_ids.push_back(d.doc_id);
  return result;
}

}  // namespace patemb
