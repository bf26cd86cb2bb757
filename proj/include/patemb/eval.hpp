#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "patemb/corpus.hpp"
#include "patemb/encoder.hpp"
#include "patemb/errors.hpp"
#include "patemb/linalg.hpp"
#include "patemb/optim.hpp"
#include "patemb/rng.hpp"

namespace patemb {

// ---------------------------------------------------------------------------
// Ranking primitives
// ---------------------------------------------------------------------------

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
  SectionKind winner = SectionKind::Abstract;  // best-scoring section
};

/// Project-wide tie-break: descending score, then ascending doc_id.
inline void sort_ranked(std::vector<ScoredDoc>& v) {
  std::sort(v.begin(), v.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

// ---------------------------------------------------------------------------
// Retrieval pool
// ---------------------------------------------------------------------------

struct CandidateRow {
  std::string doc_id;
  SectionKind section = SectionKind::Abstract;
  std::vector<double> vec;
};

struct RetrievalQuery {
  std::string doc_id;
  std::vector<double> vec;
  std::set<std::string> positives;
};

struct RetrievalPool {
  std::vector<CandidateRow> candidates;
  std::vector<RetrievalQuery> queries;
};

/// Ranks candidate documents for one query vector by cosine similarity,
/// keeping each document's best-scoring section (max fusion) and recording
/// which section won. The query's own document is excluded.
inline std::vector<ScoredDoc> rank_candidates(const std::vector<CandidateRow>& candidates,
                                              const std::vector<double>& qvec,
                                              const std::string& exclude_id) {
  std::map<std::string, ScoredDoc> best;
  for (const auto& c : candidates) {
    if (c.doc_id == exclude_id) continue;
    double s = cosine(qvec, c.vec);
    auto it = best.find(c.doc_id);
    // ties between sections of one doc resolve to the earlier section kind
    if (it == best.end() || s > it->second.score) {
      best[c.doc_id] = {c.doc_id, s, c.section};
    }
  }
  std::vector<ScoredDoc> ranked;
  ranked.reserve(best.size());
  for (auto& [id, sd] : best) ranked.push_back(std::move(sd));
  sort_ranked(ranked);
  return ranked;
}

struct RecallReport {
  std::vector<int> k_list;
  std::map<int, double> mean_recall;                       // K -> mean
  std::vector<std::pair<std::string, std::map<int, double>>> per_query;
  std::size_t queries_without_positives = 0;
};

/// Recall@K over the pool: fraction of each query's positives ranked in the
/// top K, averaged over queries. Queries without positives are excluded and
/// counted.
inline RecallReport recall_at_k(const RetrievalPool& pool, std::vector<int> k_list = {20, 50, 100}) {
  RecallReport rep;
  rep.k_list = k_list;
  for (int k : k_list) rep.mean_recall[k] = 0.0;
  std::size_t used = 0;
  for (const auto& q : pool.queries) {
    if (q.positives.empty()) {
      ++rep.queries_without_positives;
      continue;
    }
    auto ranked = rank_candidates(pool.candidates, q.vec, q.doc_id);
    std::map<int, double> recalls;
    for (int k : k_list) {
      std::size_t hit = 0;
      std::size_t top = std::min<std::size_t>(k, ranked.size());
      for (std::size_t i = 0; i < top; ++i) {
        if (q.positives.count(ranked[i].doc_id)) ++hit;
      }
      recalls[k] = static_cast<double>(hit) / static_cast<double>(q.positives.size());
      rep.mean_recall[k] += recalls[k];
    }
    rep.per_query.emplace_back(q.doc_id, std::move(recalls));
    ++used;
  }
  if (used > 0) {
    for (int k : k_list) rep.mean_recall[k] /= static_cast<double>(used);
  }
  return rep;
}

/// Claims->All ranking for every query; each candidate document contributes
/// up to three section vectors and is ranked by its best one.
inline std::vector<std::vector<ScoredDoc>> rank_claims_to_all(const RetrievalPool& pool) {
  std::vector<std::vector<ScoredDoc>> out;
  out.reserve(pool.queries.size());
  for (const auto& q : pool.queries) {
    out.push_back(rank_candidates(pool.candidates, q.vec, q.doc_id));
  }
  return out;
}

/// Fraction of top-K winners per section kind; sums to 1 over the kinds seen.
inline std::map<SectionKind, double> section_mix(
    const std::vector<std::vector<ScoredDoc>>& rankings, int top_k = 100) {
  std::map<SectionKind, double> counts;
  double total = 0.0;
  for (const auto& ranked : rankings) {
    std::size_t top = std::min<std::size_t>(top_k, ranked.size());
    for (std::size_t i = 0; i < top; ++i) {
      counts[ranked[i].winner] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (auto& [k, v] : counts) v /= total;
  }
  return counts;
}

// ---------------------------------------------------------------------------
// KNN multi-label classification
// ---------------------------------------------------------------------------

struct KnnExample {
  std::vector<double> vec;
  std::set<std::string> labels;
};

struct KnnReport {
  std::vector<std::vector<std::string>> predicted;  // ranked labels per test doc
  std::map<int, double> p_at;                       // m -> precision@m
};

/// k-NN by cosine similarity with majority voting. Neighbor ties break on
/// ascending train index; label ranking is (votes desc, label asc).
/// P@m = mean over test docs of |top-m predicted ∩ true| / m.
inline KnnReport knn_classify(const std::vector<KnnExample>& train,
                              const std::vector<KnnExample>& test, std::size_t k = 10,
                              std::vector<int> m_list = {1, 3, 5}) {
  if (train.empty()) throw data_error("empty_train for knn");
  if (k > train.size()) k = train.size();
  KnnReport rep;
  for (int m : m_list) rep.p_at[m] = 0.0;
  for (const auto& t : test) {
    std::vector<std::pair<double, std::size_t>> sims;  // (similarity, index)
    sims.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      sims.emplace_back(cosine(t.vec, train[i].vec), i);
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::map<std::string, int> votes;
    for (std::size_t i = 0; i < k; ++i) {
      for (const auto& lbl : train[sims[i].second].labels) ++votes[lbl];
    }
    std::vector<std::pair<std::string, int>> ranked(votes.begin(), votes.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::vector<std::string> pred;
    for (const auto& [lbl, v] : ranked) pred.push_back(lbl);
    for (int m : m_list) {
      std::size_t hit = 0;
      std::size_t top = std::min<std::size_t>(m, pred.size());
      for (std::size_t i = 0; i < top; ++i) {
        if (t.labels.count(pred[i])) ++hit;
      }
      rep.p_at[m] += static_cast<double>(hit) / static_cast<double>(m);
    }
    rep.predicted.push_back(std::move(pred));
  }
  if (!test.empty()) {
    for (int m : m_list) rep.p_at[m] /= static_cast<double>(test.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Linear probe: frozen embeddings -> 2-layer MLP, sigmoid + BCE, multi-label
// ---------------------------------------------------------------------------

struct ProbeParams {
  int in_dim = 0, hidden = 0, n_classes = 0;
  std::vector<double> W1, b1;  // hidden x in, hidden
  std::vector<double> W2, b2;  // classes x hidden, classes

  static ProbeParams init(int in_dim, int hidden, int n_classes, std::uint64_t seed) {
    ProbeParams p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.n_classes = n_classes;
    Rng rng(derive_seed(seed, "probe-init"));
    double s1 = std::sqrt(2.0 / in_dim), s2 = std::sqrt(2.0 / hidden);
    p.W1.resize(static_cast<std::size_t>(hidden) * in_dim);
    for (double& x : p.W1) x = rng.normal() * s1;
    p.b1.assign(hidden, 0.0);
    p.W2.resize(static_cast<std::size_t>(n_classes) * hidden);
    for (double& x : p.W2) x = rng.normal() * s2;
    p.b2.assign(n_classes, 0.0);
    return p;
  }
};

struct ProbeGrads {
  std::vector<double> W1, b1, W2, b2;
  explicit ProbeGrads(const ProbeParams& p)
      : W1(p.W1.size(), 0.0), b1(p.b1.size(), 0.0), W2(p.W2.size(), 0.0), b2(p.b2.size(), 0.0) {}
};

/// Class probabilities for one embedding: sigmoid(W2 relu(W1 x + b1) + b2).
inline std::vector<double> probe_scores(const ProbeParams& p, std::span<const double> x) {
  std::vector<double> h(p.hidden);
  for (int i = 0; i < p.hidden; ++i) {
    double s = p.b1[i];
    const double* row = p.W1.data() + static_cast<std::size_t>(i) * p.in_dim;
    for (int j = 0; j < p.in_dim; ++j) s += row[j] * x[j];
    h[i] = std::max(s, 0.0);
  }
  std::vector<double> out(p.n_classes);
  for (int c = 0; c < p.n_classes; ++c) {
    double s = p.b2[c];
    const double* row = p.W2.data() + static_cast<std::size_t>(c) * p.hidden;
    for (int i = 0; i < p.hidden; ++i) s += row[i] * h[i];
    out[c] = 1.0 / (1.0 + std::exp(-s));
  }
  return out;
}

/// Mean multi-label BCE over a batch, with exact gradients.
inline double probe_loss_grad(const ProbeParams& p, const Matrix& X,
                              const std::vector<std::vector<int>>& targets,
                              ProbeGrads& grads) {
  const std::size_t B = X.rows;
  double loss = 0.0;
  std::vector<double> h(p.hidden), pre(p.hidden);
  for (std::size_t n = 0; n < B; ++n) {
    auto x = X.row(n);
    for (int i = 0; i < p.hidden; ++i) {
      double s = p.b1[i];
      const double* row = p.W1.data() + static_cast<std::size_t>(i) * p.in_dim;
      for (int j = 0; j < p.in_dim; ++j) s += row[j] * x[j];
      pre[i] = s;
      h[i] = std::max(s, 0.0);
    }
    std::vector<double> dh(p.hidden, 0.0);
    for (int c = 0; c < p.n_classes; ++c) {
      double s = p.b2[c];
      const double* row = p.W2.data() + static_cast<std::size_t>(c) * p.hidden;
      for (int i = 0; i < p.hidden; ++i) s += row[i] * h[i];
      double y = static_cast<double>(targets[n][c]);
      // stable BCE on logits: log(1+e^s) - y*s
      loss += (s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) - y * s;
      double sig = 1.0 / (1.0 + std::exp(-s));
      double g = (sig - y) / (static_cast<double>(B) * p.n_classes);
      grads.b2[c] += g;
      double* w2g = grads.W2.data() + static_cast<std::size_t>(c) * p.hidden;
      for (int i = 0; i < p.hidden; ++i) {
        w2g[i] += g * h[i];
        dh[i] += g * row[i];
      }
    }
    for (int i = 0; i < p.hidden; ++i) {
      if (pre[i] <= 0.0) continue;  // relu gate
      grads.b1[i] += dh[i];
      double* w1g = grads.W1.data() + static_cast<std::size_t>(i) * p.in_dim;
      for (int j = 0; j < p.in_dim; ++j) w1g[j] += dh[i] * x[j];
    }
  }
  return loss / (static_cast<double>(B) * p.n_classes);
}

struct ProbeConfig {
  int hidden = 128;
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-2;
  double warmup_frac = 0.1;
  double dev_frac = 0.15;
  std::uint64_t seed = 0;
  AdamWConfig adamw;
};

struct ProbeReport {
  std::map<int, double> p_at;
  std::vector<std::string> classes;
  std::size_t singleton_dev_classes = 0;  // classes absent from the dev split
};

/// Trains the probe on an internal train/dev split of the given embeddings
/// and reports P@{1,3,5} on dev. Labels are ranked by predicted probability
/// (ties: class name ascending).
inline ProbeReport linear_probe(const Matrix& X, const std::vector<std::set<std::string>>& labels,
                                const ProbeConfig& cfg, ProbeParams* trained = nullptr) {
  const std::size_t n = X.rows;
  if (n < 4) throw data_error("linear_probe: too few examples");

  // class list, sorted for determinism
  std::set<std::string> class_set;
  for (const auto& ls : labels) class_set.insert(ls.begin(), ls.end());
  std::vector<std::string> classes(class_set.begin(), class_set.end());
  std::map<std::string, int> class_id;
  for (std::size_t c = 0; c < classes.size(); ++c) class_id[classes[c]] = static_cast<int>(c);

  Rng split_rng(derive_seed(cfg.seed, "probe-split"));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  split_rng.shuffle(idx);
  std::size_t n_dev = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.dev_frac * n));
  std::vector<std::size_t> dev(idx.begin(), idx.begin() + n_dev);
  std::vector<std::size_t> tr(idx.begin() + n_dev, idx.end());

  auto targets_of = [&](std::size_t i) {
    std::vector<int> t(classes.size(), 0);
    for (const auto& l : labels[i]) t[class_id[l]] = 1;
    return t;
  };

  ProbeParams params = ProbeParams::init(static_cast<int>(X.cols), cfg.hidden,
                                         static_cast<int>(classes.size()), cfg.seed);
  AdamWState sW1(params.W1.size()), sb1(params.b1.size()), sW2(params.W2.size()),
      sb2(params.b2.size());

  long steps_per_epoch = std::max<long>(1, static_cast<long>(tr.size() / cfg.batch_size));
  long total = cfg.epochs * steps_per_epoch;
  Rng batch_rng(derive_seed(cfg.seed, "probe-batches"));
  long step = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    batch_rng.shuffle(tr);
    for (long s = 0; s < steps_per_epoch; ++s, ++step) {
      std::size_t lo = static_cast<std::size_t>(s) * cfg.batch_size;
      std::size_t hi = std::min(lo + cfg.batch_size, tr.size());
      Matrix Xb(hi - lo, X.cols);
      std::vector<std::vector<int>> Yb;
      for (std::size_t i = lo; i < hi; ++i) {
        auto row = X.row(tr[i]);
        std::copy(row.begin(), row.end(), Xb.row(i - lo).begin());
        Yb.push_back(targets_of(tr[i]));
      }
      ProbeGrads grads(params);
      probe_loss_grad(params, Xb, Yb, grads);
      double lr = lr_at(step, total, cfg.lr, cfg.warmup_frac);
      adamw_step(params.W1, grads.W1, sW1, lr, cfg.adamw, true);
      adamw_step(params.b1, grads.b1, sb1, lr, cfg.adamw, false);
      adamw_step(params.W2, grads.W2, sW2, lr, cfg.adamw, true);
      adamw_step(params.b2, grads.b2, sb2, lr, cfg.adamw, false);
    }
  }

  ProbeReport rep;
  rep.classes = classes;
  std::set<std::string> dev_classes;
  for (std::size_t i : dev) dev_classes.insert(labels[i].begin(), labels[i].end());
  for (const auto& c : classes) {
    if (!dev_classes.count(c)) ++rep.singleton_dev_classes;
  }
  std::vector<int> m_list = {1, 3, 5};
  for (int m : m_list) rep.p_at[m] = 0.0;
  for (std::size_t i : dev) {
    auto scores = probe_scores(params, X.row(i));
    std::vector<int> order(classes.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return classes[a] < classes[b];
    });
    for (int m : m_list) {
      std::size_t hit = 0;
      std::size_t top = std::min<std::size_t>(m, order.size());
      for (std::size_t r = 0; r < top; ++r) {
        if (labels[i].count(classes[order[r]])) ++hit;
      }
      rep.p_at[m] += static_cast<double>(hit) / static_cast<double>(m);
    }
  }
  for (int m : m_list) rep.p_at[m] /= static_cast<double>(dev.size());
  if (trained) *trained = params;
  return rep;
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

struct Bm25Index {
  double k1 = 1.2;
  double b = 0.75;
  std::vector<std::string> doc_ids;
  std::vector<double> doc_len;
  double avgdl = 0.0;
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings;

  static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& id_text,
                         double k1 = 1.2, double b = 0.75) {
    Bm25Index idx;
    idx.k1 = k1;
    idx.b = b;
    double total_len = 0.0;
    for (std::uint32_t d = 0; d < id_text.size(); ++d) {
      idx.doc_ids.push_back(id_text[d].first);
      std::map<std::string, std::uint32_t> tf;
      auto words = split_words(id_text[d].second);
      for (const auto& w : words) ++tf[w];
      idx.doc_len.push_back(static_cast<double>(words.size()));
      total_len += static_cast<double>(words.size());
      for (const auto& [term, f] : tf) idx.postings[term].emplace_back(d, f);
    }
    if (idx.doc_ids.empty()) throw data_error("bm25: empty corpus");
    idx.avgdl = total_len / static_cast<double>(idx.doc_ids.size());
    if (!(idx.avgdl > 0.0)) throw data_error("bm25: zero average document length");
    return idx;
  }

  /// Nonnegative-clamped idf: max(0, ln((N - df + 0.5) / (df + 0.5))).
  double idf(std::size_t df) const {
    double n = static_cast<double>(doc_ids.size());
    double d = static_cast<double>(df);
    return std::max(0.0, std::log((n - d + 0.5) / (d + 0.5)));
  }
};

/// Okapi BM25 scoring of a free-text query against the whole index. Returns
/// the top-K documents (score desc, doc_id asc); unmatched documents score 0
/// and participate in the ranking.
inline std::vector<ScoredDoc> bm25_search(const Bm25Index& idx, const std::string& query,
                                          std::size_t top_k) {
  auto terms = split_words(query);
  if (terms.empty()) throw data_error("empty_query for bm25");
  std::vector<double> scores(idx.doc_ids.size(), 0.0);
  std::map<std::string, std::uint32_t> qtf;
  for (const auto& t : terms) ++qtf[t];
  for (const auto& [term, qf] : qtf) {
    auto it = idx.postings.find(term);
    if (it == idx.postings.end()) continue;
    double w_idf = idx.idf(it->second.size());
    for (const auto& [d, f] : it->second) {
      double tf = static_cast<double>(f);
      double norm = idx.k1 * (1.0 - idx.b + idx.b * idx.doc_len[d] / idx.avgdl);
      scores[d] += static_cast<double>(qf) * w_idf * tf * (idx.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<ScoredDoc> ranked(idx.doc_ids.size());
  for (std::size_t d = 0; d < idx.doc_ids.size(); ++d) {
    ranked[d] = {idx.doc_ids[d], scores[d], SectionKind::Abstract};
  }
  sort_ranked(ranked);
  if (ranked.size() > top_k) ranked.resize(top_k);
  return ranked;
}

// ---------------------------------------------------------------------------
// Benchmark construction
// ---------------------------------------------------------------------------

struct BenchmarkSpec {
  int n_queries = 200;
  bool use_mlt = true;
  bool use_ipc_subclass = true;
  bool use_cited_of_cited = true;
  int mlt_per_query = 20;
  int ipc_per_query = 20;
  int coc_per_query = 20;
};

struct Benchmark {
  std::vector<std::pair<std::string, std::set<std::string>>> queries;  // id -> positives
  std::set<std::string> pool;                                          // globally pooled ids
};

/// IPC subclass = first 4 characters of a subgroup string ("A01B 1/02" -> "A01B").
inline std::string ipc_subclass(const std::string& subgroup) {
  return subgroup.substr(0, std::min<std::size_t>(4, subgroup.size()));
}

/// Builds the retrieval benchmark: greedy query selection that maximizes
/// newly covered two-hop citations with round-robin preference for
/// under-covered IPC sections, then hard negatives per strategy, pooled
/// globally.
inline Benchmark build_benchmark(const std::vector<PatentDoc>& docs, const BenchmarkSpec& spec,
                                 Rng& rng) {
  if (!spec.use_mlt && !spec.use_ipc_subclass && !spec.use_cited_of_cited) {
    throw usage_error("benchmark: at least one negative strategy required");
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < docs.size(); ++i) by_id[docs[i].doc_id] = i;

  auto positives_of = [&](std::size_t i) {
    std::set<std::string> pos;
    for (const auto& c : docs[i].cited_ids) {
      if (by_id.count(c)) pos.insert(c);
    }
    return pos;
  };
  auto two_hop_of = [&](std::size_t i) {
    std::set<std::string> hop2;
    for (const auto& c : docs[i].cited_ids) {
      auto it = by_id.find(c);
      if (it == by_id.end()) continue;
      for (const auto& cc : docs[it->second].cited_ids) {
        if (by_id.count(cc)) hop2.insert(cc);
      }
    }
    return hop2;
  };
  auto ipc_section = [&](std::size_t i) {
    return docs[i].ipc_subgroups.empty() ? '?' : docs[i].ipc_subgroups.front()[0];
  };

  // candidates: documents with at least one in-corpus citation
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!positives_of(i).empty()) candidates.push_back(i);
  }
  if (candidates.empty()) throw data_error("insufficient_citations for benchmark");

  // greedy selection
  std::set<std::string> covered_two_hop;
  std::map<char, int> section_counts;
  std::set<std::size_t> chosen;
  Benchmark bench;
  int want = std::min<int>(spec.n_queries, static_cast<int>(candidates.size()));
  for (int q = 0; q < want; ++q) {
    // under-covered IPC section first, then max new two-hop coverage, then id
    char best_section = 0;
    std::size_t best_idx = 0;
    long best_new = -1;
    for (std::size_t i : candidates) {
      if (chosen.count(i)) continue;
      char sec = ipc_section(i);
      auto hop2 = two_hop_of(i);
      long fresh = 0;
      for (const auto& h : hop2) {
        if (!covered_two_hop.count(h)) ++fresh;
      }
      bool better;
      if (best_new < 0) {
        better = true;
      } else {
        int cs = section_counts[sec], cb = section_counts[best_section];
        if (cs != cb) {
          better = cs < cb;
        } else if (fresh != best_new) {
          better = fresh > best_new;
        } else {
          better = docs[i].doc_id < docs[best_idx].doc_id;
        }
      }
      if (better) {
        best_section = sec;
        best_idx = i;
        best_new = fresh;
      }
    }
    if (best_new < 0) break;
    chosen.insert(best_idx);
    ++section_counts[best_section];
    for (const auto& h : two_hop_of(best_idx)) covered_two_hop.insert(h);
  }

  // negatives
  Bm25Index* mlt_index = nullptr;
  Bm25Index mlt_storage;
  if (spec.use_mlt) {
    std::vector<std::pair<std::string, std::string>> id_text;
    for (const auto& d : docs) {
      id_text.emplace_back(d.doc_id, make_view_text(d, SectionKind::Abstract));
    }
    mlt_storage = Bm25Index::build(id_text);
    mlt_index = &mlt_storage;
  }

  // subclass -> doc ids, for IPC-matching negatives
  std::map<std::string, std::vector<std::string>> by_subclass;
  for (const auto& d : docs) {
    std::set<std::string> subs;
    for (const auto& g : d.ipc_subgroups) subs.insert(ipc_subclass(g));
    for (const auto& s : subs) by_subclass[s].push_back(d.doc_id);
  }

  for (std::size_t i : chosen) {
    auto pos = positives_of(i);
    const std::string& qid = docs[i].doc_id;
    std::set<std::string> negs;

    if (spec.use_mlt) {
      auto hits = bm25_search(*mlt_index, make_view_text(docs[i], SectionKind::Abstract),
                              pos.size() + spec.mlt_per_query + 1);
      int taken = 0;
      for (const auto& h : hits) {
        if (taken >= spec.mlt_per_query) break;
        if (h.doc_id == qid || pos.count(h.doc_id)) continue;
        negs.insert(h.doc_id);
        ++taken;
      }
    }
    if (spec.use_ipc_subclass) {
      std::vector<std::string> eligible;
      std::set<std::string> seen;
      for (const auto& g : docs[i].ipc_subgroups) {
        for (const auto& id : by_subclass[ipc_subclass(g)]) {
          if (id == qid || pos.count(id) || docs[i].cited_ids.count(id)) continue;
          if (seen.insert(id).second) eligible.push_back(id);
        }
      }
      if (static_cast<int>(eligible.size()) > spec.ipc_per_query) {
        for (std::size_t pick : rng.sample_without_replacement(eligible.size(), spec.ipc_per_query)) {
          negs.insert(eligible[pick]);
        }
      } else {
        negs.insert(eligible.begin(), eligible.end());
      }
    }
    if (spec.use_cited_of_cited) {
      std::vector<std::string> eligible;
      for (const auto& h : two_hop_of(i)) {
        if (h == qid || docs[i].cited_ids.count(h)) continue;  // never directly cited
        eligible.push_back(h);
      }
      if (static_cast<int>(eligible.size()) > spec.coc_per_query) {
        for (std::size_t pick : rng.sample_without_replacement(eligible.size(), spec.coc_per_query)) {
          negs.insert(eligible[pick]);
        }
      } else {
        negs.insert(eligible.begin(), eligible.end());
      }
    }

    bench.queries.emplace_back(qid, pos);
    bench.pool.insert(pos.begin(), pos.end());
    bench.pool.insert(negs.begin(), negs.end());
  }
  std::sort(bench.queries.begin(), bench.queries.end());
  return bench;
}

inline nlohmann::ordered_json benchmark_to_json(const Benchmark& b) {
  nlohmann::ordered_json j;
  j["queries"] = nlohmann::ordered_json::array();
  for (const auto& [id, pos] : b.queries) {
    nlohmann::ordered_json q;
    q["id"] = id;
    q["positives"] = std::vector<std::string>(pos.begin(), pos.end());
    j["queries"].push_back(q);
  }
  j["pool"] = std::vector<std::string>(b.pool.begin(), b.pool.end());
  return j;
}

inline Benchmark benchmark_from_json(const nlohmann::json& j) {
  Benchmark b;
  for (const auto& q : j.at("queries")) {
    std::set<std::string> pos;
    for (const auto& p : q.at("positives")) pos.insert(p.get<std::string>());
    b.queries.emplace_back(q.at("id").get<std::string>(), std::move(pos));
  }
  for (const auto& p : j.at("pool")) b.pool.insert(p.get<std::string>());
  return b;
}

// ---------------------------------------------------------------------------
// Pool embedding helpers
// ---------------------------------------------------------------------------

/// Abs->Abs pool: every pool document contributes its TA embedding; queries
/// use their own TA embedding.
inline RetrievalPool make_pool_abs(const Benchmark& bench, const std::vector<PatentDoc>& docs,
                                   const EncoderParams& params, const Vocab& vocab,
                                   std::size_t max_len) {
  std::unordered_map<std::string, const PatentDoc*> by_id;
  for (const auto& d : docs) by_id[d.doc_id] = &d;
  RetrievalPool pool;
  for (const auto& id : bench.pool) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw data_error("pool document missing from corpus: " + id);
    pool.candidates.push_back(
        {id, SectionKind::Abstract,
         embed_inference(tokenize(make_view_text(*it->second, SectionKind::Abstract), vocab, max_len),
                         params)});
  }
  for (const auto& [qid, pos] : bench.queries) {
    const PatentDoc* q = by_id.at(qid);
    pool.queries.push_back(
        {qid,
         embed_inference(tokenize(make_view_text(*q, SectionKind::Abstract), vocab, max_len), params),
         pos});
  }
  return pool;
}

/// Claims->All pool: queries use claims embeddings; every pool document
/// contributes TA, claims, and description vectors where available.
inline RetrievalPool make_pool_claims_all(const Benchmark& bench,
                                          const std::vector<PatentDoc>& docs,
                                          const EncoderParams& params, const Vocab& vocab,
                                          std::size_t max_len) {
  std::unordered_map<std::string, const PatentDoc*> by_id;
  for (const auto& d : docs) by_id[d.doc_id] = &d;
  RetrievalPool pool;
  for (const auto& id : bench.pool) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw data_error("pool document missing from corpus: " + id);
    const PatentDoc& d = *it->second;
    for (SectionKind k : {SectionKind::Abstract, SectionKind::Claims, SectionKind::Description}) {
      if (!d.has(k)) continue;
      pool.candidates.push_back(
          {id, k, embed_inference(tokenize(make_view_text(d, k), vocab, max_len), params)});
    }
  }
  for (const auto& [qid, pos] : bench.queries) {
    const PatentDoc& q = *by_id.at(qid);
    if (!q.has(SectionKind::Claims)) continue;  // claims-view queries only
    pool.queries.push_back(
        {qid,
         embed_inference(tokenize(make_view_text(q, SectionKind::Claims), vocab, max_len), params),
         pos});
  }
  return pool;
}

}  // namespace patemb
