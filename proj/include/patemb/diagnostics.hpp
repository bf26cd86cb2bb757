#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "patemb/corpus.hpp"
#include "patemb/errors.hpp"
#include "patemb/linalg.hpp"
#include "patemb/rng.hpp"

namespace patemb {

/// n x d document/section embeddings with per-row provenance tags.
struct EmbeddingMatrix {
  Matrix rows;
  std::vector<std::pair<std::string, SectionKind>> row_ids;  // (doc_id, section)
  bool normalized = false;

  std::size_t n() const { return rows.rows; }
  std::size_t d() const { return rows.cols; }
};

struct DiagnosticsReport {
  double alignment = 0.0;
  double uniformity = 0.0;
  double ssd = 0.0;
  double ssd_norm = 0.0;                 // ssd / log d, in [0, 1]
  std::vector<double> spectrum;          // normalized singular values, descending
  std::optional<double> ida_ratio;
  bool degenerate_spectrum = false;
};

// ---------------------------------------------------------------------------
// Alignment and uniformity
// ---------------------------------------------------------------------------

/// Mean squared Euclidean distance over positive pairs (rows must be
/// unit-norm). Lower is better.
inline double alignment(const EmbeddingMatrix& Z,
                        const std::vector<std::pair<std::size_t, std::size_t>>& pos_pairs) {
  if (pos_pairs.empty()) throw data_error("empty_pairs for alignment");
  double s = 0.0;
  for (const auto& [i, j] : pos_pairs) {
    s += sqdist(Z.rows.row(i), Z.rows.row(j));
  }
  return s / static_cast<double>(pos_pairs.size());
}

/// log E[exp(-2 ||z_i - z_j||^2)] over all unordered distinct row pairs.
/// Lower (more negative) is better.
inline double uniformity(const EmbeddingMatrix& Z) {
  const std::size_t n = Z.n();
  if (n < 2) throw data_error("too_few_rows for uniformity");
  double s = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      s += std::exp(-2.0 * sqdist(Z.rows.row(i), Z.rows.row(j)));
      ++cnt;
    }
  }
  return std::log(s / static_cast<double>(cnt));
}

// ---------------------------------------------------------------------------
// Singular spectrum divergence
// ---------------------------------------------------------------------------

struct SsdResult {
  double ssd = 0.0;
  double ssd_norm = 0.0;
  std::vector<double> spectrum;  // descending, sums to 1 (or all zero if degenerate)
  bool degenerate = false;
};

/// SSD of the column-centered matrix: KL(s || uniform) over the normalized
/// singular values s, equal to log d - H(s). Singular values come from a
/// Jacobi eigendecomposition of the centered d x d Gram matrix. A degenerate
/// matrix (all rows equal) yields ssd_norm = 1 with the degenerate flag set.
inline SsdResult ssd(const Matrix& Z) {
  const std::size_t n = Z.rows, d = Z.cols;
  if (n < 2) throw data_error("too_few_rows for ssd");

  // center columns
  Matrix M = Z;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += M(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) M(i, j) -= mean;
  }

  // Gram matrix M^T M (d x d, symmetric PSD)
  Matrix G(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += M(i, a) * M(i, b);
      G(a, b) = s;
      G(b, a) = s;
    }
  }

  std::vector<double> eig = jacobi_eigenvalues(std::move(G), 1e-12);
  std::vector<double> sing(d);
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    sing[i] = std::sqrt(std::max(eig[i], 0.0));
    total += sing[i];
  }

  SsdResult r;
  r.spectrum.assign(d, 0.0);
  if (total < 1e-300) {
    r.degenerate = true;
    r.ssd = std::log(static_cast<double>(d));
    r.ssd_norm = 1.0;
    return r;
  }
  for (std::size_t i = 0; i < d; ++i) r.spectrum[i] = sing[i] / total;
  std::sort(r.spectrum.begin(), r.spectrum.end(), std::greater<double>());

  double kl = 0.0;
  for (double s : r.spectrum) {
    if (s > 0.0) kl += s * std::log(s * static_cast<double>(d));
  }
  r.ssd = std::max(kl, 0.0);
  r.ssd_norm = r.ssd / std::log(static_cast<double>(d));
  r.ssd_norm = std::clamp(r.ssd_norm, 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Intra-document alignment ratio
// ---------------------------------------------------------------------------

/// Mean within-document (1 - cos) over section pairs, normalized by the mean
/// (1 - cos) of randomly sampled cross-document section pairs. Returns
/// nullopt when the denominator vanishes. n_rand <= 0 selects the default of
/// 10x the number of within-document pairs.
inline std::optional<double> ida_ratio(const EmbeddingMatrix& Z, Rng& rng, long n_rand = 0) {
  // group rows by document
  std::map<std::string, std::vector<std::size_t>> by_doc;
  for (std::size_t i = 0; i < Z.n(); ++i) by_doc[Z.row_ids[i].first].push_back(i);

  double intra_sum = 0.0;
  std::size_t n_docs_multi = 0;
  std::size_t n_within_pairs = 0;
  for (const auto& [doc, idx] : by_doc) {
    if (idx.size() < 2) continue;
    double doc_sum = 0.0;
    std::size_t doc_pairs = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        doc_sum += 1.0 - cosine(Z.rows.row(idx[a]), Z.rows.row(idx[b]));
        ++doc_pairs;
      }
    }
    intra_sum += doc_sum / static_cast<double>(doc_pairs);
    ++n_docs_multi;
    n_within_pairs += doc_pairs;
  }
  if (n_docs_multi == 0) throw data_error("no_multisection_docs");
  double numerator = intra_sum / static_cast<double>(n_docs_multi);

  if (n_rand <= 0) n_rand = static_cast<long>(10 * n_within_pairs);
  double rand_sum = 0.0;
  long got = 0;
  for (long t = 0; t < n_rand * 4 && got < n_rand; ++t) {
    std::size_t i = rng.index(Z.n());
    std::size_t j = rng.index(Z.n());
    if (Z.row_ids[i].first == Z.row_ids[j].first) continue;
    rand_sum += 1.0 - cosine(Z.rows.row(i), Z.rows.row(j));
    ++got;
  }
  if (got == 0) return std::nullopt;
  double denominator = rand_sum / static_cast<double>(got);
  if (denominator < 1e-9) return std::nullopt;
  return numerator / denominator;
}

// ---------------------------------------------------------------------------
// Report assembly / serialization
// ---------------------------------------------------------------------------

inline DiagnosticsReport make_report(const EmbeddingMatrix& Z,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& pos_pairs,
                                     Rng& rng, long n_rand = 0) {
  DiagnosticsReport r;
  if (!pos_pairs.empty()) r.alignment = alignment(Z, pos_pairs);
  r.uniformity = uniformity(Z);
  SsdResult s = ssd(Z.rows);
  r.ssd = s.ssd;
  r.ssd_norm = s.ssd_norm;
  r.spectrum = s.spectrum;
  r.degenerate_spectrum = s.degenerate;
  try {
    r.ida_ratio = ida_ratio(Z, rng, n_rand);
  } catch (const Error&) {
    r.ida_ratio = std::nullopt;  // single-section embeddings: IDA undefined
  }
  return r;
}

inline nlohmann::ordered_json report_to_json(const DiagnosticsReport& r) {
  nlohmann::ordered_json j;
  j["alignment"] = r.alignment;
  j["uniformity"] = r.uniformity;
  j["ssd"] = r.ssd;
  j["ssd_norm"] = r.ssd_norm;
  if (r.ida_ratio) {
    j["ida_ratio"] = *r.ida_ratio;
  } else {
    j["ida_ratio"] = nullptr;
  }
  j["degenerate_spectrum"] = r.degenerate_spectrum;
  j["spectrum"] = r.spectrum;
  return j;
}

}  // namespace patemb
