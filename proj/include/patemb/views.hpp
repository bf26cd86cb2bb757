#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "patemb/corpus.hpp"
#include "patemb/errors.hpp"
#include "patemb/rng.hpp"

namespace patemb {

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

enum class PolicyKind { Dropout, Shuffle, Crop, Paraphrase, Section, IpcMatch };

/// An augmentation policy. Composite classical policies (e.g. shuffle/crop)
/// carry several kinds and choose uniformly per pair; composite section
/// policies carry several sections and sample uniformly among the available
/// ones. apply_to_negatives=false is the pos-only ablation: anchors are
/// forced to the raw TA view so the in-batch negative pool stays plain TA.
struct AugmentationPolicy {
  std::vector<PolicyKind> kinds;
  std::set<SectionKind> sections;  // for Section policies; Title excluded
  bool apply_to_negatives = true;
  bool crop_keep_span = false;     // sensitivity flag: keep the 10% span instead

  std::string name() const;

  /// Parses names like "dropout", "shuffle", "crop", "shuffle/crop",
  /// "paraphrase", "ipc", "section:claims", "section:claims+summary".
  static AugmentationPolicy parse(const std::string& s);
};

inline const char* policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Dropout: return "dropout";
    case PolicyKind::Shuffle: return "shuffle";
    case PolicyKind::Crop: return "crop";
    case PolicyKind::Paraphrase: return "paraphrase";
    case PolicyKind::Section: return "section";
    case PolicyKind::IpcMatch: return "ipc";
  }
  return "";
}

inline std::string AugmentationPolicy::name() const {
  std::string s;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) s += "/";
    s += policy_kind_name(kinds[i]);
    if (kinds[i] == PolicyKind::Section) {
      s += ":";
      bool first = true;
      for (SectionKind k : sections) {
        if (!first) s += "+";
        s += section_key(k);
        first = false;
      }
    }
  }
  if (!apply_to_negatives) s += "@pos-only";
  return s;
}

inline AugmentationPolicy AugmentationPolicy::parse(const std::string& spec) {
  AugmentationPolicy p;
  std::string s = spec;
  if (auto at = s.find("@pos-only"); at != std::string::npos) {
    p.apply_to_negatives = false;
    s.erase(at);
  }
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto slash = s.find('/', pos);
    std::string part = s.substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
    pos = slash == std::string::npos ? s.size() + 1 : slash + 1;
    if (part.empty()) continue;
    if (part == "dropout") {
      p.kinds.push_back(PolicyKind::Dropout);
    } else if (part == "shuffle") {
      p.kinds.push_back(PolicyKind::Shuffle);
    } else if (part == "crop") {
      p.kinds.push_back(PolicyKind::Crop);
    } else if (part == "paraphrase") {
      p.kinds.push_back(PolicyKind::Paraphrase);
    } else if (part == "ipc") {
      p.kinds.push_back(PolicyKind::IpcMatch);
    } else if (part.rfind("section:", 0) == 0) {
      p.kinds.push_back(PolicyKind::Section);
      std::string list = part.substr(8);
      std::size_t q = 0;
      while (q <= list.size()) {
        auto plus = list.find('+', q);
        std::string sec = list.substr(q, plus == std::string::npos ? std::string::npos : plus - q);
        q = plus == std::string::npos ? list.size() + 1 : plus + 1;
        if (sec.empty()) continue;
        auto kind = section_from_key(sec);
        if (!kind) throw usage_error("unknown section in policy: " + sec);
        if (*kind == SectionKind::Title) throw usage_error("Title cannot be a section view");
        p.sections.insert(*kind);
      }
      if (p.sections.empty()) throw usage_error("section policy needs at least one section");
    } else {
      throw usage_error("unknown policy: " + part);
    }
  }
  if (p.kinds.empty()) throw usage_error("empty policy: " + spec);
  return p;
}

// ---------------------------------------------------------------------------
// Pairs and batches
// ---------------------------------------------------------------------------

enum class PairKind { DropoutPositive, SectionPositive, CrossDocPositive };

struct TrainingPair {
  TokenSeq anchor;
  TokenSeq positive;
  PairKind kind = PairKind::DropoutPositive;
  std::string anchor_doc;
  std::string positive_doc;
};

struct Batch {
  std::vector<TrainingPair> pairs;
  std::uint64_t seed = 0;
  std::string policy_name;
};

/// Per-run counters for the logged fallback paths.
struct FallbackCounts {
  std::size_t section_missing = 0;   // section policy had no available section
  std::size_t ipc_no_match = 0;      // ipc policy found no exact-subgroup partner
};

/// Builds training pairs for one corpus under one policy. Owns the tokenized
/// views, the paraphrase sidecar, and the IPC exact-subgroup index.
class ViewBuilder {
 public:
  ViewBuilder(const std::vector<PatentDoc>& docs, const Vocab& vocab, std::size_t max_len,
              std::map<std::string, std::string> paraphrases = {})
      : docs_(docs), vocab_(vocab), max_len_(max_len), paraphrases_(std::move(paraphrases)) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      std::string key;
      for (const auto& g : docs[i].ipc_subgroups) {
        key += g;
        key += '|';
      }
      ipc_index_[key].push_back(i);
      id_index_[docs[i].doc_id] = i;
    }
  }

  const std::vector<PatentDoc>& docs() const { return docs_; }
  const FallbackCounts& fallbacks() const { return fallbacks_; }
  void reset_fallbacks() { fallbacks_ = {}; }

  TokenSeq ta_tokens(const PatentDoc& doc) const {
    return tokenize(make_view_text(doc, SectionKind::Abstract), vocab_, max_len_);
  }

  /// Section-based positive: viewA = TA, viewB = a uniformly sampled section
  /// from the available intersection; Abstract draws become dropout
  /// positives. anchor/positive are swapped with probability 0.5 when
  /// allow_swap is set.
  TrainingPair build_pair_section(const PatentDoc& doc, const std::set<SectionKind>& sections,
                                  Rng& rng, bool allow_swap = true) {
    TrainingPair pair;
    pair.anchor_doc = pair.positive_doc = doc.doc_id;
    pair.anchor = ta_tokens(doc);
    std::vector<SectionKind> avail;
    for (SectionKind k : sections) {
      if (doc.has(k)) avail.push_back(k);
    }
    if (avail.empty()) {
      ++fallbacks_.section_missing;
      pair.positive = pair.anchor;
      pair.kind = PairKind::DropoutPositive;
    } else {
      SectionKind chosen = avail[rng.index(avail.size())];
      if (chosen == SectionKind::Abstract) {
        pair.positive = pair.anchor;
        pair.kind = PairKind::DropoutPositive;
      } else {
        pair.positive = tokenize(make_view_text(doc, chosen), vocab_, max_len_);
        pair.kind = PairKind::SectionPositive;
      }
    }
    maybe_swap(pair, rng, allow_swap);
    return pair;
  }

  /// Shuffle / Crop / Paraphrase positives over the TA view.
  TrainingPair build_pair_classical(const PatentDoc& doc, PolicyKind kind, Rng& rng,
                                    bool allow_swap = true, bool crop_keep_span = false) {
    TrainingPair pair;
    pair.anchor_doc = pair.positive_doc = doc.doc_id;
    pair.anchor = ta_tokens(doc);
    pair.kind = PairKind::SectionPositive;
    switch (kind) {
      case PolicyKind::Shuffle: {
        std::string ta = make_view_text(doc, SectionKind::Abstract);
        pair.positive = tokenize(shuffle_sentences(ta, rng), vocab_, max_len_);
        break;
      }
      case PolicyKind::Crop: {
        pair.positive = crop_tokens(pair.anchor, rng, crop_keep_span);
        break;
      }
      case PolicyKind::Paraphrase: {
        auto it = paraphrases_.find(doc.doc_id);
        if (it == paraphrases_.end()) {
          throw data_error("missing_paraphrase: " + doc.doc_id);
        }
        std::string text = std::string(section_tag(SectionKind::Abstract)) + " " + it->second;
        pair.positive = tokenize(text, vocab_, max_len_);
        break;
      }
      default:
        throw usage_error("build_pair_classical: unsupported kind");
    }
    maybe_swap(pair, rng, allow_swap);
    return pair;
  }

  /// Cross-document positive: TA of a different document with the exact same
  /// sorted subgroup list. Falls back to a dropout positive when unmatched.
  TrainingPair build_pair_ipc(const PatentDoc& doc, Rng& rng, bool allow_swap = true) {
    TrainingPair pair;
    pair.anchor_doc = doc.doc_id;
    pair.anchor = ta_tokens(doc);
    std::string key;
    for (const auto& g : doc.ipc_subgroups) {
      key += g;
      key += '|';
    }
    const auto& group = ipc_index_.at(key);
    std::size_t self = id_index_.at(doc.doc_id);
    if (group.size() < 2) {
      ++fallbacks_.ipc_no_match;
      pair.positive_doc = doc.doc_id;
      pair.positive = pair.anchor;
      pair.kind = PairKind::DropoutPositive;
    } else {
      std::size_t pick = group[rng.index(group.size())];
      while (pick == self) pick = group[rng.index(group.size())];
      pair.positive_doc = docs_[pick].doc_id;
      pair.positive = ta_tokens(docs_[pick]);
      pair.kind = PairKind::CrossDocPositive;
    }
    maybe_swap(pair, rng, allow_swap);
    return pair;
  }

  /// Dropout positive: identical token views; the encoder's independent
  /// dropout masks supply the variation.
  TrainingPair build_pair_dropout(const PatentDoc& doc, Rng& rng, bool allow_swap = true) {
    TrainingPair pair;
    pair.anchor_doc = pair.positive_doc = doc.doc_id;
    pair.anchor = ta_tokens(doc);
    pair.positive = pair.anchor;
    pair.kind = PairKind::DropoutPositive;
    maybe_swap(pair, rng, allow_swap);
    return pair;
  }

  TrainingPair build_pair(const PatentDoc& doc, const AugmentationPolicy& policy, Rng& rng) {
    bool allow_swap = policy.apply_to_negatives;
    PolicyKind kind = policy.kinds.size() == 1
                          ? policy.kinds[0]
                          : policy.kinds[rng.index(policy.kinds.size())];
    switch (kind) {
      case PolicyKind::Dropout:
        return build_pair_dropout(doc, rng, allow_swap);
      case PolicyKind::Section:
        return build_pair_section(doc, policy.sections, rng, allow_swap);
      case PolicyKind::IpcMatch:
        return build_pair_ipc(doc, rng, allow_swap);
      default:
        return build_pair_classical(doc, kind, rng, allow_swap, policy.crop_keep_span);
    }
  }

  /// N pairs over distinct anchor documents. In pos-only mode every anchor
  /// is the raw TA view (no swap), so in-batch negatives stay plain TA.
  Batch make_batch(const AugmentationPolicy& policy, std::size_t n, Rng& rng) {
    return make_batch_from(policy, n, rng, {});
  }

  /// Same, restricted to a subset of document indices (training split).
  Batch make_batch_from(const AugmentationPolicy& policy, std::size_t n, Rng& rng,
                        const std::vector<std::size_t>& subset) {
    std::size_t pool = subset.empty() ? docs_.size() : subset.size();
    if (n > pool) throw data_error("insufficient_docs for batch");
    Batch batch;
    batch.policy_name = policy.name();
    auto picks = rng.sample_without_replacement(pool, n);
    for (std::size_t p : picks) {
      std::size_t i = subset.empty() ? p : subset[p];
      batch.pairs.push_back(build_pair(docs_[i], policy, rng));
    }
    return batch;
  }

  /// Sentence shuffle of a view text: split on terminal punctuation,
  /// permute uniformly, rejoin.
  static std::string shuffle_sentences(const std::string& text, Rng& rng) {
    std::vector<std::string> sentences;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
      cur.push_back(text[i]);
      char c = text[i];
      if ((c == '.' || c == '?' || c == '!') &&
          (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
        sentences.push_back(detail::strip(cur));
        cur.clear();
      }
    }
    if (!detail::strip(cur).empty()) sentences.push_back(detail::strip(cur));
    rng.shuffle(sentences);
    std::string out;
    for (const auto& s : sentences) {
      if (!out.empty()) out += ' ';
      out += s;
    }
    return out;
  }

  /// Deletes (or, with keep_span, keeps only) a contiguous span of
  /// ceil(10% * len) tokens at a uniformly random offset.
  static TokenSeq crop_tokens(const TokenSeq& tokens, Rng& rng, bool keep_span = false) {
    std::size_t len = tokens.size();
    std::size_t span = (len + 9) / 10;  // ceil(0.1 * len)
    if (span >= len) span = len > 1 ? len - 1 : 0;
    std::size_t start = rng.index(len - span + 1);
    TokenSeq out;
    if (keep_span) {
      out.assign(tokens.begin() + start, tokens.begin() + start + span);
    } else {
      out.assign(tokens.begin(), tokens.begin() + start);
      out.insert(out.end(), tokens.begin() + start + span, tokens.end());
    }
    if (out.empty()) out = tokens;
    return out;
  }

 private:
  void maybe_swap(TrainingPair& pair, Rng& rng, bool allow_swap) {
    if (!allow_swap) return;
    if (rng.bernoulli(0.5)) {
      std::swap(pair.anchor, pair.positive);
      std::swap(pair.anchor_doc, pair.positive_doc);
    }
  }

  const std::vector<PatentDoc>& docs_;
  const Vocab& vocab_;
  std::size_t max_len_;
  std::map<std::string, std::string> paraphrases_;
  std::map<std::string, std::vector<std::size_t>> ipc_index_;
  std::unordered_map<std::string, std::size_t> id_index_;
  FallbackCounts fallbacks_;
};

/// Loads a paraphrase sidecar: JSONL of {id, paraphrase}.
inline std::map<std::string, std::string> load_paraphrases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open paraphrase sidecar: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("paraphrase").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void save_paraphrases(const std::vector<std::pair<std::string, std::string>>& paras,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write paraphrase sidecar: " + path);
  for (const auto& [id, text] : paras) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["paraphrase"] = text;
    out << j.dump() << "\n";
  }
}

}  // namespace patemb
