#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "patemb/errors.hpp"
#include "patemb/rng.hpp"

namespace patemb {

// ---------------------------------------------------------------------------
// Section kinds and tags
// ---------------------------------------------------------------------------

enum class SectionKind : int {
  Title = 0,
  Abstract,
  Claims,
  Background,
  Summary,
  Drawing,
  Description,
};

inline constexpr int kNumSectionKinds = 7;

inline constexpr std::array<SectionKind, kNumSectionKinds> all_section_kinds() {
  return {SectionKind::Title,   SectionKind::Abstract, SectionKind::Claims,
          SectionKind::Background, SectionKind::Summary, SectionKind::Drawing,
          SectionKind::Description};
}

/// Section tag token text. Background uses [invention], matching the tag set
/// patent encoders conventionally reserve for it.
inline const char* section_tag(SectionKind k) {
  switch (k) {
    case SectionKind::Title: return "[title]";
    case SectionKind::Abstract: return "[abstract]";
    case SectionKind::Claims: return "[claim]";
    case SectionKind::Background: return "[invention]";
    case SectionKind::Summary: return "[summary]";
    case SectionKind::Drawing: return "[drawing]";
    case SectionKind::Description: return "[description]";
  }
  return "";
}

/// JSONL field name for a section.
inline const char* section_key(SectionKind k) {
  switch (k) {
    case SectionKind::Title: return "title";
    case SectionKind::Abstract: return "abstract";
    case SectionKind::Claims: return "claims";
    case SectionKind::Background: return "background";
    case SectionKind::Summary: return "summary";
    case SectionKind::Drawing: return "drawing";
    case SectionKind::Description: return "description";
  }
  return "";
}

inline std::optional<SectionKind> section_from_key(std::string_view key) {
  for (SectionKind k : all_section_kinds()) {
    if (key == section_key(k)) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// PatentDoc and JSONL schema
// ---------------------------------------------------------------------------

struct PatentDoc {
  std::string doc_id;
  std::map<SectionKind, std::string> sections;
  std::vector<std::string> ipc_subgroups;  // sorted ascending, unique
  std::set<std::string> cited_ids;
  int filing_year = 0;

  bool has(SectionKind k) const { return sections.count(k) > 0; }
  const std::string& text(SectionKind k) const { return sections.at(k); }

  bool operator==(const PatentDoc&) const = default;
};

inline std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    bool ws = std::isspace(c) != 0;
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

/// Parses one JSONL object into a PatentDoc. Unknown keys are rejected.
inline PatentDoc doc_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "id", "title", "abstract", "claims", "background", "summary",
      "drawing", "description", "ipc", "cites", "year"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw data_error("unknown key in document: " + it.key());
  }
  PatentDoc d;
  d.doc_id = j.at("id").get<std::string>();
  for (SectionKind k : all_section_kinds()) {
    const char* key = section_key(k);
    if (j.contains(key) && !j[key].is_null()) {
      std::string s = j[key].get<std::string>();
      if (!s.empty()) d.sections[k] = std::move(s);
    }
  }
  if (j.contains("ipc")) {
    d.ipc_subgroups = j["ipc"].get<std::vector<std::string>>();
    std::sort(d.ipc_subgroups.begin(), d.ipc_subgroups.end());
    d.ipc_subgroups.erase(std::unique(d.ipc_subgroups.begin(), d.ipc_subgroups.end()),
                          d.ipc_subgroups.end());
  }
  if (j.contains("cites")) {
    for (const auto& c : j["cites"]) d.cited_ids.insert(c.get<std::string>());
  }
  if (j.contains("year")) d.filing_year = j["year"].get<int>();
  return d;
}

/// Serializes in the fixed schema key order so output files are canonical.
inline nlohmann::ordered_json doc_to_json(const PatentDoc& d) {
  nlohmann::ordered_json j;
  j["id"] = d.doc_id;
  for (SectionKind k : all_section_kinds()) {
    j[section_key(k)] = d.has(k) ? d.text(k) : "";
  }
  j["ipc"] = d.ipc_subgroups;
  j["cites"] = std::vector<std::string>(d.cited_ids.begin(), d.cited_ids.end());
  j["year"] = d.filing_year;
  return j;
}

inline std::vector<PatentDoc> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open corpus file: " + path);
  std::vector<PatentDoc> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    try {
      docs.push_back(doc_from_json(j));
    } catch (const std::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

inline void save_jsonl(const std::vector<PatentDoc>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write corpus file: " + path);
  for (const auto& d : docs) out << doc_to_json(d).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMinSectionWords = 15;

/// All-caps boilerplate prefaces stripped from the start of lines.
inline const std::vector<std::string>& boilerplate_prefixes() {
  static const std::vector<std::string> v = {"CROSS-REFERENCE", "GOVERNMENT INTEREST"};
  return v;
}

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Collapses runs of whitespace to single spaces.
inline std::string squeeze_ws(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool prev_ws = true;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!prev_ws) out.push_back(' ');
      prev_ws = true;
    } else {
      out.push_back(static_cast<char>(c));
      prev_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace detail

/// Cleans one raw section body. Returns the cleaned text, or nullopt with
/// `reason` set when the section must be dropped. Rules:
///  - heading spans between <SOH> and <EOH> removed
///  - cancelled claim entries ("1-16. (canceled)") removed
///  - lines starting with a boilerplate all-caps header removed
///  - sections under 15 words rejected (Title exempt)
inline std::optional<std::string> clean_section(SectionKind kind, const std::string& raw,
                                                std::string* reason = nullptr) {
  std::string text = raw;

  // <SOH>...<EOH> heading spans
  static const std::regex soh_re("<SOH>[\\s\\S]*?<EOH>");
  text = std::regex_replace(text, soh_re, " ");

  // cancelled claims, e.g. "1-16. (canceled)" or "3. (cancelled)";
  // en dash accepted alongside hyphen
  if (kind == SectionKind::Claims) {
    static const std::regex cancel_re(
        "[0-9]+(\\s*(?:-|–)\\s*[0-9]+)?\\.\\s*\\([Cc]ancell?ed\\)\\.?");
    text = std::regex_replace(text, cancel_re, " ");
  }

  // boilerplate lines
  {
    std::istringstream lines(text);
    std::string line, kept;
    while (std::getline(lines, line)) {
      std::string t = detail::strip(line);
      bool boiler = false;
      for (const auto& p : boilerplate_prefixes()) {
        if (t.rfind(p, 0) == 0) {
          boiler = true;
          break;
        }
      }
      if (!boiler) {
        kept += line;
        kept += "\n";
      }
    }
    text = kept;
  }

  text = detail::squeeze_ws(text);

  if (kind != SectionKind::Title && count_words(text) < kMinSectionWords) {
    if (reason) *reason = "too_short";
    return std::nullopt;
  }
  if (text.empty()) {
    if (reason) *reason = "empty";
    return std::nullopt;
  }
  return text;
}

struct CleanStats {
  std::size_t docs_in = 0;
  std::size_t docs_dropped_no_abstract = 0;
  std::map<std::string, std::size_t> sections_dropped;  // key: section_key:reason
};

/// Cleans every section of every document; drops documents whose abstract
/// does not survive. Summary bodies that are misclassified figure
/// descriptions (starting with "BRIEF DESCRIPTION OF THE DRAWINGS") are
/// removed as well.
inline std::vector<PatentDoc> clean_corpus(const std::vector<PatentDoc>& docs,
                                           CleanStats* stats = nullptr) {
  std::vector<PatentDoc> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    if (stats) ++stats->docs_in;
    PatentDoc cleaned = doc;
    cleaned.sections.clear();
    for (const auto& [kind, raw] : doc.sections) {
      std::string body = raw;
      if (kind == SectionKind::Summary) {
        std::string t = detail::strip(body);
        if (t.rfind("BRIEF DESCRIPTION OF THE DRAWINGS", 0) == 0) {
          if (stats) ++stats->sections_dropped["summary:misclassified_drawing"];
          continue;
        }
      }
      std::string reason;
      auto clean = clean_section(kind, body, &reason);
      if (clean) {
        cleaned.sections[kind] = *clean;
      } else if (stats) {
        ++stats->sections_dropped[std::string(section_key(kind)) + ":" + reason];
      }
    }
    if (!cleaned.has(SectionKind::Abstract)) {
      if (stats) ++stats->docs_dropped_no_abstract;
      continue;
    }
    out.push_back(std::move(cleaned));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization and vocabulary
// ---------------------------------------------------------------------------

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kSepToken = 8;  // "[sep]"
inline constexpr TokenId kFirstWordId = 9;
inline constexpr const char* kSepText = "[SEP]";

/// Section tags occupy token ids 1..7 in enum order (Title=1 .. Description=7).
inline TokenId section_tag_id(SectionKind k) { return static_cast<TokenId>(k) + 1; }

/// Splits lowercased text into word tokens. Words are maximal runs of
/// alphanumeric bytes (bytes >= 0x80 count as letters so any UTF-8 input is
/// handled). Bracketed special tokens ([abstract], [SEP], ...) stay atomic.
inline std::vector<std::string> split_words(std::string_view text) {
  static const std::vector<std::string> specials = [] {
    std::vector<std::string> v;
    for (SectionKind k : all_section_kinds()) v.push_back(section_tag(k));
    v.push_back("[sep]");
    return v;
  }();
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      // try to match a special token
      bool matched = false;
      for (const auto& sp : specials) {
        if (i + sp.size() <= text.size()) {
          bool eq = true;
          for (std::size_t k = 0; k < sp.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(text[i + k])) != sp[k]) {
              eq = false;
              break;
            }
          }
          if (eq) {
            flush();
            words.push_back(sp);
            i += sp.size() - 1;
            matched = true;
            break;
          }
        }
      }
      if (matched) continue;
    }
    bool wordish = std::isalnum(c) != 0 || c >= 0x80;
    if (wordish) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return words;
}

struct Vocab {
  std::unordered_map<std::string, TokenId> ids;  // ordinary words only
  std::vector<std::string> words;                // id = kFirstWordId + index
  std::int32_t oov_buckets = 1024;

  TokenId oov_base() const {
    return kFirstWordId + static_cast<TokenId>(words.size());
  }
  /// Embedding-table size: pad + tags + sep + words + OOV buckets.
  std::int32_t table_size() const { return oov_base() + oov_buckets; }

  TokenId lookup(const std::string& w) const {
    for (SectionKind k : all_section_kinds()) {
      if (w == section_tag(k)) return section_tag_id(k);
    }
    if (w == "[sep]") return kSepToken;
    auto it = ids.find(w);
    if (it != ids.end()) return it->second;
    return oov_base() + static_cast<TokenId>(fnv1a64(w) % static_cast<std::uint64_t>(oov_buckets));
  }

  void add(const std::string& w) {
    if (ids.count(w)) return;
    ids.emplace(w, kFirstWordId + static_cast<TokenId>(words.size()));
    words.push_back(w);
  }

  /// Builds the vocabulary by scanning documents in order, sections in enum
  /// order; ids are assigned in first-seen order, which is deterministic.
  static Vocab build(const std::vector<PatentDoc>& docs, std::int32_t oov_buckets = 1024) {
    Vocab v;
    v.oov_buckets = oov_buckets;
    for (const auto& d : docs) {
      for (SectionKind k : all_section_kinds()) {
        if (!d.has(k)) continue;
        for (const auto& w : split_words(d.text(k))) {
          if (w.front() == '[') continue;  // specials never enter the word table
          v.add(w);
        }
      }
    }
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write vocab file: " + path);
    out << "[pad]\t" << kPadToken << "\n";
    for (SectionKind k : all_section_kinds()) {
      out << section_tag(k) << "\t" << section_tag_id(k) << "\n";
    }
    out << "[sep]\t" << kSepToken << "\n";
    for (std::size_t i = 0; i < words.size(); ++i) {
      out << words[i] << "\t" << (kFirstWordId + i) << "\n";
    }
    out << "#oov_buckets\t" << oov_buckets << "\n";
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open vocab file: " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw data_error("malformed vocab line: " + line);
      std::string tok = line.substr(0, tab);
      long id = std::stol(line.substr(tab + 1));
      if (tok == "#oov_buckets") {
        v.oov_buckets = static_cast<std::int32_t>(id);
      } else if (tok.front() == '[') {
        continue;  // reserved tokens have fixed ids
      } else {
        if (id != v.oov_base()) throw data_error("non-dense vocab id for: " + tok);
        v.add(tok);
      }
    }
    return v;
  }
};

/// Tokenizes text: lowercase, word split, vocab lookup with hashed OOV
/// buckets, truncation to max_len. Total for any input with at least one word.
inline TokenSeq tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len = 128) {
  TokenSeq seq;
  for (const auto& w : split_words(text)) {
    seq.push_back(vocab.lookup(w));
    if (seq.size() >= max_len) break;
  }
  if (seq.empty()) throw data_error("empty_after_tokenization");
  return seq;
}

// ---------------------------------------------------------------------------
// View construction
// ---------------------------------------------------------------------------

/// Text of one training/eval view. Abstract yields the TA view:
/// "[abstract] <title> [SEP] <abstract>". Other kinds: "<tag> <section text>".
inline std::string make_view_text(const PatentDoc& doc, SectionKind kind) {
  if (!doc.has(kind)) {
    throw data_error("missing_section: " + std::string(section_key(kind)) + " in " + doc.doc_id);
  }
  std::string out = section_tag(kind);
  out += ' ';
  if (kind == SectionKind::Abstract) {
    if (doc.has(SectionKind::Title)) {
      out += doc.text(SectionKind::Title);
      out += ' ';
      out += kSepText;
      out += ' ';
    }
    out += doc.text(SectionKind::Abstract);
  } else {
    out += doc.text(kind);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SynthConfig {
  int n_docs = 200;
  int n_classes = 8;
  std::uint64_t seed = 0;
  double p_cite = 0.08;     // citation rate scale within a class
  double length_scale = 1.0;
  int subtopics_per_class = 4;
};

namespace detail {

/// Pseudo-word generator: pronounceable consonant-vowel syllables.
inline std::string make_word(Rng& rng, int syllables) {
  static const char* cons = "bcdfghjklmnprstvwz";
  static const char* vows = "aeiou";
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w.push_back(cons[rng.index(18)]);
    w.push_back(vows[rng.index(5)]);
    if (rng.bernoulli(0.3)) w.push_back(cons[rng.index(18)]);
  }
  return w;
}

inline std::vector<std::string> make_pool(Rng& rng, int n, int syllables) {
  std::set<std::string> seen;
  std::vector<std::string> pool;
  while (static_cast<int>(pool.size()) < n) {
    std::string w = make_word(rng, syllables);
    if (seen.insert(w).second) pool.push_back(w);
  }
  return pool;
}

}  // namespace detail

/// Latent structure behind a synthetic corpus; exposed so the generator can
/// also emit paraphrases drawn from the same per-document distributions.
struct SynthModel {
  SynthConfig cfg;
  std::vector<std::string> common_pool;                    // shared filler words
  std::vector<std::vector<std::string>> class_pools;       // per-class core words
  std::vector<std::vector<std::vector<std::string>>> topic_pools;  // [class][subtopic]
  std::vector<std::vector<std::string>> style_pools;       // per-section style words
  std::vector<int> doc_class;
  std::vector<std::vector<double>> doc_mixture;            // over subtopics

  static SynthModel build(const SynthConfig& cfg) {
    if (cfg.n_docs < 2 * cfg.n_classes || cfg.n_classes < 1) {
      throw usage_error("invalid_params: need n_docs >= 2*n_classes and n_classes >= 1");
    }
    SynthModel m;
    m.cfg = cfg;
    Rng vocab_rng(derive_seed(cfg.seed, "synth-vocab"));
    m.common_pool = detail::make_pool(vocab_rng, 200, 2);
    for (int c = 0; c < cfg.n_classes; ++c) {
      m.class_pools.push_back(detail::make_pool(vocab_rng, 40, 3));
      std::vector<std::vector<std::string>> topics;
      for (int t = 0; t < cfg.subtopics_per_class; ++t) {
        topics.push_back(detail::make_pool(vocab_rng, 30, 3));
      }
      m.topic_pools.push_back(std::move(topics));
    }
    for (int s = 0; s < kNumSectionKinds; ++s) {
      m.style_pools.push_back(detail::make_pool(vocab_rng, 20, 2));
    }
    Rng doc_rng(derive_seed(cfg.seed, "synth-docs"));
    for (int i = 0; i < cfg.n_docs; ++i) {
      m.doc_class.push_back(i % cfg.n_classes);
      std::vector<double> w(cfg.subtopics_per_class);
      double sum = 0.0;
      for (double& x : w) {
        x = -std::log(std::max(doc_rng.uniform(), 1e-300));  // Dirichlet(1)
        sum += x;
      }
      for (double& x : w) x /= sum;
      m.doc_mixture.push_back(std::move(w));
    }
    return m;
  }

  /// IPC subgroup for a class: distinct subclass per class, e.g. "A01B 1/03".
  std::string class_subgroup(int c) const {
    std::string sub;
    sub.push_back(static_cast<char>('A' + c % 8));
    sub += "01";
    sub.push_back(static_cast<char>('B' + c / 8));
    sub += " 1/";
    sub.push_back(static_cast<char>('0' + c / 10));
    sub.push_back(static_cast<char>('0' + c % 10));
    return sub;
  }

  /// Section body of `n_words`, drawn from the document's latent mixture.
  /// Mix: 10% common, 45% class core, 35% subtopic, 10% section style.
  std::string gen_text(int doc, SectionKind kind, int n_words, Rng& rng) const {
    int c = doc_class[doc];
    const auto& mix = doc_mixture[doc];
    std::string out;
    int words_in_sentence = 0;
    int sentence_len = 8 + static_cast<int>(rng.index(8));
    for (int w = 0; w < n_words; ++w) {
      double u = rng.uniform();
      const std::vector<std::string>* pool;
      if (u < 0.10) {
        pool = &common_pool;
      } else if (u < 0.55) {
        pool = &class_pools[c];
      } else if (u < 0.90) {
        double v = rng.uniform();
        int t = 0;
        double acc = 0.0;
        for (int k = 0; k < cfg.subtopics_per_class; ++k) {
          acc += mix[k];
          if (v < acc) {
            t = k;
            break;
          }
          t = k;
        }
        pool = &topic_pools[c][t];
      } else {
        pool = &style_pools[static_cast<int>(kind)];
      }
      if (!out.empty()) out += ' ';
      out += (*pool)[rng.index(pool->size())];
      if (++words_in_sentence >= sentence_len && kind != SectionKind::Title) {
        out += '.';
        words_in_sentence = 0;
        sentence_len = 8 + static_cast<int>(rng.index(8));
      }
    }
    if (kind != SectionKind::Title && !out.empty() && out.back() != '.') out += '.';
    return out;
  }

  /// Subtopic-mixture overlap in [0,1]; drives citation probability.
  double mixture_overlap(int i, int j) const {
    double s = 0.0;
    for (int k = 0; k < cfg.subtopics_per_class; ++k) {
      s += std::min(doc_mixture[i][k], doc_mixture[j][k]);
    }
    return s;
  }
};

struct SynthResult {
  std::vector<PatentDoc> docs;
  SynthModel model;
};

/// Deterministic synthetic corpus: class-pure IPC labels, topic-mixture
/// sections with per-section length profiles (abstract ~100 words, claims
/// ~10x abstract), and within-class citations biased toward topical overlap.
inline SynthResult generate_synthetic(const SynthConfig& cfg) {
  SynthModel model = SynthModel::build(cfg);

  std::vector<PatentDoc> docs(cfg.n_docs);
  for (int i = 0; i < cfg.n_docs; ++i) {
    Rng rng(derive_seed(cfg.seed, "synth-doc-text", static_cast<std::uint64_t>(i)));
    PatentDoc& d = docs[i];
    d.doc_id = "SYN" + std::to_string(100000 + i);
    d.filing_year = 2010 + i % 9;
    d.ipc_subgroups = {model.class_subgroup(model.doc_class[i])};
    int abstract_len = 80 + static_cast<int>(rng.index(41));  // 80..120
    double ls = cfg.length_scale;
    auto n = [&](double ratio) {
      return std::max(static_cast<int>(kMinSectionWords) + 1,
                      static_cast<int>(abstract_len * ratio * ls));
    };
    d.sections[SectionKind::Title] = model.gen_text(i, SectionKind::Title, 8, rng);
    d.sections[SectionKind::Abstract] =
        model.gen_text(i, SectionKind::Abstract, abstract_len, rng);
    d.sections[SectionKind::Claims] = model.gen_text(i, SectionKind::Claims, n(10.0), rng);
    d.sections[SectionKind::Background] =
        model.gen_text(i, SectionKind::Background, n(4.4), rng);
    d.sections[SectionKind::Summary] = model.gen_text(i, SectionKind::Summary, n(6.3), rng);
    d.sections[SectionKind::Drawing] = model.gen_text(i, SectionKind::Drawing, n(3.4), rng);
    d.sections[SectionKind::Description] =
        model.gen_text(i, SectionKind::Description, n(14.6), rng);
  }

  // citations: same class, probability scaled by subtopic overlap
  Rng cite_rng(derive_seed(cfg.seed, "synth-cites"));
  for (int i = 0; i < cfg.n_docs; ++i) {
    for (int j = 0; j < i; ++j) {
      if (model.doc_class[i] != model.doc_class[j]) continue;
      double ov = model.mixture_overlap(i, j);
      if (cite_rng.bernoulli(cfg.p_cite * ov * ov * 4.0)) {
        docs[i].cited_ids.insert(docs[j].doc_id);
      }
    }
  }
  return {std::move(docs), std::move(model)};
}

inline std::vector<PatentDoc> generate_synthetic_corpus(const SynthConfig& cfg) {
  return generate_synthetic(cfg).docs;
}

/// Paraphrase sidecar for a synthetic corpus: a fresh TA realization from the
/// same per-document word distribution. Returned as (doc_id, paraphrase).
inline std::vector<std::pair<std::string, std::string>> generate_synthetic_paraphrases(
    const SynthModel& model, const std::vector<PatentDoc>& docs) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Rng rng(derive_seed(model.cfg.seed, "synth-paraphrase", i));
    int abstract_len = 80 + static_cast<int>(rng.index(41));
    std::string para = model.gen_text(static_cast<int>(i), SectionKind::Title, 8, rng);
    para += " ";
    para += kSepText;
    para += " ";
    para += model.gen_text(static_cast<int>(i), SectionKind::Abstract, abstract_len, rng);
    out.emplace_back(docs[i].doc_id, para);
  }
  return out;
}

}  // namespace patemb
