// patemb: batch CLI over the corpus/views/encoder/train/diagnostics/eval
// pipeline. Every command is deterministic given config + seed, and every
// output artifact embeds the config hash.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patemb/config.hpp"
#include "patemb/corpus.hpp"
#include "patemb/diagnostics.hpp"
#include "patemb/encoder.hpp"
#include "patemb/eval.hpp"
#include "patemb/train.hpp"
#include "patemb/views.hpp"

namespace fs = std::filesystem;
using namespace patemb;

namespace {

void write_json(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write: " + path);
  out << j.dump(2) << "\n";
}

/// "n d" header, then one whitespace-separated row per line. Rows are tagged
/// row0..row(n-1), section Abstract; IDA is undefined for such inputs.
EmbeddingMatrix load_raw_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open embedding file: " + path);
  std::size_t n = 0, d = 0;
  if (!(in >> n >> d) || n == 0 || d == 0) throw data_error("bad embedding header in " + path);
  EmbeddingMatrix Z;
  Z.rows = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (!(in >> Z.rows(i, j))) throw data_error("short embedding file: " + path);
    }
    Z.row_ids.emplace_back("row" + std::to_string(i), SectionKind::Abstract);
  }
  return Z;
}

/// TA / claims / description rows for every document, inference path.
EmbeddingMatrix embed_sections(const std::vector<PatentDoc>& docs, const EncoderParams& params,
                               const Vocab& vocab, int max_len) {
  std::vector<std::pair<std::string, SectionKind>> tags;
  std::vector<std::vector<double>> rows;
  for (const auto& d : docs) {
    for (SectionKind k : {SectionKind::Abstract, SectionKind::Claims, SectionKind::Description}) {
      if (!d.has(k)) continue;
      rows.push_back(embed_inference(tokenize(make_view_text(d, k), vocab, max_len), params));
      tags.emplace_back(d.doc_id, k);
    }
  }
  if (rows.empty()) throw data_error("no embeddable sections in corpus");
  EmbeddingMatrix Z;
  Z.rows = Matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), Z.rows.row(i).begin());
  }
  Z.row_ids = std::move(tags);
  Z.normalized = true;
  return Z;
}

struct LabeledEmbeddings {
  Matrix X;
  std::vector<std::set<std::string>> labels;  // IPC subclasses
  std::vector<std::string> ids;
};

LabeledEmbeddings embed_ta_with_labels(const std::vector<PatentDoc>& docs,
                                       const EncoderParams& params, const Vocab& vocab,
                                       int max_len) {
  LabeledEmbeddings out;
  out.X = Matrix(docs.size(), params.dim);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto v = embed_inference(tokenize(make_view_text(docs[i], SectionKind::Abstract), vocab, max_len),
                             params);
    std::copy(v.begin(), v.end(), out.X.row(i).begin());
    std::set<std::string> ls;
    for (const auto& g : docs[i].ipc_subgroups) ls.insert(ipc_subclass(g));
    out.labels.push_back(std::move(ls));
    out.ids.push_back(docs[i].doc_id);
  }
  return out;
}

Vocab load_or_build_vocab(const std::string& vocab_path, const std::vector<PatentDoc>& docs,
                          const RunConfig& cfg) {
  if (!vocab_path.empty() && fs::exists(vocab_path)) return Vocab::load(vocab_path);
  Vocab v = Vocab::build(docs, cfg.oov_buckets);
  if (!vocab_path.empty()) v.save(vocab_path);
  return v;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_preprocess(const RunConfig& cfg, const std::string& in_path, const std::string& out_path,
                   const std::string& vocab_path) {
  auto raw = load_jsonl(in_path);
  CleanStats stats;
  auto cleaned = clean_corpus(raw, &stats);
  save_jsonl(cleaned, out_path);
  Vocab vocab = Vocab::build(cleaned, cfg.oov_buckets);
  if (!vocab_path.empty()) vocab.save(vocab_path);
  std::cout << "docs_in=" << stats.docs_in << " docs_out=" << cleaned.size()
            << " dropped_no_abstract=" << stats.docs_dropped_no_abstract << "\n";
  for (const auto& [rule, n] : stats.sections_dropped) {
    std::cout << "dropped_section " << rule << "=" << n << "\n";
  }
  std::cout << "vocab_words=" << vocab.words.size() << " config_hash=" << cfg.hash() << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg, int n_docs, int n_classes, const std::string& out_path,
              const std::string& para_path, double p_cite, double length_scale) {
  SynthConfig sc;
  sc.n_docs = n_docs;
  sc.n_classes = n_classes;
  sc.seed = cfg.seed;
  sc.p_cite = p_cite;
  sc.length_scale = length_scale;
  auto res = generate_synthetic(sc);
  save_jsonl(res.docs, out_path);
  if (!para_path.empty()) {
    save_paraphrases(generate_synthetic_paraphrases(res.model, res.docs), para_path);
  }
  std::cout << "docs=" << res.docs.size() << " config_hash=" << cfg.hash() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& corpus_path, const std::string& vocab_path,
              const std::string& para_path) {
  auto docs = load_jsonl(corpus_path);
  Vocab vocab = load_or_build_vocab(vocab_path, docs, cfg);
  std::map<std::string, std::string> paras;
  if (!para_path.empty()) paras = load_paraphrases(para_path);

  TrainResult res = train(docs, vocab, cfg.train_config(), std::move(paras));

  fs::create_directories(cfg.out_dir);
  std::string hash = cfg.hash();
  save_checkpoint(res.params, (fs::path(cfg.out_dir) / "checkpoint.json").string(), hash);
  save_trace_csv(res.trace, (fs::path(cfg.out_dir) / "trace.csv").string(), hash);

  nlohmann::ordered_json manifest;
  manifest["config_hash"] = hash;
  manifest["config"] = cfg.to_json();
  manifest["corpus"] = corpus_path;
  manifest["steps"] = res.params.step;
  manifest["fallback_section_missing"] = res.fallbacks.section_missing;
  manifest["fallback_ipc_no_match"] = res.fallbacks.ipc_no_match;
  manifest["eval_docs"] = res.eval_doc_ids;
  write_json(manifest, (fs::path(cfg.out_dir) / "manifest.json").string());

  if (!res.trace.empty()) {
    const auto& last = res.trace.back();
    std::cout << "final step=" << last.step << " loss=" << last.loss
              << " ssd_norm=" << last.ssd_norm << " knn_p1=" << last.knn_p1 << "\n";
  }
  std::cout << "checkpoint=" << (fs::path(cfg.out_dir) / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const std::string& ckpt_path, const std::string& emb_path,
                 const std::string& corpus_path, const std::string& pairs_path) {
  EmbeddingMatrix Z;
  if (!emb_path.empty()) {
    Z = load_raw_embeddings(emb_path);
    for (std::size_t i = 0; i < Z.n(); ++i) normalize(Z.rows.row(i));
    Z.normalized = true;
  } else {
    auto docs = load_jsonl(corpus_path);
    EncoderParams params = load_checkpoint(ckpt_path);
    Vocab vocab = Vocab::build(docs, cfg.oov_buckets);
    Z = embed_sections(docs, params, vocab, cfg.max_len);
  }

  // positive pairs for alignment: citing-cited TA rows, either from the
  // corpus citation graph or from a benchmark file
  std::vector<std::pair<std::size_t, std::size_t>> pos_pairs;
  if (!corpus_path.empty()) {
    std::map<std::string, std::size_t> ta_row;
    for (std::size_t i = 0; i < Z.n(); ++i) {
      if (Z.row_ids[i].second == SectionKind::Abstract) ta_row[Z.row_ids[i].first] = i;
    }
    auto add_pair = [&](const std::string& a, const std::string& b) {
      auto ia = ta_row.find(a), ib = ta_row.find(b);
      if (ia != ta_row.end() && ib != ta_row.end()) pos_pairs.emplace_back(ia->second, ib->second);
    };
    if (!pairs_path.empty()) {
      std::ifstream in(pairs_path);
      if (!in) throw data_error("cannot open pairs file: " + pairs_path);
      nlohmann::json j;
      in >> j;
      Benchmark b = benchmark_from_json(j);
      for (const auto& [qid, pos] : b.queries) {
        for (const auto& p : pos) add_pair(qid, p);
      }
    } else {
      for (const auto& d : load_jsonl(corpus_path)) {
        for (const auto& c : d.cited_ids) add_pair(d.doc_id, c);
      }
    }
  }

  Rng rng(derive_seed(cfg.seed, "ida"));
  DiagnosticsReport rep = make_report(Z, pos_pairs, rng, cfg.ida_n_rand);

  fs::create_directories(cfg.out_dir);
  nlohmann::ordered_json j = report_to_json(rep);
  j["config_hash"] = cfg.hash();
  j["n_rows"] = Z.n();
  j["n_pos_pairs"] = pos_pairs.size();
  write_json(j, (fs::path(cfg.out_dir) / "report.json").string());

  std::ofstream spec_csv(fs::path(cfg.out_dir) / "spectrum.csv");
  spec_csv << "# config_hash=" << cfg.hash() << "\nrank,singular_mass\n";
  spec_csv.precision(17);
  for (std::size_t i = 0; i < rep.spectrum.size(); ++i) {
    spec_csv << i << "," << rep.spectrum[i] << "\n";
  }
  std::cout << "alignment=" << rep.alignment << " uniformity=" << rep.uniformity
            << " ssd_norm=" << rep.ssd_norm << "\n";
  return 0;
}

int cmd_benchmark(const RunConfig& cfg, const std::string& corpus_path,
                  const std::string& out_path) {
  auto docs = load_jsonl(corpus_path);
  Rng rng(derive_seed(cfg.seed, "benchmark"));
  Benchmark b = build_benchmark(docs, cfg.benchmark, rng);
  nlohmann::ordered_json j = benchmark_to_json(b);
  j["config_hash"] = cfg.hash();
  write_json(j, out_path);
  std::cout << "queries=" << b.queries.size() << " pool=" << b.pool.size() << "\n";
  return 0;
}

Benchmark load_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open benchmark file: " + path);
  nlohmann::json j;
  in >> j;
  return benchmark_from_json(j);
}

void write_recall_csv(const RecallReport& rep, const std::string& path, const std::string& hash) {
  std::ofstream out(path);
  out << "# config_hash=" << hash << "\nquery_id,K,recall\n";
  out.precision(17);
  for (const auto& [qid, recalls] : rep.per_query) {
    for (const auto& [k, r] : recalls) out << qid << "," << k << "," << r << "\n";
  }
}

int cmd_eval(const RunConfig& cfg, const std::string& task, const std::string& ckpt_path,
             const std::string& corpus_path, const std::string& bench_path) {
  auto docs = load_jsonl(corpus_path);
  Vocab vocab = Vocab::build(docs, cfg.oov_buckets);
  fs::create_directories(cfg.out_dir);
  std::string hash = cfg.hash();
  nlohmann::ordered_json summary;
  summary["task"] = task;
  summary["config_hash"] = hash;

  if (task == "retrieval") {
    EncoderParams params = load_checkpoint(ckpt_path);
    Benchmark bench = load_benchmark(bench_path);
    auto pool_abs = make_pool_abs(bench, docs, params, vocab, cfg.max_len);
    RecallReport abs = recall_at_k(pool_abs, cfg.recall_k);
    write_recall_csv(abs, (fs::path(cfg.out_dir) / "recall_abs.csv").string(), hash);
    for (const auto& [k, r] : abs.mean_recall) summary["recall_abs"][std::to_string(k)] = r;

    auto pool_clm = make_pool_claims_all(bench, docs, params, vocab, cfg.max_len);
    auto rankings = rank_claims_to_all(pool_clm);
    RecallReport clm = recall_at_k(pool_clm, cfg.recall_k);
    write_recall_csv(clm, (fs::path(cfg.out_dir) / "recall_claims_all.csv").string(), hash);
    for (const auto& [k, r] : clm.mean_recall) summary["recall_claims_all"][std::to_string(k)] = r;
    for (const auto& [k, frac] : section_mix(rankings, 100)) {
      summary["section_mix_top100"][section_key(k)] = frac;
    }
    summary["queries_without_positives"] = abs.queries_without_positives;
  } else if (task == "knn" || task == "probe") {
    EncoderParams params = load_checkpoint(ckpt_path);
    auto emb = embed_ta_with_labels(docs, params, vocab, cfg.max_len);
    // 85/15 split, seed-deterministic
    Rng rng(derive_seed(cfg.seed, "eval-split"));
    std::vector<std::size_t> idx(docs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    std::size_t n_test = std::max<std::size_t>(1, idx.size() * 15 / 100);
    if (task == "knn") {
      std::vector<KnnExample> tr, te;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        KnnExample ex;
        auto row = emb.X.row(idx[i]);
        ex.vec.assign(row.begin(), row.end());
        ex.labels = emb.labels[idx[i]];
        (i < n_test ? te : tr).push_back(std::move(ex));
      }
      KnnReport rep = knn_classify(tr, te, cfg.knn_k);
      for (const auto& [m, p] : rep.p_at) summary["p_at"][std::to_string(m)] = p;
    } else {
      ProbeConfig pc;
      pc.hidden = cfg.probe_hidden;
      pc.epochs = cfg.probe_epochs;
      pc.lr = cfg.probe_lr;
      pc.seed = cfg.seed;
      ProbeReport rep = linear_probe(emb.X, emb.labels, pc);
      for (const auto& [m, p] : rep.p_at) summary["p_at"][std::to_string(m)] = p;
      summary["singleton_dev_classes"] = rep.singleton_dev_classes;
    }
  } else if (task == "bm25") {
    Benchmark bench = load_benchmark(bench_path);
    std::unordered_map<std::string, const PatentDoc*> by_id;
    for (const auto& d : docs) by_id[d.doc_id] = &d;
    std::vector<std::pair<std::string, std::string>> id_text;
    for (const auto& id : bench.pool) {
      id_text.emplace_back(id, make_view_text(*by_id.at(id), SectionKind::Abstract));
    }
    Bm25Index index = Bm25Index::build(id_text);
    RecallReport rep;
    rep.k_list = cfg.recall_k;
    for (int k : cfg.recall_k) rep.mean_recall[k] = 0.0;
    std::size_t used = 0;
    for (const auto& [qid, pos] : bench.queries) {
      if (pos.empty()) {
        ++rep.queries_without_positives;
        continue;
      }
      auto ranked = bm25_search(index, make_view_text(*by_id.at(qid), SectionKind::Abstract),
                                index.doc_ids.size());
      std::erase_if(ranked, [&](const ScoredDoc& s) { return s.doc_id == qid; });
      std::map<int, double> recalls;
      for (int k : rep.k_list) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < std::min<std::size_t>(k, ranked.size()); ++i) {
          if (pos.count(ranked[i].doc_id)) ++hit;
        }
        recalls[k] = static_cast<double>(hit) / static_cast<double>(pos.size());
        rep.mean_recall[k] += recalls[k];
      }
      rep.per_query.emplace_back(qid, std::move(recalls));
      ++used;
    }
    if (used) {
      for (int k : rep.k_list) rep.mean_recall[k] /= static_cast<double>(used);
    }
    write_recall_csv(rep, (fs::path(cfg.out_dir) / "recall_bm25.csv").string(), hash);
    for (const auto& [k, r] : rep.mean_recall) summary["recall_bm25"][std::to_string(k)] = r;
  } else {
    throw usage_error("unknown eval task: " + task);
  }

  write_json(summary, (fs::path(cfg.out_dir) / "summary.json").string());
  std::cout << summary.dump(2) << "\n";
  return 0;
}

void flatten_json(const nlohmann::json& j, const std::string& prefix,
                  std::map<std::string, double>& out) {
  if (j.is_number()) {
    out[prefix] = j.get<double>();
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  }
}

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& reports,
                const std::string& out_path) {
  std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
  std::set<std::string> keys;
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open report: " + path);
    nlohmann::json j;
    in >> j;
    std::map<std::string, double> flat;
    flatten_json(j, "", flat);
    for (const auto& [k, v] : flat) keys.insert(k);
    rows.emplace_back(path, std::move(flat));
  }
  std::ofstream out(out_path);
  if (!out) throw data_error("cannot write: " + out_path);
  out << "# config_hash=" << cfg.hash() << "\nreport";
  for (const auto& k : keys) out << "," << k;
  out << "\n";
  out.precision(17);
  for (const auto& [path, flat] : rows) {
    out << path;
    for (const auto& k : keys) {
      out << ",";
      if (auto it = flat.find(k); it != flat.end()) out << it->second;
    }
    out << "\n";
  }
  return 0;
}

/// Pos-only vs pos+neg ablation: per policy, train both configurations,
/// evaluate R@100 (both retrieval settings) and KNN P@1 on the training
/// trace's held-out slice, and emit rows of pos scores plus deltas.
int cmd_ablate(const RunConfig& cfg, const std::string& corpus_path,
               const std::vector<std::string>& policy_names, const std::string& bench_path,
               const std::string& para_path, const std::string& out_path) {
  auto docs = load_jsonl(corpus_path);
  Vocab vocab = Vocab::build(docs, cfg.oov_buckets);
  Benchmark bench;
  if (!bench_path.empty()) {
    bench = load_benchmark(bench_path);
  } else {
    Rng rng(derive_seed(cfg.seed, "benchmark"));
    bench = build_benchmark(docs, cfg.benchmark, rng);
  }
  std::map<std::string, std::string> paras;
  if (!para_path.empty()) paras = load_paraphrases(para_path);

  struct Scores {
    double abs_r100, clm_r100, knn_p1;
  };
  auto run_one = [&](AugmentationPolicy policy, bool pos_neg) {
    policy.apply_to_negatives = pos_neg;
    TrainConfig tc = cfg.train_config();
    tc.policy = policy;
    TrainResult res = train(docs, vocab, tc, paras);
    auto pool_abs = make_pool_abs(bench, docs, res.params, vocab, cfg.max_len);
    auto pool_clm = make_pool_claims_all(bench, docs, res.params, vocab, cfg.max_len);
    Scores s;
    s.abs_r100 = recall_at_k(pool_abs, {100}).mean_recall.at(100);
    s.clm_r100 = recall_at_k(pool_clm, {100}).mean_recall.at(100);
    s.knn_p1 = res.trace.empty() ? 0.0 : res.trace.back().knn_p1;
    return s;
  };

  std::ofstream out(out_path);
  if (!out) throw data_error("cannot write: " + out_path);
  out << "# config_hash=" << cfg.hash() << "\n";
  out << "policy,abs_r100_pos,abs_r100_delta,clm_r100_pos,clm_r100_delta,knn_p1_pos,knn_p1_delta\n";
  out.precision(17);
  for (const auto& name : policy_names) {
    AugmentationPolicy policy = AugmentationPolicy::parse(name);
    Scores pos = run_one(policy, false);
    Scores both = run_one(policy, true);
    out << name << "," << pos.abs_r100 << "," << (both.abs_r100 - pos.abs_r100) << ","
        << pos.clm_r100 << "," << (both.clm_r100 - pos.clm_r100) << "," << pos.knn_p1 << ","
        << (both.knn_p1 - pos.knn_p1) << "\n";
    std::cout << "ablate " << name << " done\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patemb: section-based contrastive patent embedding laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;
  int threads = 1;
  app.add_option("--config", config_path, "JSON run config")->envname("PATEMB_CONFIG");
  auto* seed_opt = app.add_option("--seed", seed, "global seed")->envname("PATEMB_SEED");
  auto* out_opt = app.add_option("--out", out_dir, "output directory")->envname("PATEMB_OUT");
  app.add_option("--threads", threads, "max worker threads")->envname("PATEMB_THREADS");

  // preprocess
  std::string in_path, out_path, vocab_path;
  auto* prep = app.add_subcommand("preprocess", "clean a JSONL corpus and build a vocab");
  prep->add_option("--in", in_path, "input JSONL")->required();
  prep->add_option("--out-corpus", out_path, "cleaned JSONL")->required();
  prep->add_option("--vocab", vocab_path, "vocab output path");

  // synth
  int n_docs = 200, n_classes = 8;
  double p_cite = 0.08, length_scale = 1.0;
  std::string para_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic sectioned corpus");
  synth->add_option("--n-docs", n_docs)->check(CLI::PositiveNumber);
  synth->add_option("--n-classes", n_classes)->check(CLI::PositiveNumber);
  synth->add_option("--out-corpus", out_path)->required();
  synth->add_option("--paraphrases", para_out, "also emit a paraphrase sidecar");
  synth->add_option("--p-cite", p_cite);
  synth->add_option("--length-scale", length_scale);

  // train
  std::string corpus_path, ckpt_path, bench_path, policy_name, para_path, emb_path;
  auto* tr = app.add_subcommand("train", "contrastive training run");
  tr->add_option("--corpus", corpus_path)->required();
  tr->add_option("--vocab", vocab_path, "vocab path (built from corpus if absent)");
  tr->add_option("--policy", policy_name, "augmentation policy override");
  tr->add_option("--paraphrases", para_path, "paraphrase sidecar JSONL");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "embedding-geometry report");
  diag->add_option("--checkpoint", ckpt_path);
  diag->add_option("--embeddings", emb_path, "raw embedding file ('n d' header + rows)");
  diag->add_option("--corpus", corpus_path);
  diag->add_option("--pairs", bench_path, "benchmark JSON supplying citing-cited pairs");

  // eval
  std::string task;
  auto* ev = app.add_subcommand("eval", "retrieval / knn / probe / bm25 evaluation");
  ev->add_option("--task", task, "retrieval|knn|probe|bm25")->required();
  ev->add_option("--checkpoint", ckpt_path);
  ev->add_option("--corpus", corpus_path)->required();
  ev->add_option("--benchmark", bench_path);

  // benchmark
  int n_queries = -1;
  auto* bm = app.add_subcommand("benchmark", "build the retrieval benchmark");
  bm->add_option("--corpus", corpus_path)->required();
  bm->add_option("--out-benchmark", out_path)->required();
  bm->add_option("--n-queries", n_queries);

  // compare
  std::vector<std::string> reports;
  auto* cmp = app.add_subcommand("compare", "tabulate scalar metrics across reports");
  cmp->add_option("reports", reports, "report JSON files")->required();
  cmp->add_option("--out-table", out_path)->required();

  // ablate
  std::vector<std::string> policies;
  auto* abl = app.add_subcommand("ablate", "pos-only vs pos+neg delta table");
  abl->add_option("--corpus", corpus_path)->required();
  abl->add_option("--policies", policies, "policy names")->required();
  abl->add_option("--benchmark", bench_path, "benchmark JSON (built if absent)");
  abl->add_option("--paraphrases", para_path);
  abl->add_option("--out-table", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  seed_set = seed_opt->count() > 0 || std::getenv("PATEMB_SEED");
  out_set = out_opt->count() > 0 || std::getenv("PATEMB_OUT");

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    if (seed_set) cfg.seed = seed;
    if (out_set) cfg.out_dir = out_dir;
    if (threads > 0) cfg.threads = threads;
    if (!policy_name.empty()) cfg.policy = AugmentationPolicy::parse(policy_name);
    if (n_queries > 0) cfg.benchmark.n_queries = n_queries;

    if (prep->parsed()) return cmd_preprocess(cfg, in_path, out_path, vocab_path);
    if (synth->parsed()) {
      return cmd_synth(cfg, n_docs, n_classes, out_path, para_out, p_cite, length_scale);
    }
    if (tr->parsed()) return cmd_train(cfg, corpus_path, vocab_path, para_path);
    if (diag->parsed()) {
      if (ckpt_path.empty() && emb_path.empty()) {
        throw usage_error("diagnose needs --checkpoint or --embeddings");
      }
      if (!ckpt_path.empty() && corpus_path.empty()) {
        throw usage_error("diagnose with a checkpoint needs --corpus");
      }
      return cmd_diagnose(cfg, ckpt_path, emb_path, corpus_path, bench_path);
    }
    if (ev->parsed()) {
      if ((task == "retrieval" || task == "bm25") && bench_path.empty()) {
        throw usage_error("eval --task " + task + " needs --benchmark");
      }
      if (task != "bm25" && ckpt_path.empty()) {
        throw usage_error("eval --task " + task + " needs --checkpoint");
      }
      return cmd_eval(cfg, task, ckpt_path, corpus_path, bench_path);
    }
    if (bm->parsed()) return cmd_benchmark(cfg, corpus_path, out_path);
    if (cmp->parsed()) return cmd_compare(cfg, reports, out_path);
    if (abl->parsed()) return cmd_ablate(cfg, corpus_path, policies, bench_path, para_path, out_path);
    throw usage_error("no subcommand");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::usage: return 2;
      case Errc::data: return 3;
      case Errc::numeric: return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
