#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "patemb/errors.hpp"
#include "patemb/eval.hpp"
#include "patemb/rng.hpp"
#include "patemb/train.hpp"
#include "patemb/views.hpp"

namespace patemb {

/// All module configs under named sections, plus the global seed and output
/// directory. Unknown keys anywhere are rejected. The canonical JSON dump of
/// the effective config is hashed into every artifact.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 1;

  // corpus
  std::int32_t oov_buckets = 1024;
  int max_len = 128;

  // policy
  AugmentationPolicy policy{{PolicyKind::Dropout}, {}, true, false};

  // encoder
  int dim = 64;
  double dropout_p = 0.1;

  // train
  double temperature = 0.05;
  int batch_size = 64;
  double lr = 1e-3;
  double warmup_frac = 0.10;
  int epochs = 1;
  int diag_every = 250;
  double eval_frac = 0.15;
  AdamWConfig adamw;

  // eval
  int knn_k = 10;
  std::vector<int> recall_k = {20, 50, 100};
  int probe_hidden = 128;
  int probe_epochs = 30;
  double probe_lr = 1e-2;

  // diagnostics
  long ida_n_rand = 0;  // 0 = default (10x within-doc pairs)

  // benchmark
  BenchmarkSpec benchmark;

  TrainConfig train_config() const {
    TrainConfig t;
    t.temperature = temperature;
    t.batch_size = batch_size;
    t.lr = lr;
    t.warmup_frac = warmup_frac;
    t.epochs = epochs;
    t.dropout_p = dropout_p;
    t.policy = policy;
    t.diag_every = diag_every;
    t.seed = seed;
    t.dim = dim;
    t.max_len = max_len;
    t.eval_frac = eval_frac;
    t.knn_k = knn_k;
    t.adamw = adamw;
    return t;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["out"] = out_dir;
    j["threads"] = threads;
    j["corpus"] = {{"oov_buckets", oov_buckets}, {"max_len", max_len}};
    j["policy"] = {{"name", policy.name()},
                   {"apply_to_negatives", policy.apply_to_negatives},
                   {"crop_keep_span", policy.crop_keep_span}};
    j["encoder"] = {{"dim", dim}, {"dropout_p", dropout_p}};
    j["train"] = {{"temperature", temperature}, {"batch_size", batch_size},
                  {"lr", lr},                   {"warmup_frac", warmup_frac},
                  {"epochs", epochs},           {"diag_every", diag_every},
                  {"eval_frac", eval_frac},     {"beta1", adamw.beta1},
                  {"beta2", adamw.beta2},       {"eps", adamw.eps},
                  {"weight_decay", adamw.weight_decay}};
    j["eval"] = {{"knn_k", knn_k},
                 {"recall_k", recall_k},
                 {"probe_hidden", probe_hidden},
                 {"probe_epochs", probe_epochs},
                 {"probe_lr", probe_lr}};
    j["diagnostics"] = {{"ida_n_rand", ida_n_rand}};
    j["benchmark"] = {{"n_queries", benchmark.n_queries},
                      {"mlt_per_query", benchmark.mlt_per_query},
                      {"ipc_per_query", benchmark.ipc_per_query},
                      {"coc_per_query", benchmark.coc_per_query},
                      {"use_mlt", benchmark.use_mlt},
                      {"use_ipc_subclass", benchmark.use_ipc_subclass},
                      {"use_cited_of_cited", benchmark.use_cited_of_cited}};
    return j;
  }

  /// 16-hex-digit FNV hash of the canonical config dump. The output directory
  /// and thread count are excluded: they cannot affect results, and the hash
  /// must match across runs of the same configuration in different locations.
  std::string hash() const {
    auto j = to_json();
    j.erase("out");
    j.erase("threads");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
  }

  static void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) {
        throw usage_error("unknown config key " + where + "." + it.key());
      }
    }
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    check_keys(j, {"seed", "out", "threads", "corpus", "policy", "encoder", "train",
                   "eval", "diagnostics", "benchmark"},
               "(top)");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("corpus")) {
      const auto& s = j["corpus"];
      check_keys(s, {"oov_buckets", "max_len"}, "corpus");
      if (s.contains("oov_buckets")) c.oov_buckets = s["oov_buckets"].get<std::int32_t>();
      if (s.contains("max_len")) c.max_len = s["max_len"].get<int>();
    }
    if (j.contains("policy")) {
      const auto& s = j["policy"];
      check_keys(s, {"name", "apply_to_negatives", "crop_keep_span"}, "policy");
      if (s.contains("name")) c.policy = AugmentationPolicy::parse(s["name"].get<std::string>());
      if (s.contains("apply_to_negatives")) {
        c.policy.apply_to_negatives = s["apply_to_negatives"].get<bool>();
      }
      if (s.contains("crop_keep_span")) c.policy.crop_keep_span = s["crop_keep_span"].get<bool>();
    }
    if (j.contains("encoder")) {
      const auto& s = j["encoder"];
      check_keys(s, {"dim", "dropout_p"}, "encoder");
      if (s.contains("dim")) c.dim = s["dim"].get<int>();
      if (s.contains("dropout_p")) c.dropout_p = s["dropout_p"].get<double>();
    }
    if (j.contains("train")) {
      const auto& s = j["train"];
      check_keys(s, {"temperature", "batch_size", "lr", "warmup_frac", "epochs",
                     "diag_every", "eval_frac", "beta1", "beta2", "eps", "weight_decay"},
                 "train");
      if (s.contains("temperature")) c.temperature = s["temperature"].get<double>();
      if (s.contains("batch_size")) c.batch_size = s["batch_size"].get<int>();
      if (s.contains("lr")) c.lr = s["lr"].get<double>();
      if (s.contains("warmup_frac")) c.warmup_frac = s["warmup_frac"].get<double>();
      if (s.contains("epochs")) c.epochs = s["epochs"].get<int>();
      if (s.contains("diag_every")) c.diag_every = s["diag_every"].get<int>();
      if (s.contains("eval_frac")) c.eval_frac = s["eval_frac"].get<double>();
      if (s.contains("beta1")) c.adamw.beta1 = s["beta1"].get<double>();
      if (s.contains("beta2")) c.adamw.beta2 = s["beta2"].get<double>();
      if (s.contains("eps")) c.adamw.eps = s["eps"].get<double>();
      if (s.contains("weight_decay")) c.adamw.weight_decay = s["weight_decay"].get<double>();
    }
    if (j.contains("eval")) {
      const auto& s = j["eval"];
      check_keys(s, {"knn_k", "recall_k", "probe_hidden", "probe_epochs", "probe_lr"}, "eval");
      if (s.contains("knn_k")) c.knn_k = s["knn_k"].get<int>();
      if (s.contains("recall_k")) c.recall_k = s["recall_k"].get<std::vector<int>>();
      if (s.contains("probe_hidden")) c.probe_hidden = s["probe_hidden"].get<int>();
      if (s.contains("probe_epochs")) c.probe_epochs = s["probe_epochs"].get<int>();
      if (s.contains("probe_lr")) c.probe_lr = s["probe_lr"].get<double>();
    }
    if (j.contains("diagnostics")) {
      const auto& s = j["diagnostics"];
      check_keys(s, {"ida_n_rand"}, "diagnostics");
      if (s.contains("ida_n_rand")) c.ida_n_rand = s["ida_n_rand"].get<long>();
    }
    if (j.contains("benchmark")) {
      const auto& s = j["benchmark"];
      check_keys(s, {"n_queries", "mlt_per_query", "ipc_per_query", "coc_per_query",
                     "use_mlt", "use_ipc_subclass", "use_cited_of_cited"},
                 "benchmark");
      if (s.contains("n_queries")) c.benchmark.n_queries = s["n_queries"].get<int>();
      if (s.contains("mlt_per_query")) c.benchmark.mlt_per_query = s["mlt_per_query"].get<int>();
      if (s.contains("ipc_per_query")) c.benchmark.ipc_per_query = s["ipc_per_query"].get<int>();
      if (s.contains("coc_per_query")) c.benchmark.coc_per_query = s["coc_per_query"].get<int>();
      if (s.contains("use_mlt")) c.benchmark.use_mlt = s["use_mlt"].get<bool>();
      if (s.contains("use_ipc_subclass")) {
        c.benchmark.use_ipc_subclass = s["use_ipc_subclass"].get<bool>();
      }
      if (s.contains("use_cited_of_cited")) {
        c.benchmark.use_cited_of_cited = s["use_cited_of_cited"].get<bool>();
      }
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw usage_error("malformed config: " + std::string(e.what()));
    }
    return from_json(j);
  }
};

}  // namespace patemb
