#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "patemb/train.hpp"

using namespace patemb;

namespace {

struct Fixture {
  std::vector<PatentDoc> docs;
  Vocab vocab;
  Fixture(int n_docs = 120, int n_classes = 6, std::uint64_t seed = 71) {
    docs = generate_synthetic_corpus(
        {.n_docs = n_docs, .n_classes = n_classes, .seed = seed});
    vocab = Vocab::build(docs);
  }
};

TrainConfig small_config(std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.dim = 16;
  cfg.epochs = 4;
  cfg.diag_every = 5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg = small_config();
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.warmup_frac = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  small_config().validate();
}

TEST_CASE("empty corpus rejected") {
  Vocab v;
  CHECK_THROWS_AS((void)train({}, v, small_config()), Error);
}

TEST_CASE("same seed and config give identical traces and parameters") {
  Fixture f;
  auto a = train(f.docs, f.vocab, small_config(3));
  auto b = train(f.docs, f.vocab, small_config(3));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].step == b.trace[i].step);
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].ssd_norm == b.trace[i].ssd_norm);
    CHECK(a.trace[i].knn_p1 == b.trace[i].knn_p1);
  }
  CHECK(a.params.E == b.params.E);
  CHECK(a.params.W == b.params.W);
  CHECK(a.params.b == b.params.b);

  auto c = train(f.docs, f.vocab, small_config(4));
  CHECK(a.params.E != c.params.E);
}

TEST_CASE("held-out slice is disjoint from training and stable") {
  Fixture f;
  auto res = train(f.docs, f.vocab, small_config(5));
  CHECK(!res.eval_doc_ids.empty());
  CHECK(res.eval_doc_ids.size() < f.docs.size());
  std::set<std::string> eval_set(res.eval_doc_ids.begin(), res.eval_doc_ids.end());
  CHECK(eval_set.size() == res.eval_doc_ids.size());
  // roughly eval_frac of the corpus
  CHECK(res.eval_doc_ids.size() >= f.docs.size() / 10);
}

TEST_CASE("trace covers step zero and the final step") {
  Fixture f;
  TrainConfig cfg = small_config(6);
  auto res = train(f.docs, f.vocab, cfg);
  REQUIRE(res.trace.size() >= 2);
  CHECK(res.trace.front().step == 0);
  CHECK(res.trace.back().step == res.params.step);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].step > res.trace[i - 1].step);
  }
  for (const auto& row : res.trace) {
    CHECK(row.ssd_norm >= 0.0);
    CHECK(row.ssd_norm <= 1.0);
    CHECK(row.knn_p1 >= 0.0);
    CHECK(row.knn_p1 <= 1.0);
    CHECK(std::isfinite(row.loss));
  }
}

TEST_CASE("training reduces the contrastive loss") {
  Fixture f;
  TrainConfig cfg = small_config(7);
  cfg.epochs = 8;
  auto res = train(f.docs, f.vocab, cfg);
  CHECK(res.trace.back().loss < res.trace.front().loss);
}

TEST_CASE("trace csv format") {
  std::vector<TraceRow> trace = {{0, 1.5, 0.25, 0.5}, {5, 1.25, 0.2, 0.75}};
  std::string path = "/tmp/patemb_test_trace.csv";
  save_trace_csv(trace, path, "0123456789abcdef");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# config_hash=0123456789abcdef");
  std::getline(in, line);
  CHECK(line == "step,loss,ssd_norm,knn_p1");
  std::getline(in, line);
  CHECK(line.rfind("0,1.5", 0) == 0);
  std::remove(path.c_str());
}

TEST_CASE("policies train end to end") {
  Fixture f;
  auto res = generate_synthetic({.n_docs = 60, .n_classes = 4, .seed = 73});
  Vocab vocab = Vocab::build(res.docs);
  auto para_list = generate_synthetic_paraphrases(res.model, res.docs);
  std::map<std::string, std::string> paras(para_list.begin(), para_list.end());

  for (const char* name : {"dropout", "shuffle", "crop", "paraphrase", "section:claims",
                           "section:claims+summary", "ipc", "shuffle/crop",
                           "section:claims@pos-only"}) {
    CAPTURE(name);
    TrainConfig cfg = small_config(8);
    cfg.epochs = 1;
    cfg.policy = AugmentationPolicy::parse(name);
    auto out = train(res.docs, vocab, cfg, paras);
    CHECK(out.params.step > 0);
    CHECK(std::isfinite(out.trace.back().loss));
  }
}

TEST_CASE("fallback counters fire for unmatched ipc groups") {
  Fixture f;
  // make every subgroup list unique: ipc fallback on every pair
  auto docs = f.docs;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    docs[i].ipc_subgroups = {"Z" + std::to_string(i) + "Z 1/0" + std::to_string(i % 10)};
  }
  Vocab vocab = Vocab::build(docs);
  TrainConfig cfg = small_config(9);
  cfg.epochs = 1;
  cfg.policy = AugmentationPolicy::parse("ipc");
  auto out = train(docs, vocab, cfg);
  CHECK(out.fallbacks.ipc_no_match > 0);
}
