#include <doctest.h>

#include <cmath>
#include <sstream>

#include "anchorpt/error.hpp"
#include "anchorpt/ranker.hpp"
#include "helpers.hpp"
#include "oracles/gradcheck.hpp"

using namespace anchorpt;

namespace {

Vocabulary letters_vocab() {
  std::vector<std::string> terms = Vocabulary::special_terms();
  for (const char* t : {"a", "b", "c", "d", "u", "red", "blue", "green", "apple", "sky", "grass", "x", "y", "z"}) {
    terms.push_back(t);
  }
  return Vocabulary(terms);
}

EncoderConfig ranker_config(int vocab_size) {
  EncoderConfig c;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 16;
  c.ffn_dim = 32;
  c.vocab_size = vocab_size;
  c.max_len = 32;
  return c;
}

}  // namespace

TEST_CASE("document_text concatenates title, url and body") {
  CHECK(document_text({"d", "a", "u", "b c"}) == std::vector<std::string>{"a", "u", "b", "c"});
  CHECK(document_text({"d", "a", "", "b c"}) == std::vector<std::string>{"a", "b", "c"});
  CHECK(document_text({"d", "t", "", testing::words(600, "w")}).size() == 601);
  CHECK_THROWS_AS(document_text({"d", "", "", ""}), Error);
}

TEST_CASE("ranker scores") {
  const auto vocab = letters_vocab();
  const auto c = ranker_config(static_cast<int>(vocab.size()));
  Ranker fresh(Encoder(c, init_parameters(c, 1)), vocab);
  const DocRecord doc{"d1", "red apple", "", "a b c"};
  CHECK(fresh.logit("red", doc) == 0.0);
  CHECK(fresh.score("red", doc) == 0.5);

  Ranker noisy(oracle::noisy_encoder(c, 3), vocab);
  for (const char* q : {"red", "blue sky", "x y z"}) {
    const double s = noisy.score(q, doc);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(s == doctest::Approx(sigmoid(noisy.logit(q, doc))).epsilon(1e-15));
  }

  const auto p = noisy.pack("red", DocRecord{"d", "t", "", testing::words(100, "a")});
  CHECK(p.size() == 32);

  auto wrong = c;
  wrong.vocab_size += 1;
  CHECK_THROWS_AS(Ranker(Encoder(wrong, init_parameters(wrong, 1)), vocab), ShapeError);
}

TEST_CASE("checkpoint loads into the ranker unchanged") {
  testing::TempDir dir("ranker");
  const auto vocab = letters_vocab();
  const auto c = ranker_config(static_cast<int>(vocab.size()));
  auto enc = oracle::noisy_encoder(c, 8);
  round_to_storage_precision(enc.params());
  save_checkpoint({c, enc.params(), vocab, std::nullopt, {}}, dir / "m.ckpt");
  const auto ranker = Ranker::from_checkpoint(load_checkpoint(dir / "m.ckpt"));
  const DocRecord doc{"d1", "red apple", "u", "a b c"};
  const auto seq = ranker.pack("red", doc);
  CHECK(ranker.logit("red", doc) == enc.cls_score(seq.token_ids, seq.segment_ids));
  CHECK(ranker.encoder().encode(seq.token_ids, seq.segment_ids).hidden ==
        enc.encode(seq.token_ids, seq.segment_ids).hidden);
}

TEST_CASE("binary cross-entropy") {
  CHECK(bce_with_logit(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_with_logit(0.0, 0) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(bce_with_logit(40.0, 1) < 1e-15);
  CHECK(bce_with_logit(-40.0, 0) < 1e-15);
  CHECK(std::isfinite(bce_with_logit(-800.0, 1)));
  CHECK(bce_with_logit(-800.0, 1) == doctest::Approx(800.0));
}

TEST_CASE("warmup schedule") {
  CHECK(warmup_lr(0, 100, 0.1, 1.0) == doctest::Approx(0.1));
  CHECK(warmup_lr(9, 100, 0.1, 1.0) == doctest::Approx(1.0));
  CHECK(warmup_lr(50, 100, 0.1, 1.0) == 1.0);
  CHECK(warmup_lr(0, 100, 0.0, 1.0) == 1.0);
}

TEST_CASE("finetune separates a toy dataset") {
  const auto vocab = letters_vocab();
  const auto c = ranker_config(static_cast<int>(vocab.size()));
  Ranker ranker(Encoder(c, init_parameters(c, 2)), vocab);
  DocCollection docs;
  docs.add({"apple", "apple", "", "red a"});
  docs.add({"sky", "sky", "", "blue b"});
  docs.add({"grass", "grass", "", "green c"});
  const std::vector<std::pair<std::string, std::string>> truth{{"red", "apple"}, {"blue", "sky"}, {"green", "grass"}};
  std::vector<RankingExample> examples;
  for (const auto& [q, relevant] : truth) {
    for (const auto& [id, doc] : docs.records()) examples.push_back({q, q, id, id == relevant ? 1 : 0});
  }
  FinetuneConfig config;
  config.lr = 3e-3;
  config.epochs = 200;
  config.batch_size = 9;
  config.seed = 4;
  const auto report = finetune(ranker, examples, docs, config);
  CHECK(report.steps == 200);
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    head += report.step_losses[i];
    tail += report.step_losses[report.step_losses.size() - 1 - i];
  }
  CHECK(tail < head);
  for (const auto& [q, relevant] : truth) {
    for (const auto& [id, doc] : docs.records()) {
      if (id != relevant) CHECK(ranker.score(q, docs.at(relevant)) > ranker.score(q, doc));
    }
  }

  Ranker paired(Encoder(c, init_parameters(c, 2)), vocab);
  config.pairwise = true;
  config.batch_size = 6;
  const auto pair_report = finetune(paired, examples, docs, config);
  CHECK(pair_report.steps == 200);  // 6 pairs per epoch
  CHECK(pair_report.step_losses.front() > 0.0);
  CHECK(pair_report.step_losses.back() == 0.0);
  for (const auto& [q, relevant] : truth) {
    for (const auto& [id, doc] : docs.records()) {
      if (id != relevant) CHECK(paired.logit(q, docs.at(relevant)) - paired.logit(q, doc) >= 1.0);
    }
  }
  config.pairwise = false;

  std::vector<RankingExample> bad{{"q", "red", "apple", 2}};
  CHECK_THROWS_AS(finetune(ranker, bad, docs, config), Error);
}

TEST_CASE("rerank ordering") {
  CHECK(rank_order(std::vector<double>{0.3}, 10) == std::vector<std::size_t>{0});
  CHECK(rank_order(std::vector<double>{0.5, 0.9, 0.5, 0.1}, 10) == std::vector<std::size_t>{1, 0, 2, 3});
  CHECK(rank_order(std::vector<double>{0.5, 0.9, 0.5, 0.1}, 2) == std::vector<std::size_t>{1, 0});

  const auto vocab = letters_vocab();
  const auto c = ranker_config(static_cast<int>(vocab.size()));
  Ranker flat(Encoder(c, init_parameters(c, 1)), vocab);
  DocCollection docs;
  docs.add({"d1", "a", "", "b"});
  docs.add({"d2", "c", "", "d"});
  docs.add({"d3", "x", "", "y"});
  const std::vector<Candidate> cands{{"d3", 0}, {"d1", 0}, {"d2", 0}};
  const auto run = rerank(flat, "red", cands, docs, 2);
  REQUIRE(run.size() == 2);
  CHECK(run[0].doc_id == "d3");
  CHECK(run[1].doc_id == "d1");

  const std::vector<Candidate> missing{{"nope", 0}};
  CHECK_THROWS(rerank(flat, "red", missing, docs, 2));
}

TEST_CASE("ranking data files") {
  std::istringstream qin("q1\tred apple\nq2\tblue sky\n");
  const auto queries = read_queries(qin);
  CHECK(queries.at("q2") == "blue sky");
  std::ostringstream qout;
  write_queries(queries, qout);
  CHECK(qout.str() == "q1\tred apple\nq2\tblue sky\n");

  std::istringstream cin("q1 d1 1 0.5\nq1 d2 2 0.25\n");
  const auto cands = read_candidates(cin);
  CHECK(cands.at("q1") == std::vector<Candidate>{{"d1", 0.5}, {"d2", 0.25}});
  std::istringstream dup("q1 d1 1 0.5\nq1 d1 2 0.25\n");
  CHECK_THROWS_AS(read_candidates(dup), ParseError);

  std::istringstream din(R"({"id":"d1","title":"T","url":"u","body":"b"})" "\n");
  const auto docs = read_docs(din);
  CHECK(docs.at("d1") == DocRecord{"d1", "T", "u", "b"});
  std::istringstream dbad(R"({"title":"no id"})" "\n");
  CHECK_THROWS_AS(read_docs(dbad), ParseError);

  Qrels qrels;
  qrels.set("q1", "d2", 1);
  const auto examples = ranking_examples(queries, cands, qrels);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].label == 0);
  CHECK(examples[1].label == 1);
  CHECK(examples[1].query == "red apple");
}
