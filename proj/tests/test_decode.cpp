#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "tk/decode.hpp"

using namespace tk;
using namespace tk::decode;
using model::ModelConfig;
using M = Mat<double>;

namespace {

ModelConfig small_config(dialect::Strategy s = dialect::Strategy::kNone) {
  ModelConfig c;
  c.encoder.input_dim = 4;
  c.encoder.model_dim = 8;
  c.encoder.num_blocks = 1;
  c.encoder.ff_dim = 12;
  c.predictor.embed_dim = 4;
  c.joint_dim = 6;
  c.num_dialects = 3;
  c.mode.conditioning = s;
  return c;
}

M random_features(Index T0, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  M m(T0, 4);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Joint output ignores its input and always prefers `token`.
void force_argmax(MultiTaskModel& m, Task t, int token) {
  const std::string p = m.prefix(t) + ".joint.";
  m.params().at(p + "out_w").values().setZero();
  auto& b = m.params().at(p + "out_b").values();
  b.setZero();
  b(0, token) = 50.0;
}

data::TokenTable chars(int n) {
  std::vector<std::string> s{data::kBlankSymbol};
  for (int i = 0; i < n - 1; ++i) s.push_back(std::string(1, static_cast<char>('a' + i)));
  return {s, metrics::Unit::kChar};
}

data::TokenTable syllables(int n) {
  std::vector<std::string> s{data::kBlankSymbol};
  for (int i = 0; i < n - 1; ++i) s.push_back("s" + std::to_string(i) + "1");
  return {s, metrics::Unit::kSyllable};
}

std::vector<EvalItem> items(int n, std::mt19937_64& rng) {
  std::vector<EvalItem> out;
  for (int i = 0; i < n; ++i) {
    EvalItem it;
    it.id = "utt" + std::to_string(i);
    it.features = random_features(16 + 4 * (i % 3), rng);
    it.dialect = i % 3;
    it.ref_h = "ab";
    it.ref_p = "s01 s11";
    it.audio_seconds = 0.01 * static_cast<double>(it.features.rows());
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace

TEST_CASE("blank-only model gives an empty hypothesis") {
  std::mt19937_64 rng(1);
  MultiTaskModel m(small_config(), 6, 6, 1);
  force_argmax(m, Task::kH, 0);
  Hypothesis h = greedy_decode(m, random_features(24, rng), Task::kH, {});
  CHECK(h.tokens.empty());
  CHECK(h.frames_consumed == 6);
  CHECK_FALSE(h.dialect.has_value());
}

TEST_CASE("emission cap per frame") {
  std::mt19937_64 rng(2);
  MultiTaskModel m(small_config(), 6, 6, 2);
  force_argmax(m, Task::kP, 3);
  const M x = random_features(20, rng);
  DecodeOptions one;
  one.max_symbols_per_frame = 1;
  Hypothesis h1 = greedy_decode(m, x, Task::kP, one);
  CHECK(h1.tokens.size() == 5);
  DecodeOptions many;
  many.max_symbols_per_frame = 7;
  Hypothesis h7 = greedy_decode(m, x, Task::kP, many);
  CHECK(h7.tokens.size() == 35);
  CHECK(std::is_sorted(h7.frames.begin(), h7.frames.end()));
  CHECK(h7.frames.back() == 4);
  DecodeOptions bad;
  bad.max_symbols_per_frame = 0;
  CHECK_THROWS_AS(greedy_decode(m, x, Task::kP, bad), ContractError);
}

TEST_CASE("random models respect the token bound and are deterministic") {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 20; ++c) {
    MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 100 + static_cast<std::uint64_t>(c));
    const M x = random_features(8 + static_cast<Index>(rng() % 20), rng);
    DecodeOptions o;
    o.max_symbols_per_frame = 3;
    Hypothesis a = greedy_decode(m, x, Task::kH, o), b = greedy_decode(m, x, Task::kH, o);
    CHECK(a.tokens == b.tokens);
    CHECK(static_cast<int>(a.tokens.size()) <= a.frames_consumed * 3);
    CHECK(std::is_sorted(a.frames.begin(), a.frames.end()));
    for (int t : a.tokens) CHECK(t != 0);
  }
}

TEST_CASE("forced protocol substitutes only the history") {
  std::mt19937_64 rng(4);
  MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 4);
  force_argmax(m, Task::kH, m.vocab(Task::kH).dialect_token(1));
  const M x = random_features(20, rng);
  DecodeOptions plain;
  plain.max_symbols_per_frame = 2;
  Hypothesis base = greedy_decode(m, x, Task::kH, plain);
  DecodeOptions forced = plain;
  forced.forced = StressProtocol{0.0, 9};
  forced.true_dialect = 1;
  forced.utterance_id = "u";
  Hypothesis h = greedy_decode(m, x, Task::kH, forced);
  // The recorded tokens are the model's own argmax even when every fed id is wrong.
  CHECK(h.tokens == base.tokens);
  CHECK(h.substitutions == 10);
  CHECK(h.correct_substitutions == 0);
  CHECK(h.dialect == 1);
  DecodeOptions both = forced;
  both.feed_dialect = 1;
  CHECK_THROWS_AS(greedy_decode(m, x, Task::kH, both), ContractError);
  DecodeOptions no_truth = forced;
  no_truth.true_dialect = -1;
  CHECK_THROWS_AS(greedy_decode(m, x, Task::kH, no_truth), ContractError);
}

TEST_CASE("full correctness equals the ground-truth feed") {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 10; ++c) {
    MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 200 + static_cast<std::uint64_t>(c));
    const M x = random_features(24, rng);
    const int d = c % 3;
    DecodeOptions feed;
    feed.feed_dialect = d;
    DecodeOptions forced;
    forced.forced = StressProtocol{1.0, 5};
    forced.true_dialect = d;
    forced.utterance_id = "x" + std::to_string(c);
    Hypothesis a = greedy_decode(m, x, Task::kP, feed), b = greedy_decode(m, x, Task::kP, forced);
    CHECK(a.tokens == b.tokens);
    CHECK(b.correct_substitutions == b.substitutions);
  }
}

TEST_CASE("correct-history model is unchanged by a fully correct protocol") {
  std::mt19937_64 rng(6);
  MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 6);
  force_argmax(m, Task::kH, m.vocab(Task::kH).dialect_token(2));
  const M x = random_features(20, rng);
  DecodeOptions forced;
  forced.forced = StressProtocol{1.0, 1};
  forced.true_dialect = 2;
  forced.utterance_id = "u";
  CHECK(greedy_decode(m, x, Task::kH, forced).tokens == greedy_decode(m, x, Task::kH, {}).tokens);
}

TEST_CASE("empirical correctness converges to p") {
  std::mt19937_64 rng(7);
  MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 7);
  force_argmax(m, Task::kH, m.vocab(Task::kH).dialect_token(0));
  const M x = random_features(40, rng);
  for (double p : {0.0, 0.3, 0.5, 0.8, 1.0}) {
    long subs = 0, correct = 0;
    for (int u = 0; u < 10; ++u) {
      DecodeOptions o;
      o.forced = StressProtocol{p, 42};
      o.true_dialect = u % 3;
      o.utterance_id = "utt" + std::to_string(u);
      Hypothesis h = greedy_decode(m, x, Task::kH, o);
      subs += h.substitutions;
      correct += h.correct_substitutions;
    }
    REQUIRE(subs >= 500);
    const double n = static_cast<double>(subs);
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(correct) / n - p) <= 3 * sigma + 1e-12);
  }
}

TEST_CASE("protocol stream depends on seed and utterance") {
  std::mt19937_64 rng(8);
  MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 8);
  force_argmax(m, Task::kH, m.vocab(Task::kH).dialect_token(0));
  const M x = random_features(40, rng);
  auto run = [&](std::uint64_t seed, const std::string& id) {
    DecodeOptions o;
    o.forced = StressProtocol{0.5, seed};
    o.true_dialect = 0;
    o.utterance_id = id;
    return greedy_decode(m, x, Task::kH, o).correct_substitutions;
  };
  CHECK(run(1, "a") == run(1, "a"));
  std::set<int> distinct{run(1, "a"), run(2, "a"), run(1, "b"), run(3, "c"), run(4, "d")};
  CHECK(distinct.size() > 1);
}

TEST_CASE("dialect prediction sources") {
  M logits(1, 3);
  logits << 0.1, 2.0, -1.0;
  CHECK(argmax_dialect(logits) == 1);
  Hypothesis h;
  h.votes = {{2, 3}, {0, 1}};
  CHECK(vote_dialect(h) == 2);
  h.votes.clear();
  CHECK_FALSE(vote_dialect(h).has_value());

  std::mt19937_64 rng(9);
  ModelConfig c = small_config();
  c.mode.adc = true;
  MultiTaskModel m(c, 6, 6, 9);
  auto& out = m.params().at("adc.out").values();
  out.setZero();
  m.params().at("adc.key").values().setIdentity();
  const M x = random_features(16, rng);
  Encoded e = encode_utterance(m, x);
  REQUIRE(e.adc_logits.has_value());
  CHECK(predict_dialect(m, x, DialectSource::kAdc) == argmax_dialect(*e.adc_logits));
  MultiTaskModel plain(small_config(), 6, 6, 9);
  CHECK_THROWS_AS(predict_dialect(plain, x, DialectSource::kAdc), ContractError);
  CHECK_FALSE(predict_dialect(plain, x, DialectSource::kVotes).has_value());
}

TEST_CASE("embedding prefix adds a decoding frame") {
  std::mt19937_64 rng(10);
  ModelConfig c = small_config(dialect::Strategy::kTic);
  c.mode.adc = c.mode.dii = true;
  MultiTaskModel m(c, 6, 6, 10);
  force_argmax(m, Task::kH, 0);
  const M x = random_features(20, rng);
  CHECK(greedy_decode(m, x, Task::kH, {}).frames_consumed == 6);
  Encoded e = encode_utterance(m, x);
  DecodeOptions o;
  CHECK_THROWS_AS(greedy_decode(m, e, Task::kH, o), ContractError);
  o.dii_dialect = 3;
  CHECK_THROWS_AS(greedy_decode(m, e, Task::kH, o), IndexError);
}

TEST_CASE("evaluation guards") {
  std::mt19937_64 rng(11);
  auto its = items(3, rng);
  data::TokenTable th = chars(6), tp = syllables(6);
  ModelConfig dii_only = small_config();
  dii_only.mode.dii = true;
  MultiTaskModel a(dii_only, 6, 6, 11);
  EvalOptions o;
  CHECK_THROWS_AS(evaluate(a, &th, &tp, its, o), ConfigError);
  o.dii_source = DiiSource::kTruth;
  CHECK_NOTHROW(evaluate(a, &th, &tp, its, o));
  MultiTaskModel plain(small_config(), 6, 6, 11);
  EvalOptions feed;
  feed.feed_truth = true;
  CHECK_THROWS_AS(evaluate(plain, &th, &tp, its, feed), ConfigError);
  CHECK_THROWS_AS(stress_test(plain, &th, &tp, its, {0.0, 1.0}, 1), ConfigError);
}

TEST_CASE("stress test rows") {
  std::mt19937_64 rng(12);
  MultiTaskModel m(small_config(dialect::Strategy::kTic), 6, 6, 12);
  auto its = items(9, rng);
  data::TokenTable th = chars(6), tp = syllables(6);
  const std::vector<double> grid{0.0, 0.5, 1.0};
  auto rows = stress_test(m, &th, &tp, its, grid, 3);
  REQUIRE(rows.size() == 3);
  EvalOptions feed;
  feed.feed_truth = true;
  EvalResult truth = evaluate(m, &th, &tp, its, feed);
  CHECK(rows[2].cer_h == truth.h.rate);
  CHECK(rows[2].ser_p == truth.p.rate);
  CHECK(rows[2].result.h.hyps == truth.h.hyps);
  CHECK(rows[2].result.p.hyps == truth.p.hyps);
  if (rows[2].result.substitutions > 0) CHECK(rows[2].empirical_correctness == 1.0);
  auto again = stress_test(m, &th, &tp, its, grid, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].cer_h == rows[i].cer_h);
    CHECK(again[i].result.substitutions == rows[i].result.substitutions);
  }
  CHECK_THROWS_AS(stress_test(m, &th, &tp, its, {1.5}, 3), ConfigError);
  std::ostringstream os;
  write_stress_csv(os, rows);
  const std::string csv = os.str();
  CHECK(csv.rfind("p,empirical_correctness,cer_hanzi,ser_pinyin,dialect_acc\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("evaluation scores hypotheses against references") {
  std::mt19937_64 rng(13);
  MultiTaskModel m(small_config(), 6, 6, 13);
  force_argmax(m, Task::kH, 0);
  force_argmax(m, Task::kP, 0);
  auto its = items(4, rng);
  data::TokenTable th = chars(6), tp = syllables(6);
  EvalResult r = evaluate(m, &th, &tp, its, {});
  CHECK(r.h.rate == 100.0);
  CHECK(r.p.rate == 100.0);
  CHECK(r.h.hyps == std::vector<std::string>(4, ""));
  CHECK_FALSE(r.dialect_acc().has_value());
  CHECK(r.audio_seconds == doctest::Approx(0.01 * (16 + 20 + 24 + 16)));
  CHECK(r.wall_seconds > 0);
}

TEST_CASE("vote coverage counts utterances with a dialect token") {
  std::mt19937_64 rng(14);
  MultiTaskModel m(small_config(dialect::Strategy::kPsc), 6, 6, 14);
  force_argmax(m, Task::kH, 0);
  force_argmax(m, Task::kP, m.vocab(Task::kP).dialect_token(1));
  auto its = items(6, rng);
  data::TokenTable th = chars(6), tp = syllables(6);
  EvalResult r = evaluate(m, &th, &tp, its, {});
  REQUIRE(r.h.vote_coverage.has_value());
  CHECK(*r.h.vote_coverage == 0.0);
  CHECK(*r.h.vote_acc == 0.0);
  CHECK(*r.p.vote_coverage == 100.0);
  // Every utterance votes for dialect 1; items cycle through dialects 0..2.
  CHECK(*r.p.vote_acc == doctest::Approx(100.0 / 3.0));
  MultiTaskModel plain(small_config(), 6, 6, 15);
  CHECK_FALSE(evaluate(plain, &th, &tp, its, {}).h.vote_coverage.has_value());
}
