#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "rednote/pipeline.hpp"

using namespace rednote;

namespace {

PairRecord record(std::string adm, std::string type, double value, std::size_t tokens, int serial = 0) {
  PairRecord r;
  r.admission_id = std::move(adm);
  r.note_type = std::move(type);
  r.prev_doc_id = "p" + std::to_string(serial);
  r.next_doc_id = "n" + std::to_string(serial);
  r.score.gestalt = value;
  r.score.rouge1 = Prf::from(value, value);
  r.pair_token_count = tokens;
  return r;
}

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

Document doc(std::string id, std::string adm, std::string type, std::int64_t t, std::string text) {
  return {std::move(id), std::move(adm), std::move(type), Timestamp{t}, std::move(text), std::nullopt};
}

}  // namespace

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({7}), 7.0);
  EXPECT_THROW(median({}), Error);
}

TEST(Median, MatchesSortOracle) {
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(1 + rng.below(40));
    for (auto& x : v) x = static_cast<double>(rng.below(10)) / 4;
    ASSERT_EQ(median(v), sorted_median(v));
  }
}

TEST(Components, NamesRoundTrip) {
  for (auto c : kAllComponents) EXPECT_EQ(parse_component(component_name(c)), c);
  EXPECT_THROW(parse_component("bleu"), ConfigError);
  EXPECT_EQ(split_component(Component::rougeL_recall), (std::pair<std::string_view, std::string_view>{"rougeL", "recall"}));
  EXPECT_EQ(split_component(Component::gestalt).second, "ratio");
}

TEST(Pairwise, LaterNoteIsCandidateEarlierIsReference) {
  Corpus c{"c", {doc("a1", "A", "nursing", 10, "x y z w"), doc("a2", "A", "nursing", 20, "x y")}};
  const auto seqs = group_sequences(c);
  const auto recs = pairwise_scores(seqs, MetricConfig{});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].prev_doc_id, "a1");
  EXPECT_EQ(recs[0].next_doc_id, "a2");
  EXPECT_EQ(recs[0].pair_token_count, 6u);
  // Half of the earlier note reappears; all of the later one is copied.
  EXPECT_DOUBLE_EQ(recs[0].score.rouge1->recall, 0.5);
  EXPECT_DOUBLE_EQ(recs[0].score.rouge1->precision, 1.0);
  EXPECT_FALSE(recs[0].score.embed);
}

TEST(Pairwise, IdenticalCopiesScoreOne) {
  CharNgramProvider p;
  MetricConfig cfg;
  cfg.provider = &p;
  Corpus c{"c", {doc("1", "A", "t", 1, "pt stable plan continue"), doc("2", "A", "t", 2, "pt stable plan continue"),
                 doc("3", "A", "t", 3, "pt stable plan continue")}};
  const auto recs = pairwise_scores(group_sequences(c), cfg);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) {
    EXPECT_EQ(*r.score.gestalt, 1.0);
    EXPECT_EQ(r.score.rouge1->f1, 1.0);
    EXPECT_EQ(r.score.rougeL->f1, 1.0);
    EXPECT_NEAR(r.score.embed->f1, 1.0, 1e-6);
  }
}

TEST(Pairwise, SingletonsAndDisabledMetricsProduceNothing) {
  Corpus c{"c", {doc("1", "A", "t", 1, "a"), doc("2", "B", "t", 1, "a"), doc("3", "A", "u", 1, "a")}};
  EXPECT_TRUE(pairwise_scores(group_sequences(c), MetricConfig{}).empty());
  Corpus two{"c", {doc("1", "A", "t", 1, "a b"), doc("2", "A", "t", 2, "b c")}};
  MetricConfig off{false, true, false, nullptr, std::nullopt};
  const auto recs = pairwise_scores(group_sequences(two), off);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_FALSE(recs[0].score.gestalt);
  EXPECT_FALSE(recs[0].score.rougeL);
  EXPECT_TRUE(recs[0].score.rouge1);
}

TEST(Aggregate, PooledAndPerAdmission) {
  std::vector<PairRecord> recs{record("A", "t", 0.1, 10, 1), record("A", "t", 0.2, 10, 2),
                               record("A", "t", 0.3, 10, 3), record("B", "t", 0.9, 10, 4),
                               record("B", "u", 0.5, 10, 5)};
  const auto pooled = aggregate_per_type(recs);
  ASSERT_EQ(pooled.size(), 2u);
  EXPECT_EQ(pooled[0].note_type, "t");
  EXPECT_EQ(pooled[0].n_pairs, 4u);
  EXPECT_EQ(pooled[0].total_token_count, 40u);
  EXPECT_DOUBLE_EQ(*pooled[0].get(Component::gestalt), 0.25);
  EXPECT_FALSE(pooled[0].get(Component::embed_f1));
  const auto per_adm = aggregate_per_type(recs, Pooling::per_admission);
  // Median per admission: A -> 0.2, B -> 0.9.
  EXPECT_DOUBLE_EQ(*per_adm[0].get(Component::gestalt), 0.55);
  EXPECT_DOUBLE_EQ(*per_adm[1].get(Component::rouge1_recall), 0.5);
}

TEST(Aggregate, TopTypesRanksByKeyAndBreaksTiesByName) {
  std::vector<PairRecord> recs{record("A", "c", 0.5, 1, 1), record("A", "a", 0.9, 1, 2),
                               record("A", "b", 0.5, 1, 3), record("A", "d", 0.1, 1, 4)};
  auto none = record("A", "e", 0, 1, 5);
  none.score.rouge1.reset();
  recs.push_back(none);
  const auto all = aggregate_per_type(recs);
  const auto top = top_types(all, 3);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].note_type, "a");
  EXPECT_EQ(top[1].note_type, "b");
  EXPECT_EQ(top[2].note_type, "c");
  const auto every = top_types(all, 10);
  EXPECT_EQ(every.back().note_type, "e");
  EXPECT_THROW(top_types(all, 0), ConfigError);
}

TEST(Summary, TokenWeightedMean) {
  const std::vector<PairRecord> recs{record("A", "t", 0.0, 100, 1), record("B", "t", 1.0, 300, 2)};
  const auto s = weighted_summary(recs);
  EXPECT_DOUBLE_EQ(*s.get(Component::gestalt), 0.75);
  EXPECT_EQ(s.n_pairs, 2u);
  EXPECT_EQ(s.total_tokens, 400u);
  EXPECT_FALSE(s.get(Component::embed_recall));
  EXPECT_THROW(weighted_summary({}), Error);
}

TEST(Summary, PermutationInvariantAndMatchesLongDoubleOracle) {
  Rng rng(17);
  std::vector<PairRecord> recs;
  for (int i = 0; i < 2000; ++i) {
    recs.push_back(record("adm" + std::to_string(rng.below(50)), "t" + std::to_string(rng.below(5)), rng.unit(),
                          1 + rng.below(2000), i));
  }
  long double num = 0, den = 0;
  for (const auto& r : recs) {
    num += static_cast<long double>(r.pair_token_count) * *r.score.gestalt;
    den += r.pair_token_count;
  }
  const auto base = weighted_summary(recs);
  EXPECT_NEAR(*base.get(Component::gestalt), static_cast<double>(num / den), 1e-12);
  for (int k = 0; k < 5; ++k) {
    rng.shuffle(recs.begin(), recs.end());
    ASSERT_EQ(*weighted_summary(recs).get(Component::gestalt), *base.get(Component::gestalt));
  }
}

TEST(PairCsv, RoundTripKeepsSixDecimalsAndMissingCells) {
  std::vector<PairRecord> recs{record("A", "nursing, night", 1.0 / 3.0, 12, 1), record("B", "x\"y", 0.5, 4, 2)};
  recs[1].score.rouge1.reset();
  recs[1].score.embed = Prf::from(0.25, 0.75);
  std::stringstream buf;
  write_pair_records(recs, buf);
  const auto back = read_pair_records(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].note_type, "nursing, night");
  EXPECT_EQ(back[1].note_type, "x\"y");
  EXPECT_DOUBLE_EQ(*back[0].score.gestalt, 0.333333);
  EXPECT_EQ(back[0].pair_token_count, 12u);
  EXPECT_FALSE(back[1].score.rouge1);
  EXPECT_DOUBLE_EQ(back[1].score.embed->recall, 0.75);
  EXPECT_FALSE(back[0].score.embed);
}

TEST(PairCsv, MalformedInput) {
  std::istringstream empty("");
  EXPECT_THROW(read_pair_records(empty), ParseError);
  std::istringstream missing("admission_id,note_type\nA,t\n");
  EXPECT_THROW(read_pair_records(missing), ParseError);
  std::stringstream buf;
  write_pair_records({record("A", "t", 0.5, 2)}, buf);
  auto text = buf.str();
  text.replace(text.find("0.500000"), 8, "zero");
  std::istringstream bad(text);
  try {
    read_pair_records(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), 2u);
  }
}
