#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rednote/pipeline.hpp"
#include "rednote/synth.hpp"

using namespace rednote;

namespace {

RedundancyPlan plan_for(std::vector<double> rs, std::size_t notes = 4, std::size_t tokens = 100,
                        std::size_t admissions = 5) {
  RedundancyPlan p;
  for (double r : rs) p.note_types.push_back({"r" + std::to_string(r), r, notes, tokens});
  p.n_admissions = admissions;
  p.vocab_size = 100000;
  p.seed = 3;
  return p;
}

}  // namespace

TEST(Redundancy, CopiedTokenCounts) {
  EXPECT_EQ(copied_tokens({"a", 0.0, 2, 100}), 0u);
  EXPECT_EQ(copied_tokens({"a", 0.5, 2, 100}), 50u);
  EXPECT_EQ(copied_tokens({"a", 0.9, 2, 100}), 90u);
  EXPECT_EQ(copied_tokens({"a", 0.29, 2, 100}), 29u);
  EXPECT_EQ(copied_tokens({"a", 0.5, 2, 7}), 4u);
  EXPECT_EQ(copied_tokens({"a", 1.0, 2, 7}), 7u);
}

TEST(Redundancy, LayoutAndDeterminism) {
  const auto plan = plan_for({0.0, 0.5}, 3, 10, 2);
  const auto c = generate_redundant_corpus(plan);
  EXPECT_EQ(c.label, "synthetic");
  ASSERT_EQ(c.documents.size(), 2u * 2u * 3u);
  EXPECT_EQ(c.documents[0].doc_id, "adm00000-t00-n000");
  EXPECT_EQ(c.documents[0].admission_id, "adm00000");
  EXPECT_EQ(to_iso(c.documents[0].updated_at), "2020-01-01T00:00:00");
  EXPECT_EQ(c.documents.back().doc_id, "adm00001-t01-n002");
  for (const auto& d : c.documents) EXPECT_EQ(word_tokenize(d.text).size(), 10u);
  const auto again = generate_redundant_corpus(plan);
  for (std::size_t i = 0; i < c.documents.size(); ++i) EXPECT_EQ(c.documents[i].text, again.documents[i].text);
  auto other = plan;
  other.seed = 4;
  EXPECT_NE(generate_redundant_corpus(other).documents[0].text, c.documents[0].text);
}

TEST(Redundancy, FreshTokensNeverRepeat) {
  const auto c = generate_redundant_corpus(plan_for({0.0, 0.3}, 3, 20, 4));
  std::set<std::string> first_notes;
  std::size_t count = 0;
  for (const auto& d : c.documents) {
    if (!d.doc_id.ends_with("n000")) continue;
    for (auto& t : word_tokenize(d.text)) {
      first_notes.insert(t);
      ++count;
    }
  }
  EXPECT_EQ(first_notes.size(), count);
}

TEST(Redundancy, PairScoresEqualPlannedRedundancy) {
  const std::vector<double> rs{0.0, 0.1, 0.25, 0.5, 0.9, 1.0};
  const auto c = generate_redundant_corpus(plan_for(rs));
  const auto recs = pairwise_scores(group_sequences(c), MetricConfig{});
  ASSERT_EQ(recs.size(), rs.size() * 5 * 3);
  for (const auto& agg : aggregate_per_type(recs)) {
    double r = -1;
    for (const auto& t : plan_for(rs).note_types) {
      if (t.label == agg.note_type) r = t.redundancy;
    }
    EXPECT_EQ(*agg.get(Component::rouge1_recall), r) << agg.note_type;
    EXPECT_GE(*agg.get(Component::gestalt), r - 1e-12) << agg.note_type;
  }
}

TEST(Redundancy, InvalidPlans) {
  RedundancyPlan empty;
  EXPECT_THROW(generate_redundant_corpus(empty), ConfigError);
  EXPECT_THROW(generate_redundant_corpus(plan_for({1.5})), ConfigError);
  EXPECT_THROW(generate_redundant_corpus(plan_for({-0.1})), ConfigError);
  EXPECT_THROW(generate_redundant_corpus(plan_for({0.5}, 0)), ConfigError);
  EXPECT_THROW(generate_redundant_corpus(plan_for({0.5}, 2, 0)), ConfigError);
}

TEST(Redundancy, VocabularyExhaustion) {
  auto plan = plan_for({0.0}, 2, 10, 1);
  plan.vocab_size = 19;
  try {
    generate_redundant_corpus(plan);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("exhausted"), std::string::npos);
  }
  plan.vocab_size = 20;
  EXPECT_NO_THROW(generate_redundant_corpus(plan));
}

TEST(Markov, StationaryAndEntropyRate) {
  const auto iid = MarkovSource::uniform_iid(16);
  EXPECT_NEAR(iid.entropy_rate(), 4.0, 1e-12);
  for (double p : iid.stationary()) EXPECT_NEAR(p, 1.0 / 16, 1e-12);

  const auto two = MarkovSource::two_state(0.9);
  EXPECT_NEAR(two.entropy_rate(), -(0.9 * std::log2(0.9) + 0.1 * std::log2(0.1)), 1e-12);
  EXPECT_NEAR(two.entropy_rate(), 0.469, 0.0005);

  const auto cyc = MarkovSource::cycle(5);
  EXPECT_EQ(cyc.entropy_rate(), 0.0);
  for (double p : cyc.stationary()) EXPECT_NEAR(p, 0.2, 1e-12);

  // Asymmetric chain: pi = (b, a) / (a + b) for P = [[1-a, a], [b, 1-b]].
  const MarkovSource asym({{0.7, 0.3}, {0.1, 0.9}});
  EXPECT_NEAR(asym.stationary()[0], 0.25, 1e-12);
  EXPECT_NEAR(asym.stationary()[1], 0.75, 1e-12);
}

TEST(Markov, InvalidSources) {
  EXPECT_THROW(MarkovSource({}), ConfigError);
  EXPECT_THROW(MarkovSource({{0.5, 0.5}}), ConfigError);
  EXPECT_THROW(MarkovSource({{0.5, 0.6}, {0.5, 0.5}}), ConfigError);
  EXPECT_THROW(MarkovSource({{1.1, -0.1}, {0.5, 0.5}}), ConfigError);
  // Two absorbing states: no unique stationary distribution.
  EXPECT_THROW(MarkovSource({{1.0, 0.0}, {0.0, 1.0}}), ConfigError);
}

TEST(Markov, SampleFollowsTransitions) {
  const auto two = MarkovSource::two_state(0.9);
  const auto s = generate_markov_stream(two, 200000, 12);
  ASSERT_EQ(s.tokens.size(), 200000u);
  EXPECT_EQ(s.entropy_bits, two.entropy_rate());
  std::size_t stays = 0, ones = 0;
  for (std::size_t i = 1; i < s.tokens.size(); ++i) {
    stays += s.tokens[i] == s.tokens[i - 1];
    ones += s.tokens[i];
  }
  EXPECT_NEAR(static_cast<double>(stays) / 199999, 0.9, 0.005);
  EXPECT_NEAR(static_cast<double>(ones) / 199999, 0.5, 0.02);
  EXPECT_EQ(generate_markov_stream(two, 50, 12).tokens,
            std::vector<TokenId>(s.tokens.begin(), s.tokens.begin() + 50));
  const auto cyc = generate_markov_stream(MarkovSource::cycle(3), 10, 1);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_EQ(cyc.tokens[i], (cyc.tokens[i - 1] + 1) % 3);
  EXPECT_THROW(generate_markov_stream(two, 0, 1), ConfigError);
}
