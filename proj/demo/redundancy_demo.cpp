// Library walk-through: entropy of a known source, then pairwise
// redundancy of a synthetic corpus with planted copy rates.

#include <iostream>

#include "rednote/rednote.hpp"

using namespace rednote;

int main() {
  // 1. A trigram model recovers the entropy rate of a two-state source.
  const auto source = MarkovSource::two_state(0.9);
  const auto sample = generate_markov_stream(source, 60'000, 1);
  const std::vector<std::vector<TokenId>> train{{sample.tokens.begin(), sample.tokens.begin() + 50'000}};
  const std::vector<std::vector<TokenId>> test{{sample.tokens.begin() + 50'000, sample.tokens.end()}};
  const auto model = fit(concat_documents(train, 2), 2, 3);
  const auto rep = cross_entropy(model, concat_documents(test, 2));
  std::cout << "entropy rate " << format_fixed(source.entropy_rate(), 3) << " bits, model estimate "
            << format_fixed(rep.cross_entropy_bits, 3) << " bits (PPL " << format_fixed(rep.perplexity, 3) << ")\n\n";

  // 2. Perplexities quoted for open-domain and clinical text, as bits and ratios.
  const auto ppl = build_ppl_table(
      {PplEntry{"open-domain", std::nullopt, 35.56, std::nullopt}, PplEntry{"KCH", 8.78, 9.58, std::nullopt},
       PplEntry{"MIMIC", 3.12, 3.15, std::nullopt}},
      std::string("open-domain"));
  std::cout << emit(ppl.to_table(), Format::markdown) << '\n';

  // 3. Successive notes that copy a fixed share of their predecessor.
  RedundancyPlan plan;
  plan.note_types = {{"fresh", 0.0, 4, 80}, {"half-copied", 0.5, 4, 80}, {"copy-forward", 0.9, 4, 80}};
  plan.n_admissions = 10;
  plan.seed = 7;
  const auto corpus = generate_redundant_corpus(plan);

  CharNgramProvider provider;
  MetricConfig metrics;
  metrics.provider = &provider;
  metrics.baseline = estimate_baseline(corpus, provider, 200, 11);
  const auto records = pairwise_scores(group_sequences(corpus), metrics);

  std::cout << emit(aggregate_table(aggregate_per_type(records)), Format::markdown) << '\n';
  std::cout << emit(summary_table({{"synthetic", weighted_summary(records)}}), Format::markdown);
  return 0;
}
