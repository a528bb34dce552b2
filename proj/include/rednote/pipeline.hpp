#ifndef REDNOTE_PIPELINE_HPP
#define REDNOTE_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rednote/common.hpp"
#include "rednote/corpus.hpp"
#include "rednote/csv.hpp"
#include "rednote/embedding.hpp"
#include "rednote/metrics.hpp"
#include "rednote/tokenize.hpp"

namespace rednote {

/// Scores for one (earlier, later) note pair. Metrics switched off in the
/// run configuration are absent.
struct PairScore {
  std::optional<double> gestalt;
  std::optional<Prf> rouge1;
  std::optional<Prf> rougeL;
  std::optional<Prf> embed;
  std::size_t cand_tokens = 0;
  std::size_t ref_tokens = 0;
};

/// Every scalar a PairScore can carry, in report column order.
enum class Component {
  gestalt,
  rouge1_precision,
  rouge1_recall,
  rouge1_f1,
  rougeL_precision,
  rougeL_recall,
  rougeL_f1,
  embed_precision,
  embed_recall,
  embed_f1,
};

inline constexpr std::size_t kNumComponents = 10;

inline constexpr std::array<Component, kNumComponents> kAllComponents{
    Component::gestalt,          Component::rouge1_precision, Component::rouge1_recall,
    Component::rouge1_f1,        Component::rougeL_precision, Component::rougeL_recall,
    Component::rougeL_f1,        Component::embed_precision,  Component::embed_recall,
    Component::embed_f1};

inline constexpr std::string_view component_name(Component c) {
  constexpr std::array<std::string_view, kNumComponents> names{
      "gestalt",          "rouge1_precision", "rouge1_recall", "rouge1_f1",
      "rougeL_precision", "rougeL_recall",    "rougeL_f1",     "embed_precision",
      "embed_recall",     "embed_f1"};
  return names[static_cast<std::size_t>(c)];
}

inline Component parse_component(std::string_view name) {
  for (auto c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  throw ConfigError("unknown metric component '" + std::string(name) + "'");
}

/// Metric family and sub-field of a component, e.g. ("rouge1", "recall").
inline std::pair<std::string_view, std::string_view> split_component(Component c) {
  const auto name = component_name(c);
  const auto us = name.find('_');
  if (us == std::string_view::npos) return {name, "ratio"};
  return {name.substr(0, us), name.substr(us + 1)};
}

inline std::optional<double> component_value(const PairScore& s, Component c) {
  const auto pick = [](const std::optional<Prf>& prf, int field) -> std::optional<double> {
    if (!prf) return std::nullopt;
    return field == 0 ? prf->precision : field == 1 ? prf->recall : prf->f1;
  };
  switch (c) {
    case Component::gestalt: return s.gestalt;
    case Component::rouge1_precision: return pick(s.rouge1, 0);
    case Component::rouge1_recall: return pick(s.rouge1, 1);
    case Component::rouge1_f1: return pick(s.rouge1, 2);
    case Component::rougeL_precision: return pick(s.rougeL, 0);
    case Component::rougeL_recall: return pick(s.rougeL, 1);
    case Component::rougeL_f1: return pick(s.rougeL, 2);
    case Component::embed_precision: return pick(s.embed, 0);
    case Component::embed_recall: return pick(s.embed, 1);
    case Component::embed_f1: return pick(s.embed, 2);
  }
  return std::nullopt;
}

struct MetricConfig {
  bool gestalt = true;
  bool rouge1 = true;
  bool rougeL = true;
  /// Embedding metric runs when a provider is set.
  const EmbeddingProvider* provider = nullptr;
  std::optional<RescaleBaseline> baseline;
};

struct PairRecord {
  std::string admission_id;
  std::string note_type;
  std::string prev_doc_id;
  std::string next_doc_id;
  PairScore score;
  std::size_t pair_token_count = 0;
};

/// Scores a candidate note against its reference note.
inline PairScore score_pair(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                            const MetricConfig& config, std::string_view cand_doc = {},
                            std::string_view ref_doc = {}) {
  PairScore s;
  s.cand_tokens = cand.size();
  s.ref_tokens = ref.size();
  if (config.gestalt) s.gestalt = gestalt_ratio(cand, ref);
  if (config.rouge1) s.rouge1 = rouge_n(cand, ref, 1);
  if (config.rougeL) s.rougeL = rouge_l(cand, ref);
  if (config.provider && !cand.empty() && !ref.empty()) {
    s.embed = embed_score(cand, ref, *config.provider, config.baseline, cand_doc, ref_doc);
  }
  return s;
}

/// Scores every adjacent pair of every sequence: the later note is the
/// candidate and the earlier note the reference, so recall is the share of
/// the previous note carried into the next.
inline std::vector<PairRecord> pairwise_scores(const std::vector<NoteSequence>& sequences,
                                               const MetricConfig& config) {
  std::vector<PairRecord> records;
  for (const auto& seq : sequences) {
    if (seq.docs.size() < 2) continue;
    std::vector<std::string> prev = word_tokenize(seq.docs[0]->text);
    for (std::size_t i = 1; i < seq.docs.size(); ++i) {
      std::vector<std::string> next = word_tokenize(seq.docs[i]->text);
      PairRecord r{seq.admission_id, seq.note_type, seq.docs[i - 1]->doc_id, seq.docs[i]->doc_id,
                   score_pair(next, prev, config, seq.docs[i]->doc_id, seq.docs[i - 1]->doc_id),
                   next.size() + prev.size()};
      records.push_back(std::move(r));
      prev = std::move(next);
    }
  }
  return records;
}

/// Median; the mean of the two central values for even counts.
inline double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

enum class Pooling {
  /// Median over all pairs of a type, across admissions.
  pooled,
  /// Median per admission, then the mean of those medians.
  per_admission,
};

struct TypeAggregate {
  std::string note_type;
  std::size_t n_pairs = 0;
  std::array<std::optional<double>, kNumComponents> medians{};
  std::size_t total_token_count = 0;

  std::optional<double> get(Component c) const { return medians[static_cast<std::size_t>(c)]; }
};

/// Per-note-type medians of every component, sorted by note type.
inline std::vector<TypeAggregate> aggregate_per_type(const std::vector<PairRecord>& records,
                                                     Pooling pooling = Pooling::pooled) {
  std::map<std::string, std::vector<const PairRecord*>> by_type;
  for (const auto& r : records) by_type[r.note_type].push_back(&r);
  std::vector<TypeAggregate> out;
  for (const auto& [type, recs] : by_type) {
    TypeAggregate agg{type, recs.size(), {}, 0};
    for (const auto* r : recs) agg.total_token_count += r->pair_token_count;
    for (auto c : kAllComponents) {
      if (pooling == Pooling::pooled) {
        std::vector<double> values;
        for (const auto* r : recs) {
          if (auto v = component_value(r->score, c)) values.push_back(*v);
        }
        if (!values.empty()) agg.medians[static_cast<std::size_t>(c)] = median(std::move(values));
      } else {
        std::map<std::string_view, std::vector<double>> by_adm;
        for (const auto* r : recs) {
          if (auto v = component_value(r->score, c)) by_adm[r->admission_id].push_back(*v);
        }
        if (by_adm.empty()) continue;
        CompensatedSum sum;
        for (auto& [adm, values] : by_adm) sum.add(median(std::move(values)));
        agg.medians[static_cast<std::size_t>(c)] = sum.value() / static_cast<double>(by_adm.size());
      }
    }
    out.push_back(std::move(agg));
  }
  return out;
}

/// The k types with the highest `key` median (missing values last), ties
/// by note type.
inline std::vector<TypeAggregate> top_types(std::vector<TypeAggregate> aggregates, std::size_t k,
                                            Component key = Component::rouge1_f1) {
  if (k < 1) throw ConfigError("top-k requires k >= 1");
  static constexpr double kMissing = -std::numeric_limits<double>::infinity();
  std::stable_sort(aggregates.begin(), aggregates.end(),
                   [key](const TypeAggregate& a, const TypeAggregate& b) {
                     const double va = a.get(key).value_or(kMissing);
                     const double vb = b.get(key).value_or(kMissing);
                     if (va != vb) return va > vb;
                     return a.note_type < b.note_type;
                   });
  if (aggregates.size() > k) aggregates.resize(k);
  return aggregates;
}

struct CorpusSummary {
  std::array<std::optional<double>, kNumComponents> weighted{};
  std::size_t n_pairs = 0;
  std::size_t total_tokens = 0;

  std::optional<double> get(Component c) const { return weighted[static_cast<std::size_t>(c)]; }
};

/// Token-weighted means: sum(pair_token_count * score) / sum(pair_token_count)
/// per component, over the pairs carrying that component.
inline CorpusSummary weighted_summary(const std::vector<PairRecord>& records) {
  if (records.empty()) throw Error("cannot summarise an empty set of pair records");
  // Fixed reduction order keeps the result independent of input order.
  std::vector<const PairRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const PairRecord* a, const PairRecord* b) {
    return std::tie(a->note_type, a->admission_id, a->prev_doc_id, a->next_doc_id) <
           std::tie(b->note_type, b->admission_id, b->prev_doc_id, b->next_doc_id);
  });
  CorpusSummary s;
  s.n_pairs = records.size();
  for (const auto& r : records) s.total_tokens += r.pair_token_count;
  for (auto c : kAllComponents) {
    CompensatedSum num;
    std::uint64_t den = 0;
    for (const auto* rp : order) {
      const auto& r = *rp;
      if (auto v = component_value(r.score, c)) {
        num.add(static_cast<double>(r.pair_token_count) * *v);
        den += r.pair_token_count;
      }
    }
    if (den > 0) s.weighted[static_cast<std::size_t>(c)] = num.value() / static_cast<double>(den);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Pair-record CSV. Scores keep 6 decimals so downstream aggregation is not
// limited by the 2-decimal report formatting.

inline constexpr int kPairRecordDecimals = 6;

inline void write_pair_records(const std::vector<PairRecord>& records, std::ostream& out) {
  std::vector<std::string> header{"admission_id", "note_type",  "prev_doc_id",     "next_doc_id",
                                  "cand_tokens",  "ref_tokens", "pair_token_count"};
  for (auto c : kAllComponents) header.emplace_back(component_name(c));
  out << csv::record(header);
  for (const auto& r : records) {
    std::vector<std::string> row{r.admission_id,
                                 r.note_type,
                                 r.prev_doc_id,
                                 r.next_doc_id,
                                 std::to_string(r.score.cand_tokens),
                                 std::to_string(r.score.ref_tokens),
                                 std::to_string(r.pair_token_count)};
    for (auto c : kAllComponents) {
      const auto v = component_value(r.score, c);
      row.push_back(v ? format_fixed(*v, kPairRecordDecimals) : std::string());
    }
    out << csv::record(row);
  }
}

inline std::vector<PairRecord> read_pair_records(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw ParseError("empty pair-record file", 1);
  const auto idx = detail::csv_header(row);
  const auto col = [&idx](const std::string& name) { return detail::require_column(idx, name); };
  const auto c_adm = col("admission_id"), c_type = col("note_type"), c_prev = col("prev_doc_id"),
             c_next = col("next_doc_id"), c_cand = col("cand_tokens"), c_ref = col("ref_tokens"),
             c_pair = col("pair_token_count");
  std::array<std::size_t, kNumComponents> c_comp{};
  for (auto c : kAllComponents) c_comp[static_cast<std::size_t>(c)] = col(std::string(component_name(c)));

  std::vector<PairRecord> records;
  while (reader.next(row)) {
    const auto line = reader.record_line();
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != idx.size()) {
      throw ParseError("pair record on line " + std::to_string(line) + " has " +
                           std::to_string(row.size()) + " fields, expected " + std::to_string(idx.size()),
                       line);
    }
    const auto num = [&](std::size_t c) -> std::optional<double> {
      if (row[c].empty()) return std::nullopt;
      try {
        std::size_t used = 0;
        const double v = std::stod(row[c], &used);
        if (used != row[c].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw ParseError("bad number '" + row[c] + "' on line " + std::to_string(line), line);
      }
    };
    const auto count = [&](std::size_t c) {
      const auto v = num(c);
      if (!v || *v < 0) throw ParseError("bad count on line " + std::to_string(line), line);
      return static_cast<std::size_t>(*v);
    };
    PairRecord r{row[c_adm], row[c_type], row[c_prev], row[c_next], {}, count(c_pair)};
    r.score.cand_tokens = count(c_cand);
    r.score.ref_tokens = count(c_ref);
    const auto val = [&](Component c) { return num(c_comp[static_cast<std::size_t>(c)]); };
    r.score.gestalt = val(Component::gestalt);
    const auto prf = [&](Component p, Component rc, Component f) -> std::optional<Prf> {
      const auto vp = val(p), vr = val(rc), vf = val(f);
      if (!vp || !vr || !vf) return std::nullopt;
      return Prf{*vp, *vr, *vf};
    };
    r.score.rouge1 = prf(Component::rouge1_precision, Component::rouge1_recall, Component::rouge1_f1);
    r.score.rougeL = prf(Component::rougeL_precision, Component::rougeL_recall, Component::rougeL_f1);
    r.score.embed = prf(Component::embed_precision, Component::embed_recall, Component::embed_f1);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace rednote

#endif  // REDNOTE_PIPELINE_HPP
