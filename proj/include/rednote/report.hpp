#ifndef REDNOTE_REPORT_HPP
#define REDNOTE_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rednote/common.hpp"
#include "rednote/corpus.hpp"
#include "rednote/csv.hpp"
#include "rednote/lm.hpp"
#include "rednote/pipeline.hpp"

namespace rednote {

inline constexpr int kPplDecimals = 2;
inline constexpr int kScoreDecimals = 2;
inline constexpr int kBitsDecimals = 3;
inline constexpr std::string_view kMissingCell = "–";

/// One table cell: missing, text, integer count or fixed-precision number.
struct Cell {
  std::variant<std::monostate, std::string, std::int64_t, double> value;
  int decimals = 2;

  static Cell missing() { return {}; }
  static Cell text(std::string s) { return {std::move(s), 0}; }
  static Cell count(std::size_t n) { return {static_cast<std::int64_t>(n), 0}; }
  static Cell number(double v, int decimals) { return {v, decimals}; }
  static Cell number(const std::optional<double>& v, int decimals) {
    return v ? number(*v, decimals) : missing();
  }

  bool is_missing() const { return std::holds_alternative<std::monostate>(value); }

  std::string render() const {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* n = std::get_if<std::int64_t>(&value)) return std::to_string(*n);
    if (const auto* d = std::get_if<double>(&value)) return format_fixed(*d, decimals);
    return std::string(kMissingCell);
  }

  /// Numbers are emitted at their rendered precision.
  nlohmann::json to_json() const {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* n = std::get_if<std::int64_t>(&value)) return *n;
    if (const auto* d = std::get_if<double>(&value)) {
      if (!std::isfinite(*d)) return nullptr;
      return std::stod(format_fixed(*d, decimals));
    }
    return nullptr;
  }
};

struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  /// Footer lines (markdown and json only).
  std::vector<std::string> notes;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
      throw Error("table '" + title + "': row has " + std::to_string(row.size()) + " cells, expected " +
                  std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
  }
};

enum class Format { csv, json, markdown };

inline Format parse_format(std::string_view name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  if (name == "markdown" || name == "md") return Format::markdown;
  throw ConfigError("unknown report format '" + std::string(name) + "' (expected csv, json or markdown)");
}

inline std::string_view format_extension(Format f) {
  switch (f) {
    case Format::csv: return "csv";
    case Format::json: return "json";
    case Format::markdown: return "md";
  }
  return "txt";
}

namespace detail {

inline std::string md_escape(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out.push_back(' ');
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline std::string emit(const Table& table, Format format) {
  switch (format) {
    case Format::csv: {
      std::string out = csv::record(table.columns);
      std::vector<std::string> fields;
      for (const auto& row : table.rows) {
        fields.clear();
        for (const auto& c : row) fields.push_back(c.render());
        out += csv::record(fields);
      }
      return out;
    }
    case Format::json: {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : table.rows) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = row[i].to_json();
        rows.push_back(std::move(obj));
      }
      const nlohmann::json j{{"title", table.title},
                             {"columns", table.columns},
                             {"rows", std::move(rows)},
                             {"notes", table.notes}};
      return j.dump(2) + "\n";
    }
    case Format::markdown: {
      std::string out;
      if (!table.title.empty()) out += "### " + detail::md_escape(table.title) + "\n\n";
      out += "|";
      for (const auto& c : table.columns) out += " " + detail::md_escape(c) + " |";
      out += "\n|";
      for (std::size_t i = 0; i < table.columns.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
      out += "\n";
      for (const auto& row : table.rows) {
        out += "|";
        for (const auto& c : row) out += " " + detail::md_escape(c.render()) + " |";
        out += "\n";
      }
      if (!table.notes.empty()) {
        out += "\n";
        for (const auto& n : table.notes) out += detail::md_escape(n) + "\n";
      }
      return out;
    }
  }
  throw ConfigError("unknown report format");
}

// Perplexity table ------------------------------------------------------

struct PplEntry {
  std::string label;
  std::optional<double> val_ppl;
  double test_ppl = 1.0;
  std::optional<double> holdout_ppl;

  static PplEntry from(std::string label, const std::optional<EntropyReport>& val, const EntropyReport& test,
                       const std::optional<EntropyReport>& holdout = std::nullopt) {
    PplEntry e{std::move(label), std::nullopt, test.perplexity, std::nullopt};
    if (val) e.val_ppl = val->perplexity;
    if (holdout) e.holdout_ppl = holdout->perplexity;
    return e;
  }
};

struct PplTable {
  std::vector<PplEntry> rows;
  std::string holdout_label = "holdout";
  std::optional<std::string> reference;
  /// min / max of reference_bits / target_bits over the target rows.
  std::optional<std::pair<double, double>> ratio_range;

  std::optional<std::string> footer() const {
    if (!ratio_range) return std::nullopt;
    const auto lo = format_fixed(ratio_range->first, 2) + "×";
    const auto hi = format_fixed(ratio_range->second, 2) + "×";
    return "efficiency ratio vs " + *reference + ": " + (lo == hi ? lo : lo + "–" + hi);
  }

  Table to_table() const {
    Table t{"Perplexity", {"corpus", "val_ppl", "val_bits", "test_ppl", "test_bits",
                           holdout_label + "_ppl", holdout_label + "_bits"}, {}, {}};
    const auto ppl = [](const std::optional<double>& p) { return Cell::number(p, kPplDecimals); };
    const auto bits = [](const std::optional<double>& p) {
      return p ? Cell::number(ppl_to_bits(*p), kBitsDecimals) : Cell::missing();
    };
    for (const auto& r : rows) {
      t.add_row({Cell::text(r.label), ppl(r.val_ppl), bits(r.val_ppl), ppl(r.test_ppl), bits(r.test_ppl),
                 ppl(r.holdout_ppl), bits(r.holdout_ppl)});
    }
    if (auto f = footer()) t.notes.push_back(*f);
    return t;
  }
};

/// Rows keep input order. With a reference label and at least one other
/// row, the footer gives the range of test-bit efficiency ratios.
inline PplTable build_ppl_table(std::vector<PplEntry> entries,
                                const std::optional<std::string>& reference = std::nullopt,
                                std::string holdout_label = "holdout") {
  PplTable t{std::move(entries), std::move(holdout_label), reference, std::nullopt};
  if (!reference || t.rows.size() < 2) return t;
  const auto ref = std::find_if(t.rows.begin(), t.rows.end(),
                                [&](const PplEntry& e) { return e.label == *reference; });
  if (ref == t.rows.end()) throw ConfigError("reference row '" + *reference + "' is not in the table");
  const double ref_bits = ppl_to_bits(ref->test_ppl);
  for (const auto& e : t.rows) {
    if (&e == &*ref) continue;
    const double r = efficiency_ratio(ref_bits, ppl_to_bits(e.test_ppl));
    if (!t.ratio_range) t.ratio_range = {r, r};
    t.ratio_range->first = std::min(t.ratio_range->first, r);
    t.ratio_range->second = std::max(t.ratio_range->second, r);
  }
  return t;
}

// Cross-dataset matrix ---------------------------------------------------

struct CrossEntry {
  std::string train;
  std::string test;
  double ppl;
};

struct CrossMatrix {
  std::vector<std::string> train_labels;
  std::vector<std::string> test_labels;
  std::map<std::pair<std::string, std::string>, double> cells;

  std::optional<double> at(const std::string& train, const std::string& test) const {
    const auto it = cells.find({train, test});
    if (it == cells.end()) return std::nullopt;
    return it->second;
  }

  Table to_table() const {
    Table t{"Cross-corpus perplexity", {"train \\ test"}, {}, {}};
    for (const auto& c : test_labels) t.columns.push_back(c);
    for (const auto& r : train_labels) {
      std::vector<Cell> row{Cell::text(r)};
      for (const auto& c : test_labels) row.push_back(Cell::number(at(r, c), kPplDecimals));
      t.add_row(std::move(row));
    }
    return t;
  }
};

/// Row and column labels appear in first-seen order.
inline CrossMatrix build_cross_matrix(const std::vector<CrossEntry>& entries) {
  CrossMatrix m;
  for (const auto& e : entries) {
    if (!m.cells.emplace(std::pair{e.train, e.test}, e.ppl).second) {
      throw Error("duplicate cross-matrix entry (" + e.train + ", " + e.test + ")");
    }
    if (std::find(m.train_labels.begin(), m.train_labels.end(), e.train) == m.train_labels.end()) {
      m.train_labels.push_back(e.train);
    }
    if (std::find(m.test_labels.begin(), m.test_labels.end(), e.test) == m.test_labels.end()) {
      m.test_labels.push_back(e.test);
    }
  }
  return m;
}

// Other tables -----------------------------------------------------------

inline Table stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows) {
  Table t{"Corpus statistics", {"dataset", "n_docs", "avg_length", "n_note_types", "test_vocab_size"}, {}, {}};
  for (const auto& [label, s] : rows) {
    t.add_row({Cell::text(label), Cell::count(s.n_docs), Cell::number(s.avg_char_length, 2),
               Cell::count(s.n_note_types), Cell::count(s.test_vocab_size)});
  }
  return t;
}

inline Table entropy_table(const std::vector<std::pair<std::string, EntropyReport>>& rows) {
  Table t{"Cross-entropy",
          {"split", "n_tokens", "cross_entropy_bits", "perplexity", "upper_bound_bits"}, {}, {}};
  for (const auto& [label, r] : rows) {
    t.add_row({Cell::text(label), Cell::count(r.n_scored_tokens), Cell::number(r.cross_entropy_bits, kBitsDecimals),
               Cell::number(r.perplexity, kPplDecimals), Cell::number(r.upper_bound_bits, kBitsDecimals)});
  }
  return t;
}

inline Table aggregate_table(const std::vector<TypeAggregate>& aggregates) {
  Table t{"Per-type medians", {"note_type", "n_pairs", "total_tokens"}, {}, {}};
  for (auto c : kAllComponents) t.columns.emplace_back(component_name(c));
  for (const auto& a : aggregates) {
    std::vector<Cell> row{Cell::text(a.note_type), Cell::count(a.n_pairs), Cell::count(a.total_token_count)};
    for (auto c : kAllComponents) row.push_back(Cell::number(a.get(c), kScoreDecimals));
    t.add_row(std::move(row));
  }
  return t;
}

inline Table summary_table(const std::vector<std::pair<std::string, CorpusSummary>>& rows) {
  Table t{"Token-weighted averages", {"dataset", "n_pairs", "total_tokens"}, {}, {}};
  for (auto c : kAllComponents) t.columns.emplace_back(component_name(c));
  for (const auto& [label, s] : rows) {
    std::vector<Cell> row{Cell::text(label), Cell::count(s.n_pairs), Cell::count(s.total_tokens)};
    for (auto c : kAllComponents) row.push_back(Cell::number(s.weighted[static_cast<std::size_t>(c)], kScoreDecimals));
    t.add_row(std::move(row));
  }
  return t;
}

/// Long format (note_type, metric, component, value) for plotting. Missing
/// values are skipped.
inline Table per_type_long(const std::vector<TypeAggregate>& aggregates) {
  Table t{"Per-type medians (long)", {"note_type", "metric", "component", "value"}, {}, {}};
  for (const auto& a : aggregates) {
    for (auto c : kAllComponents) {
      const auto v = a.get(c);
      if (!v) continue;
      const auto [metric, component] = split_component(c);
      t.add_row({Cell::text(a.note_type), Cell::text(std::string(metric)), Cell::text(std::string(component)),
                 Cell::number(*v, kScoreDecimals)});
    }
  }
  return t;
}

}  // namespace rednote

#endif  // REDNOTE_REPORT_HPP
