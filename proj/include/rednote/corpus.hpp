#ifndef REDNOTE_CORPUS_HPP
#define REDNOTE_CORPUS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rednote/common.hpp"
#include "rednote/csv.hpp"
#include "rednote/timestamp.hpp"

namespace rednote {

/// One clinical note.
struct Document {
  std::string doc_id;
  std::string admission_id;
  std::string note_type;
  Timestamp updated_at;
  std::string text;
  std::optional<std::string> primary_diagnosis;
};

/// A labelled document collection. The label names the language the
/// corpus is drawn from (e.g. "MIMIC (Full)").
struct Corpus {
  std::string label;
  std::vector<Document> documents;
};

/// Time-ordered documents sharing (admission_id, note_type). Holds
/// pointers into the corpus it was grouped from.
struct NoteSequence {
  std::string admission_id;
  std::string note_type;
  std::vector<const Document*> docs;
};

enum class SplitUnit { document, admission };

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::admission;
};

struct CorpusSplit {
  Corpus train;
  Corpus val;
  Corpus test;
};

struct CorpusStats {
  std::size_t n_docs = 0;
  double avg_char_length = 0.0;
  std::size_t n_note_types = 0;
  std::size_t test_vocab_size = 0;
};

struct DropReport {
  std::size_t dropped_empty = 0;
  std::size_t dropped_missing = 0;
  std::size_t duplicates = 0;

  nlohmann::json to_json() const {
    return {{"dropped_empty", dropped_empty},
            {"dropped_missing", dropped_missing},
            {"duplicates", duplicates}};
  }
};

struct IngestOptions {
  /// Keep records whose text is empty instead of dropping them.
  bool keep_empty = false;
  /// Drop later records that repeat a doc_id instead of failing.
  bool skip_duplicates = false;
  /// Corpus label; defaults to the input file stem.
  std::string label;
  /// MIMIC only: DIAGNOSES_ICD-shaped CSV supplying primary diagnoses
  /// (the SEQ_NUM = 1 code of each admission).
  std::filesystem::path diagnoses_csv;
};

struct IngestResult {
  Corpus corpus;
  DropReport drops;
};

namespace detail {

/// Shared record acceptance: empty-text and duplicate handling.
class CorpusBuilder {
 public:
  CorpusBuilder(const IngestOptions& options, std::string label)
      : options_(options) {
    result_.corpus.label = std::move(label);
  }

  void add(Document doc, std::size_t line) {
    if (doc.text.empty() && !options_.keep_empty) {
      ++result_.drops.dropped_empty;
      return;
    }
    if (!seen_.insert(doc.doc_id).second) {
      if (options_.skip_duplicates) {
        ++result_.drops.duplicates;
        return;
      }
      throw ParseError("duplicate doc_id '" + doc.doc_id + "' on line " +
                           std::to_string(line),
                       line);
    }
    result_.corpus.documents.push_back(std::move(doc));
  }

  void drop_missing() { ++result_.drops.dropped_missing; }

  IngestResult finish() && { return std::move(result_); }

 private:
  const IngestOptions& options_;
  IngestResult result_;
  std::unordered_set<std::string> seen_;
};

inline std::string label_for(const std::filesystem::path& path,
                             const IngestOptions& options) {
  return options.label.empty() ? path.stem().string() : options.label;
}

inline std::optional<std::string> json_id(const nlohmann::json& obj,
                                          const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return it->dump();
  return std::nullopt;
}

}  // namespace detail

/// Reads the JSONL corpus format: one object per line with doc_id,
/// admission_id, note_type, updated_at, text and optional primary_diagnosis.
/// Records missing a required field are dropped and counted.
inline IngestResult ingest_jsonl(std::istream& in, const IngestOptions& options,
                                 std::string label) {
  detail::CorpusBuilder builder(options, std::move(label));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("malformed JSON on line " + std::to_string(lineno) +
                           ": " + e.what(),
                       lineno);
    }
    if (!obj.is_object()) {
      throw ParseError("line " + std::to_string(lineno) + " is not a JSON object",
                       lineno);
    }
    auto doc_id = detail::json_id(obj, "doc_id");
    auto admission = detail::json_id(obj, "admission_id");
    const auto type = obj.find("note_type");
    const auto when = obj.find("updated_at");
    const auto text = obj.find("text");
    if (!doc_id || !admission || type == obj.end() || !type->is_string() ||
        when == obj.end() || !when->is_string() || text == obj.end() ||
        !text->is_string()) {
      builder.drop_missing();
      continue;
    }
    const auto ts = parse_timestamp(when->get_ref<const std::string&>());
    if (!ts) {
      throw ParseError("invalid updated_at '" + when->get<std::string>() +
                           "' on line " + std::to_string(lineno),
                       lineno);
    }
    Document doc{std::move(*doc_id), std::move(*admission), type->get<std::string>(),
                 *ts, text->get<std::string>(), std::nullopt};
    if (const auto dx = obj.find("primary_diagnosis");
        dx != obj.end() && dx->is_string()) {
      doc.primary_diagnosis = dx->get<std::string>();
    }
    builder.add(std::move(doc), lineno);
  }
  return std::move(builder).finish();
}

inline IngestResult ingest_jsonl(const std::filesystem::path& path,
                                 const IngestOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return ingest_jsonl(in, options, detail::label_for(path, options));
}

namespace detail {

inline std::unordered_map<std::string, std::size_t> csv_header(
    const std::vector<std::string>& header) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name = header[i];
    if (i == 0 && name.starts_with("\xEF\xBB\xBF")) name.erase(0, 3);
    idx.emplace(std::move(name), i);
  }
  return idx;
}

inline std::size_t require_column(
    const std::unordered_map<std::string, std::size_t>& idx,
    const std::string& name) {
  const auto it = idx.find(name);
  if (it == idx.end()) throw ParseError("missing required column " + name, 1);
  return it->second;
}

inline std::unordered_map<std::string, std::string> read_primary_diagnoses(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw ParseError("empty diagnoses file " + path.string());
  const auto idx = csv_header(row);
  const auto c_hadm = require_column(idx, "HADM_ID");
  const auto c_seq = require_column(idx, "SEQ_NUM");
  const auto c_code = require_column(idx, "ICD9_CODE");
  std::unordered_map<std::string, std::string> primary;
  while (reader.next(row)) {
    if (row.size() <= std::max({c_hadm, c_seq, c_code})) continue;
    if (row[c_seq] == "1" && !row[c_hadm].empty() && !row[c_code].empty()) {
      primary.emplace(row[c_hadm], row[c_code]);
    }
  }
  return primary;
}

}  // namespace detail

/// Reads a MIMIC NOTEEVENTS-shaped CSV. note_type is CATEGORY:DESCRIPTION;
/// CHARTTIME is preferred over CHARTDATE; rows without HADM_ID are dropped.
inline IngestResult ingest_mimic_csv(std::istream& in, const IngestOptions& options,
                                     std::string label) {
  csv::Reader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw ParseError("empty CSV input", 1);
  const auto idx = detail::csv_header(row);
  const auto c_row = detail::require_column(idx, "ROW_ID");
  const auto c_hadm = detail::require_column(idx, "HADM_ID");
  const auto c_cat = detail::require_column(idx, "CATEGORY");
  const auto c_desc = detail::require_column(idx, "DESCRIPTION");
  const auto c_text = detail::require_column(idx, "TEXT");
  const auto it_time = idx.find("CHARTTIME");
  const auto it_date = idx.find("CHARTDATE");
  if (it_time == idx.end() && it_date == idx.end()) {
    throw ParseError("missing required column CHARTTIME or CHARTDATE", 1);
  }
  std::unordered_map<std::string, std::string> diagnoses;
  if (!options.diagnoses_csv.empty()) {
    diagnoses = detail::read_primary_diagnoses(options.diagnoses_csv);
  }

  detail::CorpusBuilder builder(options, std::move(label));
  const auto field = [&row](std::size_t c) -> const std::string& {
    static const std::string empty;
    return c < row.size() ? row[c] : empty;
  };
  while (reader.next(row)) {
    const auto line = reader.record_line();
    if (row.size() == 1 && row[0].empty()) continue;
    const auto& hadm = field(c_hadm);
    const auto& row_id = field(c_row);
    std::string when;
    if (it_time != idx.end()) when = field(it_time->second);
    if (when.empty() && it_date != idx.end()) when = field(it_date->second);
    if (hadm.empty() || row_id.empty() || when.empty()) {
      builder.drop_missing();
      continue;
    }
    const auto ts = parse_timestamp(when);
    if (!ts) {
      throw ParseError("invalid chart time '" + when + "' on line " +
                           std::to_string(line),
                       line);
    }
    Document doc{row_id, hadm, field(c_cat) + ":" + field(c_desc), *ts,
                 field(c_text), std::nullopt};
    if (const auto dx = diagnoses.find(hadm); dx != diagnoses.end()) {
      doc.primary_diagnosis = dx->second;
    }
    builder.add(std::move(doc), line);
  }
  return std::move(builder).finish();
}

inline IngestResult ingest_mimic_csv(const std::filesystem::path& path,
                                     const IngestOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return ingest_mimic_csv(in, options, detail::label_for(path, options));
}

inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json j{{"doc_id", doc.doc_id},
                   {"admission_id", doc.admission_id},
                   {"note_type", doc.note_type},
                   {"updated_at", to_iso(doc.updated_at)},
                   {"text", doc.text}};
  if (doc.primary_diagnosis) j["primary_diagnosis"] = *doc.primary_diagnosis;
  return j;
}

inline void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents) out << to_json(doc).dump() << '\n';
}

inline void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(corpus, out);
  if (!out) throw IoError("failed writing " + path.string());
}

/// Keeps documents whose primary diagnosis is shared by at least
/// `min_count` distinct admissions.
inline Corpus filter_primary_diagnosis(const Corpus& corpus,
                                       std::size_t min_count = 20) {
  std::map<std::string, std::set<std::string>> admissions_by_dx;
  for (const auto& d : corpus.documents) {
    if (d.primary_diagnosis) admissions_by_dx[*d.primary_diagnosis].insert(d.admission_id);
  }
  if (admissions_by_dx.empty()) {
    throw Error("corpus '" + corpus.label + "' carries no primary_diagnosis values");
  }
  Corpus out{corpus.label, {}};
  for (const auto& d : corpus.documents) {
    if (d.primary_diagnosis &&
        admissions_by_dx[*d.primary_diagnosis].size() >= min_count) {
      out.documents.push_back(d);
    }
  }
  return out;
}

inline void validate(const SplitSpec& spec) {
  for (double f : {spec.train_frac, spec.val_frac, spec.test_frac}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw ConfigError("split fractions must lie strictly between 0 and 1");
    }
  }
  const double sum = spec.train_frac + spec.val_frac + spec.test_frac;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions sum to " + format_fixed(sum, 6) + ", not 1");
  }
}

/// Deterministic train/val/test partition. Units (documents or admissions)
/// are sorted by id, shuffled with the seed, then cut by the fractions.
inline CorpusSplit split(const Corpus& corpus, const SplitSpec& spec) {
  validate(spec);
  const auto unit_of = [&spec](const Document& d) -> const std::string& {
    return spec.unit == SplitUnit::admission ? d.admission_id : d.doc_id;
  };
  std::vector<std::string> units;
  {
    std::set<std::string> uniq;
    for (const auto& d : corpus.documents) uniq.insert(unit_of(d));
    units.assign(uniq.begin(), uniq.end());
  }
  Rng rng(spec.seed);
  rng.shuffle(units.begin(), units.end());
  const auto n = units.size();
  const auto n_train = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(n))));
  const auto n_val = std::min<std::size_t>(
      n - n_train, static_cast<std::size_t>(std::llround(spec.val_frac * static_cast<double>(n))));
  std::unordered_map<std::string, int> bucket;
  for (std::size_t i = 0; i < n; ++i) {
    bucket.emplace(units[i], i < n_train ? 0 : i < n_train + n_val ? 1 : 2);
  }
  CorpusSplit out{{corpus.label, {}}, {corpus.label, {}}, {corpus.label, {}}};
  Corpus* parts[] = {&out.train, &out.val, &out.test};
  for (const auto& d : corpus.documents) parts[bucket.at(unit_of(d))]->documents.push_back(d);
  return out;
}

/// Lists of doc_ids per split, as exchanged between CLI commands.
struct SplitManifest {
  std::vector<std::string> train, val, test;

  static SplitManifest from(const CorpusSplit& s) {
    SplitManifest m;
    for (const auto& d : s.train.documents) m.train.push_back(d.doc_id);
    for (const auto& d : s.val.documents) m.val.push_back(d.doc_id);
    for (const auto& d : s.test.documents) m.test.push_back(d.doc_id);
    return m;
  }

  nlohmann::json to_json() const {
    return {{"train", train}, {"val", val}, {"test", test}};
  }

  static SplitManifest from_json(const nlohmann::json& j) {
    SplitManifest m;
    try {
      j.at("train").get_to(m.train);
      j.at("val").get_to(m.val);
      j.at("test").get_to(m.test);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed split manifest: ") + e.what());
    }
    return m;
  }

  const std::vector<std::string>& part(std::string_view name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + std::string(name) + "'");
  }
};

/// Documents of `corpus` whose ids are listed, in corpus order.
inline Corpus select(const Corpus& corpus, const std::vector<std::string>& ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Corpus out{corpus.label, {}};
  for (const auto& d : corpus.documents) {
    if (wanted.contains(d.doc_id)) out.documents.push_back(d);
  }
  return out;
}

/// Descriptive statistics. `test_split` designates the material whose
/// token vocabulary is counted; when absent the whole corpus is used.
/// Tokenizer: any callable mapping string_view to a range of hashable tokens.
template <typename Tokenizer>
CorpusStats stats(const Corpus& corpus, const Tokenizer& tokenizer,
                  const Corpus* test_split = nullptr) {
  CorpusStats s;
  s.n_docs = corpus.documents.size();
  if (s.n_docs == 0 && (!test_split || test_split->documents.empty())) return s;
  std::unordered_set<std::string_view> types;
  std::uint64_t chars = 0;
  for (const auto& d : corpus.documents) {
    chars += utf8::length(d.text);
    types.insert(d.note_type);
  }
  s.n_note_types = types.size();
  s.avg_char_length =
      s.n_docs ? static_cast<double>(chars) / static_cast<double>(s.n_docs) : 0.0;

  using Token = std::ranges::range_value_t<decltype(tokenizer(std::string_view{}))>;
  std::unordered_set<Token> vocab;
  for (const auto& d : (test_split ? *test_split : corpus).documents) {
    for (auto&& t : tokenizer(d.text)) vocab.insert(std::forward<decltype(t)>(t));
  }
  s.test_vocab_size = vocab.size();
  return s;
}

/// Groups documents by (admission_id, note_type); each sequence is ordered
/// by updated_at with ties broken by doc_id. Sequences come out sorted by
/// (admission_id, note_type).
inline std::vector<NoteSequence> group_sequences(const Corpus& corpus) {
  std::map<std::pair<std::string_view, std::string_view>, std::vector<const Document*>> groups;
  for (const auto& d : corpus.documents) {
    groups[{d.admission_id, d.note_type}].push_back(&d);
  }
  std::vector<NoteSequence> out;
  out.reserve(groups.size());
  for (auto& [key, docs] : groups) {
    std::sort(docs.begin(), docs.end(), [](const Document* a, const Document* b) {
      if (a->updated_at != b->updated_at) return a->updated_at < b->updated_at;
      return a->doc_id < b->doc_id;
    });
    out.push_back({std::string(key.first), std::string(key.second), std::move(docs)});
  }
  return out;
}

}  // namespace rednote

#endif  // REDNOTE_CORPUS_HPP
