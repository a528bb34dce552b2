// rednote: command-line front end for the redundancy / information
// content toolkit.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rednote/rednote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rednote;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

std::string env_name(std::string_view option) {
  std::string out = "REDNOTE_";
  for (char c : option) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

// Config files: JSON or TOML. Items whose REDNOTE_* variable is set are
// dropped so the environment wins over the file (CLI11 applies the file
// first and skips env vars for options that already have a value).
class LayeredConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool defaults, bool descriptions,
                        std::string prefix) const override {
    return toml_.to_config(app, defaults, descriptions, std::move(prefix));
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::vector<CLI::ConfigItem> items;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        throw CLI::ConversionError("config file is not valid JSON (byte " + std::to_string(e.byte) + ")");
      }
      std::vector<std::string> parents;
      flatten(j, parents, items);
    } else {
      std::istringstream s(text);
      items = toml_.from_config(s);
    }
    std::erase_if(items, [](const CLI::ConfigItem& it) {
      return it.name != "++" && it.name != "--" && std::getenv(env_name(it.name).c_str()) != nullptr;
    });
    return items;
  }

 private:
  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' has an unsupported value");
  }

  static void flatten(const json& j, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        parents.push_back(key);
        flatten(v, parents, items);
        parents.pop_back();
        continue;
      }
      CLI::ConfigItem it;
      it.parents = parents;
      it.name = key;
      if (v.is_array()) {
        for (const auto& e : v) it.inputs.push_back(scalar(e, key));
      } else {
        it.inputs.push_back(scalar(v, key));
      }
      items.push_back(std::move(it));
    }
  }

  CLI::ConfigTOML toml_;
};

// Every option registers a getter so the resolved configuration can be
// archived next to the outputs.
struct Command {
  CLI::App* app = nullptr;
  std::vector<std::pair<std::string, std::function<json()>>> resolved;

  template <typename T>
  CLI::Option* option(const std::string& name, T& var, const std::string& desc) {
    resolved.emplace_back(name, [&var] { return json(var); });
    auto* o = app->add_option("--" + name, var, desc)->envname(env_name(name));
    if constexpr (requires { var.push_back(var.front()); } && !std::is_same_v<T, std::string>) o->delimiter(',');
    return o->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    resolved.emplace_back(name, [&var] { return json(var); });
    return app->add_flag("--" + name, var, desc)->envname(env_name(name));
  }

  json to_json() const {
    json j = json::object();
    for (const auto& [name, get] : resolved) j[name] = get();
    return j;
  }
};

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed JSON at byte " + std::to_string(e.byte), e.byte);
  }
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

fs::path prepare_out(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory " + dir);
  return p;
}

std::vector<Format> parse_formats(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("at least one output format is required");
  std::vector<Format> out;
  for (const auto& n : names) out.push_back(parse_format(n));
  return out;
}

void emit_all(const Table& table, const std::vector<Format>& formats, const fs::path& dir, const std::string& stem) {
  for (auto f : formats) write_text(dir / (stem + "." + std::string(format_extension(f))), emit(table, f));
}

// Shared corpus input options.
struct CorpusInput {
  std::string path;
  std::string format = "auto";
  std::string diagnoses;
  std::string label;
  bool keep_empty = false;
  bool skip_duplicates = false;

  void add(Command& c, bool required = true) {
    auto* o = c.option("corpus", path, "corpus file (JSONL or MIMIC NOTEEVENTS CSV)");
    if (required) o->required();
    c.option("format", format, "corpus format: auto, jsonl or mimic-csv")
        ->check(CLI::IsMember({"auto", "jsonl", "mimic-csv"}));
    c.option("diagnoses", diagnoses, "DIAGNOSES_ICD CSV supplying primary diagnoses (mimic-csv only)");
    c.option("label", label, "corpus label (default: file stem)");
    c.flag("keep-empty", keep_empty, "keep documents with empty text");
    c.flag("skip-duplicates", skip_duplicates, "drop repeated doc_ids instead of failing");
  }

  IngestResult load() const { return load(path); }

  IngestResult load(const std::string& p) const {
    IngestOptions opt;
    opt.keep_empty = keep_empty;
    opt.skip_duplicates = skip_duplicates;
    opt.label = label;
    opt.diagnoses_csv = diagnoses;
    const auto kind = format != "auto" ? format : fs::path(p).extension() == ".csv" ? "mimic-csv" : "jsonl";
    return kind == "mimic-csv" ? ingest_mimic_csv(fs::path(p), opt) : ingest_jsonl(fs::path(p), opt);
  }
};

std::optional<SplitManifest> load_manifest(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return SplitManifest::from_json(read_json(path));
}

Corpus part_of(const Corpus& corpus, const std::optional<SplitManifest>& m, const std::string& part) {
  return m ? select(corpus, m->part(part)) : corpus;
}

std::vector<std::vector<TokenId>> encode_corpus(const BpeModel& bpe, const Corpus& corpus) {
  std::vector<std::vector<TokenId>> docs;
  docs.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) docs.push_back(bpe.encode(d.text));
  return docs;
}

std::vector<std::string> texts_of(const Corpus& corpus) {
  std::vector<std::string> out;
  out.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) out.push_back(d.text);
  return out;
}

struct BpeTokenizer {
  const BpeModel* model;
  std::vector<TokenId> operator()(std::string_view text) const { return model->encode(text); }
};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rednote: information content and redundancy of clinical note corpora"};
  app.config_formatter(std::make_shared<LayeredConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "configuration file (JSON or TOML)");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "run seed; every random step derives its own seed from it")
      ->envname("REDNOTE_SEED")
      ->capture_default_str();
  std::string out_dir = ".";

  std::vector<std::unique_ptr<Command>> commands;
  std::map<const CLI::App*, std::function<void(const fs::path&)>> actions;
  const auto command = [&](const std::string& name, const std::string& desc) -> Command& {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, desc);
    c->option("out", out_dir, "output directory");
    commands.push_back(std::move(c));
    return *commands.back();
  };
  std::vector<std::string> formats{"csv", "json", "markdown"};

  // ingest ---------------------------------------------------------------
  CorpusInput ingest_in;
  std::size_t min_dx = 0;
  {
    auto& c = command("ingest", "read a corpus, normalise it to JSONL and report dropped records");
    ingest_in.add(c);
    c.option("min-diagnosis-count", min_dx,
             "keep only admissions whose primary diagnosis has at least this many admissions (0 = off)");
    actions[c.app] = [&](const fs::path& out) {
      auto res = ingest_in.load();
      if (min_dx > 0) res.corpus = filter_primary_diagnosis(res.corpus, min_dx);
      std::ofstream f(out / "corpus.jsonl", std::ios::binary);
      if (!f) throw IoError("cannot write " + (out / "corpus.jsonl").string());
      write_jsonl(res.corpus, f);
      write_text(out / "drop_report.json", res.drops.to_json().dump(2) + "\n");
      std::cout << "ingested " << res.corpus.documents.size() << " documents\n";
    };
  }

  // stats ----------------------------------------------------------------
  std::vector<std::string> stats_corpora, stats_manifests;
  std::string stats_tokenizer;
  CorpusInput stats_in;
  {
    auto& c = command("stats", "descriptive corpus statistics");
    stats_in.add(c, false);
    c.option("corpora", stats_corpora, "additional corpora, one table row each");
    c.option("manifest", stats_manifests, "split manifests matching the corpora; the test vocabulary uses the test split");
    c.option("tokenizer", stats_tokenizer, "BPE tokenizer file for the vocabulary count (default: whitespace words)");
    c.option("formats", formats, "output formats");
    actions[c.app] = [&](const fs::path& out) {
      auto paths = stats_corpora;
      if (!stats_in.path.empty()) paths.insert(paths.begin(), stats_in.path);
      if (paths.empty()) throw ConfigError("stats needs at least one corpus");
      if (!stats_manifests.empty() && stats_manifests.size() != paths.size()) {
        throw ConfigError("give one manifest per corpus or none");
      }
      const auto fmts = parse_formats(formats);
      std::optional<BpeModel> bpe;
      if (!stats_tokenizer.empty()) bpe = load_bpe(stats_tokenizer);
      std::vector<std::pair<std::string, CorpusStats>> rows;
      for (std::size_t i = 0; i < paths.size(); ++i) {
        auto in = stats_in;
        if (i > 0 || stats_in.path.empty()) in.label.clear();
        const auto corpus = in.load(paths[i]).corpus;
        std::optional<Corpus> test;
        if (!stats_manifests.empty()) test = select(corpus, load_manifest(stats_manifests[i])->test);
        const Corpus* tp = test ? &*test : nullptr;
        rows.emplace_back(corpus.label, bpe ? stats(corpus, BpeTokenizer{&*bpe}, tp) : stats(corpus, WordTokenizer{}, tp));
      }
      emit_all(stats_table(rows), fmts, out, "stats");
    };
  }

  // split ----------------------------------------------------------------
  CorpusInput split_in;
  SplitSpec split_spec;
  std::string split_unit = "admission";
  {
    auto& c = command("split", "deterministic train/val/test split");
    split_in.add(c);
    c.option("train-frac", split_spec.train_frac, "training fraction");
    c.option("val-frac", split_spec.val_frac, "validation fraction");
    c.option("test-frac", split_spec.test_frac, "test fraction");
    c.option("unit", split_unit, "split unit: admission or document")->check(CLI::IsMember({"admission", "document"}));
    actions[c.app] = [&](const fs::path& out) {
      split_spec.unit = split_unit == "document" ? SplitUnit::document : SplitUnit::admission;
      split_spec.seed = derive_seed(seed, "split");
      validate(split_spec);
      const auto corpus = split_in.load().corpus;
      const auto s = split(corpus, split_spec);
      write_text(out / "split.json", SplitManifest::from(s).to_json().dump(2) + "\n");
      std::cout << "train " << s.train.documents.size() << ", val " << s.val.documents.size() << ", test "
                << s.test.documents.size() << '\n';
    };
  }

  // tok-train ------------------------------------------------------------
  CorpusInput tok_in;
  std::string tok_manifest;
  std::size_t tok_vocab = 2000;
  std::size_t tok_min_pair = 2;
  const auto train_tokenizer = [&](const Corpus& train) {
    if (tok_vocab < 257) throw ConfigError("vocab-size must be at least 257");
    BpeTrainOptions opt;
    opt.min_pair_count = tok_min_pair;
    const auto texts = texts_of(train);
    return bpe_train(texts, tok_vocab, opt);
  };
  {
    auto& c = command("tok-train", "train a byte-level BPE tokenizer on the training split");
    tok_in.add(c);
    c.option("manifest", tok_manifest, "split manifest (train part is used)");
    c.option("vocab-size", tok_vocab, "target vocabulary size (>= 257)");
    c.option("min-pair-count", tok_min_pair, "stop when the best pair occurs fewer times than this");
    actions[c.app] = [&](const fs::path& out) {
      const auto corpus = tok_in.load().corpus;
      const auto bpe = train_tokenizer(part_of(corpus, load_manifest(tok_manifest), "train"));
      save_bpe(bpe, out / "tokenizer.json");
      std::cout << "vocabulary " << bpe.vocab().size() << ", fingerprint " << to_hex(bpe.fingerprint()) << '\n';
    };
  }

  // lm-train -------------------------------------------------------------
  CorpusInput lm_in;
  std::string lm_manifest, lm_tokenizer;
  std::size_t lm_order = 3;
  std::vector<double> lm_discount;
  {
    auto& c = command("lm-train", "fit a modified Kneser-Ney n-gram model on the training split");
    lm_in.add(c);
    c.option("manifest", lm_manifest, "split manifest (train part is used)");
    c.option("tokenizer", lm_tokenizer, "BPE tokenizer file; trained on the split when omitted");
    c.option("vocab-size", tok_vocab, "BPE vocabulary size when training a tokenizer");
    c.option("min-pair-count", tok_min_pair, "BPE stopping count when training a tokenizer");
    c.option("order", lm_order, "n-gram order")->check(CLI::Range(1, 10));
    c.option("discount", lm_discount, "fixed discounts D1,D2,D3+ for every order (default: estimated)");
    actions[c.app] = [&](const fs::path& out) {
      if (!lm_discount.empty() && lm_discount.size() != 3) throw ConfigError("--discount takes exactly 3 values");
      const auto corpus = lm_in.load().corpus;
      const auto train = part_of(corpus, load_manifest(lm_manifest), "train");
      BpeModel bpe;
      if (lm_tokenizer.empty()) {
        bpe = train_tokenizer(train);
        save_bpe(bpe, out / "tokenizer.json");
      } else {
        bpe = load_bpe(lm_tokenizer);
      }
      DiscountParams dp;
      if (!lm_discount.empty()) dp.per_order.assign(lm_order, {lm_discount[0], lm_discount[1], lm_discount[2]});
      const auto docs = encode_corpus(bpe, train);
      const auto stream = concat_documents(docs, static_cast<TokenId>(bpe.vocab().size()));
      auto model = NgramModel::fit(stream, bpe.vocab().size(), lm_order, dp);
      model.set_tokenizer_fingerprint(bpe.fingerprint());
      save_model(model, out / "model.json");
      std::cout << "trained order-" << lm_order << " model on " << stream.size() << " tokens\n";
    };
  }

  // lm-eval --------------------------------------------------------------
  CorpusInput ev_in;
  std::string ev_manifest, ev_model, ev_tokenizer, ev_label;
  std::vector<std::string> ev_splits{"val", "test"}, ev_holdout, ev_streams;
  EvalWindowSpec ev_window;
  bool ev_emit = false;
  {
    auto& c = command("lm-eval", "strided-window cross-entropy and perplexity");
    ev_in.add(c, false);
    c.option("manifest", ev_manifest, "split manifest; without one the whole corpus is scored as 'test'");
    c.option("splits", ev_splits, "manifest parts to score");
    c.option("holdout", ev_holdout, "extra corpora to score (JSONL)");
    c.option("model", ev_model, "n-gram model file");
    c.option("tokenizer", ev_tokenizer, "BPE tokenizer file used to train the model");
    c.option("window", ev_window.window, "window size W");
    c.option("stride", ev_window.stride, "stride S (<= W); each window scores its last S tokens");
    c.flag("emit-stream", ev_emit, "also write per-token log-probabilities (tlp-v1)");
    c.option("from-stream", ev_streams, "score tlp-v1 files instead of running a model");
    c.option("eval-label", ev_label, "row label for report tables (default: corpus label)");
    c.option("formats", formats, "output formats");
    actions[c.app] = [&](const fs::path& out) {
      ev_window.validate();
      const auto fmts = parse_formats(formats);
      std::vector<std::pair<std::string, EntropyReport>> reports;
      std::string label = ev_label;
      if (!ev_streams.empty()) {
        for (const auto& p : ev_streams) {
          const auto s = read_tlp(fs::path(p));
          reports.emplace_back(s.source_label.empty() ? stem_of(p) : s.source_label, cross_entropy_from_stream(s));
        }
        if (label.empty()) label = stem_of(ev_streams.front());
      } else {
        if (ev_model.empty() || ev_tokenizer.empty()) throw ConfigError("lm-eval needs --model and --tokenizer (or --from-stream)");
        if (ev_in.path.empty()) throw ConfigError("lm-eval needs --corpus");
        const auto model = load_model(ev_model);
        const auto bpe = load_bpe(ev_tokenizer);
        if (model.tokenizer_fingerprint() != bpe.fingerprint() || model.vocab_size() != bpe.vocab().size()) {
          throw ConfigError("tokenizer " + to_hex(bpe.fingerprint()) + " does not match the model's tokenizer " +
                            to_hex(model.tokenizer_fingerprint()));
        }
        const auto corpus = ev_in.load().corpus;
        if (label.empty()) label = corpus.label;
        const auto manifest = load_manifest(ev_manifest);
        std::vector<std::pair<std::string, Corpus>> targets;
        if (manifest) {
          for (const auto& s : ev_splits) targets.emplace_back(s, select(corpus, manifest->part(s)));
        } else {
          targets.emplace_back("test", corpus);
        }
        for (const auto& h : ev_holdout) {
          auto in = ev_in;
          in.label.clear();
          in.format = "auto";
          auto hc = in.load(h).corpus;
          targets.emplace_back("holdout:" + hc.label, std::move(hc));
        }
        for (const auto& [name, part] : targets) {
          if (part.documents.empty()) {
            warn("split '" + name + "' is empty; skipped");
            continue;
          }
          const auto stream = concat_documents(encode_corpus(bpe, part), model.boundary());
          auto tlp = score_stream(model, stream, ev_window);
          tlp.source_label = name;
          tlp.tokenizer = to_hex(bpe.fingerprint());
          auto rep = cross_entropy_from_stream(tlp);
          rep.upper_bound_bits = entropy_upper_bound(model.num_symbols());
          if (ev_emit) {
            std::string file = name;
            std::replace(file.begin(), file.end(), ':', '_');
            write_tlp(tlp, out / ("stream_" + file + ".tlp.jsonl"));
          }
          reports.emplace_back(name, rep);
        }
      }
      json j{{"label", label}, {"reports", json::object()}};
      for (const auto& [name, r] : reports) j["reports"][name] = r.to_json();
      write_text(out / "eval.json", j.dump(2) + "\n");
      emit_all(entropy_table(reports), fmts, out, "entropy");
      for (const auto& [name, r] : reports) {
        std::cout << name << ": " << format_fixed(r.cross_entropy_bits, 3) << " bits/token, PPL "
                  << format_fixed(r.perplexity, 2) << '\n';
      }
    };
  }

  // pairwise -------------------------------------------------------------
  CorpusInput pw_in;
  std::string pw_manifest, pw_split = "test", pw_provider = "charngram", pw_embeddings;
  std::vector<std::string> pw_metrics{"gestalt", "rouge1", "rougeL", "embed"};
  std::size_t pw_dim = 256, pw_baseline_pairs = 1000;
  {
    auto& c = command("pairwise", "score successive notes of each (admission, note type) sequence");
    pw_in.add(c);
    c.option("manifest", pw_manifest, "split manifest; restricts scoring to one part");
    c.option("split", pw_split, "manifest part to score");
    c.option("metrics", pw_metrics, "metrics: gestalt, rouge1, rougeL, embed");
    c.option("provider", pw_provider, "embedding provider: charngram or external")
        ->check(CLI::IsMember({"charngram", "external"}));
    c.option("embeddings", pw_embeddings, "REMB1 file for the external provider");
    c.option("embed-dim", pw_dim, "character n-gram embedding dimension");
    c.option("baseline-pairs", pw_baseline_pairs, "random cross-admission pairs for rescaling (0 = no rescaling)");
    actions[c.app] = [&](const fs::path& out) {
      MetricConfig cfg;
      cfg.gestalt = cfg.rouge1 = cfg.rougeL = false;
      bool embed = false;
      for (const auto& m : pw_metrics) {
        if (m == "gestalt") cfg.gestalt = true;
        else if (m == "rouge1") cfg.rouge1 = true;
        else if (m == "rougeL") cfg.rougeL = true;
        else if (m == "embed") embed = true;
        else throw ConfigError("unknown metric '" + m + "'");
      }
      std::unique_ptr<EmbeddingProvider> provider;
      if (embed) {
        if (pw_provider == "external") {
          if (pw_embeddings.empty()) throw ConfigError("the external provider needs --embeddings");
          provider = std::make_unique<ExternalEmbeddingProvider>(ExternalEmbeddingProvider::load(pw_embeddings));
        } else {
          provider = std::make_unique<CharNgramProvider>(2, 4, pw_dim);
        }
      }
      const auto full = pw_in.load().corpus;
      const auto corpus = part_of(full, load_manifest(pw_manifest), pw_split);
      const auto sequences = group_sequences(corpus);
      const bool any = std::any_of(sequences.begin(), sequences.end(), [](const auto& s) { return s.docs.size() >= 2; });
      std::vector<PairRecord> records;
      if (!any) {
        warn("no note sequence has two or more notes; writing empty outputs");
      } else {
        if (provider) {
          cfg.provider = provider.get();
          if (pw_baseline_pairs > 0) {
            cfg.baseline = estimate_baseline(corpus, *provider, pw_baseline_pairs, derive_seed(seed, "baseline"));
            write_text(out / "baseline.json",
                       json{{"b", cfg.baseline->b}, {"n_pairs", cfg.baseline->n_pairs},
                            {"provider", provider->label()}}.dump(2) + "\n");
          }
        }
        records = pairwise_scores(sequences, cfg);
      }
      std::ofstream f(out / "pairs.csv", std::ios::binary);
      if (!f) throw IoError("cannot write " + (out / "pairs.csv").string());
      write_pair_records(records, f);
      std::cout << "scored " << records.size() << " note pairs\n";
    };
  }

  // aggregate ------------------------------------------------------------
  std::string ag_pairs, ag_pooling = "pooled", ag_key = "rouge1_f1";
  std::size_t ag_top = 0;
  {
    auto& c = command("aggregate", "per-note-type medians of the pair scores");
    c.option("pairs", ag_pairs, "pair-record CSV from pairwise")->required();
    c.option("pooling", ag_pooling, "pooled or per-admission")->check(CLI::IsMember({"pooled", "per-admission"}));
    c.option("top-k", ag_top, "keep the k types with the highest key median (0 = all)");
    c.option("key", ag_key, "ranking component for --top-k");
    c.option("formats", formats, "output formats");
    actions[c.app] = [&](const fs::path& out) {
      const auto key = parse_component(ag_key);
      const auto fmts = parse_formats(formats);
      std::ifstream in(ag_pairs, std::ios::binary);
      if (!in) throw IoError("cannot open " + ag_pairs);
      const auto records = read_pair_records(in);
      if (records.empty()) warn("no pair records; writing empty outputs");
      auto aggs = aggregate_per_type(records, ag_pooling == "per-admission" ? Pooling::per_admission : Pooling::pooled);
      if (ag_top > 0) aggs = top_types(std::move(aggs), ag_top, key);
      emit_all(aggregate_table(aggs), fmts, out, "aggregates");
      write_text(out / "per_type_long.csv", emit(per_type_long(aggs), Format::csv));
    };
  }

  // summarize ------------------------------------------------------------
  std::vector<std::string> sm_pairs, sm_labels;
  {
    auto& c = command("summarize", "token-weighted corpus averages of the pair scores");
    c.option("pairs", sm_pairs, "pair-record CSV files, one row each")->required();
    c.option("labels", sm_labels, "row labels (default: file stems)");
    c.option("formats", formats, "output formats");
    actions[c.app] = [&](const fs::path& out) {
      if (!sm_labels.empty() && sm_labels.size() != sm_pairs.size()) throw ConfigError("give one label per pairs file");
      const auto fmts = parse_formats(formats);
      std::vector<std::pair<std::string, CorpusSummary>> rows;
      for (std::size_t i = 0; i < sm_pairs.size(); ++i) {
        std::ifstream in(sm_pairs[i], std::ios::binary);
        if (!in) throw IoError("cannot open " + sm_pairs[i]);
        const auto records = read_pair_records(in);
        const auto label = sm_labels.empty() ? stem_of(sm_pairs[i]) : sm_labels[i];
        if (records.empty()) {
          warn("'" + label + "' has no pair records; row omitted");
          continue;
        }
        rows.emplace_back(label, weighted_summary(records));
      }
      emit_all(summary_table(rows), fmts, out, "summary");
    };
  }

  // synth ----------------------------------------------------------------
  std::string sy_kind = "redundancy", sy_plan, sy_transitions;
  std::vector<double> sy_r{0.0, 0.5, 0.9};
  std::size_t sy_notes = 5, sy_tokens = 100, sy_adm = 20, sy_vocab = 1'000'000;
  double sy_stay = 0.9;
  std::size_t sy_iid = 0, sy_n = 100'000, sy_doc_tokens = 1000;
  {
    auto& c = command("synth", "write a synthetic corpus with known redundancy or entropy");
    c.option("kind", sy_kind, "redundancy or markov")->check(CLI::IsMember({"redundancy", "markov"}));
    c.option("plan", sy_plan, "redundancy plan JSON (overrides the shorthand options)");
    c.option("redundancy", sy_r, "one note type per redundancy level");
    c.option("notes", sy_notes, "notes per admission and type");
    c.option("tokens", sy_tokens, "tokens per note");
    c.option("admissions", sy_adm, "number of admissions");
    c.option("vocab-size", sy_vocab, "fresh-token pool size");
    c.option("p-stay", sy_stay, "two-state Markov source: probability of staying");
    c.option("iid-symbols", sy_iid, "uniform iid source over this many symbols (overrides --p-stay)");
    c.option("transitions", sy_transitions, "JSON transition matrix (overrides --p-stay and --iid-symbols)");
    c.option("n-tokens", sy_n, "Markov stream length");
    c.option("doc-tokens", sy_doc_tokens, "Markov tokens per document");
    actions[c.app] = [&](const fs::path& out) {
      const auto synth_seed = derive_seed(seed, "synth");
      Corpus corpus;
      if (sy_kind == "redundancy") {
        RedundancyPlan plan;
        if (!sy_plan.empty()) {
          const auto j = read_json(sy_plan);
          try {
            for (const auto& t : j.at("note_types")) {
              plan.note_types.push_back({t.at("label").get<std::string>(), t.at("redundancy").get<double>(),
                                         t.at("notes_per_admission").get<std::size_t>(),
                                         t.at("tokens_per_note").get<std::size_t>()});
            }
            plan.n_admissions = j.at("n_admissions").get<std::size_t>();
            plan.vocab_size = j.value("vocab_size", plan.vocab_size);
          } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed plan: ") + e.what());
          }
        } else {
          for (double r : sy_r) plan.note_types.push_back({"r" + format_fixed(r, 2), r, sy_notes, sy_tokens});
          plan.n_admissions = sy_adm;
          plan.vocab_size = sy_vocab;
        }
        plan.seed = synth_seed;
        corpus = generate_redundant_corpus(plan);
      } else {
        std::optional<MarkovSource> src;
        if (!sy_transitions.empty()) {
          const auto j = read_json(sy_transitions);
          try {
            src.emplace(j.get<std::vector<std::vector<double>>>());
          } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed transition matrix: ") + e.what());
          }
        } else if (sy_iid > 0) {
          src.emplace(MarkovSource::uniform_iid(sy_iid));
        } else {
          src.emplace(MarkovSource::two_state(sy_stay));
        }
        if (sy_doc_tokens < 1) throw ConfigError("doc-tokens must be >= 1");
        const auto sample = generate_markov_stream(*src, sy_n, synth_seed);
        corpus.label = "markov";
        char id[32];
        for (std::size_t i = 0; i < sample.tokens.size(); i += sy_doc_tokens) {
          std::string text;
          for (auto k = i; k < std::min(i + sy_doc_tokens, sample.tokens.size()); ++k) {
            if (k > i) text.push_back(' ');
            text += "s" + std::to_string(sample.tokens[k]);
          }
          std::snprintf(id, sizeof id, "markov-%06zu", i / sy_doc_tokens);
          corpus.documents.push_back({id, "markov", "markov", Timestamp{static_cast<std::int64_t>(i)}, std::move(text), std::nullopt});
        }
        write_text(out / "markov.json", json{{"entropy_rate_bits", src->entropy_rate()},
                                             {"stationary", src->stationary()},
                                             {"transitions", src->transitions()},
                                             {"n_tokens", sy_n}}.dump(2) + "\n");
      }
      std::ofstream f(out / "corpus.jsonl", std::ios::binary);
      if (!f) throw IoError("cannot write " + (out / "corpus.jsonl").string());
      write_jsonl(corpus, f);
      std::cout << "wrote " << corpus.documents.size() << " documents\n";
    };
  }

  // report ---------------------------------------------------------------
  std::string rp_kind = "ppl-table", rp_reference, rp_holdout = "holdout";
  std::vector<std::string> rp_evals;
  {
    auto& c = command("report", "perplexity table or cross-corpus matrix from lm-eval outputs");
    c.option("kind", rp_kind, "ppl-table or cross-matrix")->check(CLI::IsMember({"ppl-table", "cross-matrix"}));
    c.option("eval", rp_evals, "eval.json files from lm-eval")->required();
    c.option("reference", rp_reference, "reference row for the efficiency-ratio footer");
    c.option("holdout-name", rp_holdout, "column name for holdout perplexities");
    c.option("formats", formats, "output formats");
    actions[c.app] = [&](const fs::path& out) {
      const auto fmts = parse_formats(formats);
      struct Loaded {
        std::string label;
        std::map<std::string, EntropyReport> reports;
      };
      std::vector<Loaded> loaded;
      for (const auto& p : rp_evals) {
        const auto j = read_json(p);
        Loaded l;
        try {
          l.label = j.at("label").get<std::string>();
          for (const auto& [name, r] : j.at("reports").items()) {
            EntropyReport rep;
            rep.cross_entropy_bits = r.at("cross_entropy_bits").get<double>();
            rep.perplexity = r.at("perplexity").get<double>();
            rep.n_scored_tokens = r.at("n_scored_tokens").get<std::size_t>();
            l.reports.emplace(name, rep);
          }
        } catch (const json::exception& e) {
          throw ParseError(p + ": malformed eval file: " + e.what());
        }
        loaded.push_back(std::move(l));
      }
      if (rp_kind == "ppl-table") {
        std::vector<PplEntry> entries;
        for (const auto& l : loaded) {
          const auto get = [&l](const std::string& k) -> std::optional<EntropyReport> {
            const auto it = l.reports.find(k);
            return it == l.reports.end() ? std::nullopt : std::optional(it->second);
          };
          const auto test = get("test");
          if (!test) throw Error(l.label + ": eval file has no 'test' report");
          std::optional<EntropyReport> holdout;
          for (const auto& [k, r] : l.reports) {
            if (k.starts_with("holdout:")) {
              holdout = r;
              break;
            }
          }
          entries.push_back(PplEntry::from(l.label, get("val"), *test, holdout));
        }
        const auto t = build_ppl_table(std::move(entries),
                                       rp_reference.empty() ? std::nullopt : std::optional(rp_reference), rp_holdout);
        emit_all(t.to_table(), fmts, out, "ppl_table");
        if (auto f = t.footer()) std::cout << *f << '\n';
      } else {
        std::vector<CrossEntry> entries;
        for (const auto& l : loaded) {
          if (const auto it = l.reports.find("test"); it != l.reports.end()) {
            entries.push_back({l.label, l.label, it->second.perplexity});
          }
          for (const auto& [k, r] : l.reports) {
            if (k.starts_with("holdout:")) entries.push_back({l.label, k.substr(8), r.perplexity});
          }
        }
        emit_all(build_cross_matrix(entries).to_table(), fmts, out, "cross_matrix");
      }
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (const auto& c : commands) {
      if (!c->app->parsed()) continue;
      const auto out = prepare_out(out_dir);
      const json resolved{{"seed", seed}, {c->app->get_name(), c->to_json()}};
      write_text(out / "resolved_config.json", resolved.dump(2) + "\n");
      actions.at(c->app)(out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
