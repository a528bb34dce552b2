#ifndef REDNOTE_LM_HPP
#define REDNOTE_LM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rednote/bpe.hpp"
#include "rednote/common.hpp"

namespace rednote {

/// Concatenates tokenized documents into one evaluation/training stream:
/// a boundary token opens the stream and follows every document.
inline std::vector<TokenId> concat_documents(
    std::span<const std::vector<TokenId>> documents, TokenId boundary) {
  std::vector<TokenId> stream{boundary};
  for (const auto& doc : documents) {
    stream.insert(stream.end(), doc.begin(), doc.end());
    stream.push_back(boundary);
  }
  return stream;
}

/// Absolute discounts (D1, D2, D3+) for one n-gram order.
using Discounts = std::array<double, 3>;

/// Explicit discounts, one triple per order starting at unigrams. Empty
/// means "estimate from count-of-count statistics".
struct DiscountParams {
  std::vector<Discounts> per_order;
};

/// Interpolated modified Kneser-Ney n-gram model over a tokenizer
/// vocabulary of size V plus one reserved boundary symbol (id V).
///
/// Contexts never cross a boundary token: a context is cut just before
/// its last boundary, so the boundary acts as the sentence-start marker.
/// N-grams that begin with the boundary cannot be extended to the left and
/// keep raw counts; every other lower-order n-gram uses continuation
/// counts. The base distribution is uniform over all V+1 symbols, so every
/// conditional probability is strictly positive.
class NgramModel {
 public:
  static constexpr std::string_view kFormat = "ngram-v1";

  /// Fits on a stream produced by concat_documents (stream[0] must be the
  /// boundary id, which equals vocab_size).
  static NgramModel fit(std::span<const TokenId> stream, std::size_t vocab_size,
                        std::size_t order, const DiscountParams& discounts = {}) {
    if (order < 1) throw ConfigError("n-gram order must be at least 1");
    if (stream.size() < 2) throw Error("cannot fit a language model on an empty stream");
    const auto boundary = static_cast<TokenId>(vocab_size);
    if (stream[0] != boundary) {
      throw Error("training stream must start with the boundary token");
    }
    NgramModel m(vocab_size, order);
    std::u32string gram;
    for (std::size_t i = 1; i < stream.size(); ++i) {
      if (stream[i] > boundary) {
        throw Error("token id " + std::to_string(stream[i]) + " outside vocabulary");
      }
      m.context_of(stream.subspan(0, i), gram);
      gram.push_back(static_cast<char32_t>(stream[i]));
      ++m.counts_[gram.size() - 1][gram];
    }
    m.finalize(discounts);
    return m;
  }

  std::size_t order() const noexcept { return order_; }
  /// Tokenizer vocabulary size V (excluding the boundary symbol).
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  /// V + 1: every symbol the model assigns probability to.
  std::size_t num_symbols() const noexcept { return vocab_size_ + 1; }
  TokenId boundary() const noexcept { return static_cast<TokenId>(vocab_size_); }
  const Discounts& discounts(std::size_t m) const { return discounts_.at(m - 1); }

  /// Fingerprint of the tokenizer the model was trained with (0 = unset).
  std::uint64_t tokenizer_fingerprint() const noexcept { return tokenizer_fp_; }
  void set_tokenizer_fingerprint(std::uint64_t fp) noexcept { tokenizer_fp_ = fp; }

  /// Smoothed conditional probability p(token | context). Only the last
  /// order-1 context tokens (cut at the last boundary) matter.
  double prob(TokenId token, std::span<const TokenId> context) const {
    if (token > boundary()) {
      throw Error("token id " + std::to_string(token) + " outside vocabulary of size " +
                  std::to_string(num_symbols()));
    }
    std::u32string hist;
    context_of(context, hist);
    double p = 1.0 / static_cast<double>(num_symbols());
    std::u32string key;
    for (std::size_t m = 1; m <= hist.size() + 1; ++m) {
      key.assign(hist, hist.size() - (m - 1), m - 1);
      const auto& ctx_table = contexts_[m - 1];
      const auto it = ctx_table.find(key);
      if (it == ctx_table.end()) continue;
      const auto& st = it->second;
      key.push_back(static_cast<char32_t>(token));
      const auto c = lookup(m, key);
      const auto& d = discounts_[m - 1];
      const double discounted =
          c == 0 ? 0.0 : std::max(0.0, static_cast<double>(c) - d[std::min<std::uint64_t>(c, 3) - 1]);
      const double backoff_mass = d[0] * static_cast<double>(st.n1) +
                                  d[1] * static_cast<double>(st.n2) +
                                  d[2] * static_cast<double>(st.n3p);
      p = (discounted + backoff_mass * p) / static_cast<double>(st.total);
    }
    return p;
  }

  /// log2 p(token | context); always finite.
  double log_prob(TokenId token, std::span<const TokenId> context) const {
    return std::log2(prob(token, context));
  }

  nlohmann::json to_json() const {
    std::vector<std::pair<std::u32string, std::uint64_t>> raw;
    for (std::size_t m = 1; m <= order_; ++m) {
      for (const auto& [g, c] : counts_[m - 1]) {
        if (m == order_ || (m >= 2 && g[0] == static_cast<char32_t>(boundary()))) {
          raw.emplace_back(g, c);
        }
      }
    }
    std::sort(raw.begin(), raw.end());
    nlohmann::json events = nlohmann::json::array();
    for (const auto& [g, c] : raw) {
      nlohmann::json e = nlohmann::json::array();
      for (char32_t t : g) e.push_back(static_cast<std::uint32_t>(t));
      e.push_back(c);
      events.push_back(std::move(e));
    }
    nlohmann::json disc = nlohmann::json::array();
    for (const auto& d : discounts_) disc.push_back(d);
    return {{"format", kFormat},
            {"order", order_},
            {"vocab_size", vocab_size_},
            {"tokenizer", to_hex(tokenizer_fp_)},
            {"discounts", disc},
            {"events", events}};
  }

  static NgramModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != kFormat) {
        throw ParseError("unsupported model format");
      }
      NgramModel m(j.at("vocab_size").get<std::size_t>(), j.at("order").get<std::size_t>());
      if (m.order_ < 1) throw ParseError("model order must be at least 1");
      m.tokenizer_fp_ = std::stoull(j.at("tokenizer").get<std::string>(), nullptr, 16);
      DiscountParams dp;
      j.at("discounts").get_to(dp.per_order);
      std::size_t idx = 0;
      for (const auto& e : j.at("events")) {
        if (!e.is_array() || e.size() < 2 || e.size() > m.order_ + 1) {
          throw ParseError("malformed event #" + std::to_string(idx), idx);
        }
        std::u32string g;
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
          const auto t = e[i].get<std::uint32_t>();
          if (t > m.boundary()) throw ParseError("event token outside vocabulary", idx);
          g.push_back(static_cast<char32_t>(t));
        }
        m.counts_[g.size() - 1][g] += e.back().get<std::uint64_t>();
        ++idx;
      }
      m.finalize(dp);
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed model file: ") + e.what());
    }
  }

 private:
  struct ContextStats {
    std::uint64_t total = 0;
    std::uint64_t n1 = 0, n2 = 0, n3p = 0;
  };

  NgramModel(std::size_t vocab_size, std::size_t order)
      : vocab_size_(vocab_size), order_(order), counts_(order), contexts_(order), discounts_(order) {}

  /// Effective history: last order-1 tokens, cut at the last boundary.
  void context_of(std::span<const TokenId> context, std::u32string& out) const {
    out.clear();
    const auto take = std::min(context.size(), order_ - 1);
    auto first = context.size() - take;
    for (auto i = context.size(); i > first; --i) {
      if (context[i - 1] == boundary()) {
        first = i - 1;
        break;
      }
    }
    for (auto i = first; i < context.size(); ++i) out.push_back(static_cast<char32_t>(context[i]));
  }

  std::uint64_t lookup(std::size_t m, const std::u32string& gram) const {
    const auto it = counts_[m - 1].find(gram);
    return it == counts_[m - 1].end() ? 0 : it->second;
  }

  void finalize(const DiscountParams& params) {
    for (std::size_t m = order_ - 1; m >= 1; --m) {
      for (const auto& [g, c] : counts_[m]) ++counts_[m - 1][g.substr(1)];
    }
    for (std::size_t m = 1; m <= order_; ++m) {
      auto& ctx = contexts_[m - 1];
      std::array<std::uint64_t, 4> coc{};
      for (const auto& [g, c] : counts_[m - 1]) {
        auto& st = ctx[g.substr(0, m - 1)];
        st.total += c;
        (c == 1 ? st.n1 : c == 2 ? st.n2 : st.n3p) += 1;
        if (c <= 4) ++coc[c - 1];
      }
      if (params.per_order.empty()) {
        discounts_[m - 1] = estimate_discounts(coc);
      } else {
        if (params.per_order.size() != order_) {
          throw ConfigError("expected " + std::to_string(order_) + " discount triples");
        }
        discounts_[m - 1] = params.per_order[m - 1];
      }
      for (int j = 0; j < 3; ++j) {
        const double d = discounts_[m - 1][j];
        if (!(d >= 0.0 && d <= j + 1.0)) {
          throw ConfigError("discount D" + std::to_string(j + 1) + " for order " +
                            std::to_string(m) + " must lie in [0, " + std::to_string(j + 1) + "]");
        }
      }
    }
  }

  /// Chen & Goodman estimates from the counts-of-counts n1..n4, clamped to
  /// [0, j]. Undefined estimates fall back to j/2.
  static Discounts estimate_discounts(const std::array<std::uint64_t, 4>& n) {
    Discounts d{0.5, 1.0, 1.5};
    if (n[0] == 0 || n[1] == 0) return d;
    const double y = static_cast<double>(n[0]) / static_cast<double>(n[0] + 2 * n[1]);
    for (int j = 1; j <= 3; ++j) {
      if (n[j - 1] == 0) continue;
      const double est = j - (j + 1) * y * static_cast<double>(n[j]) / static_cast<double>(n[j - 1]);
      d[j - 1] = std::clamp(est, 0.0, static_cast<double>(j));
    }
    return d;
  }

  std::size_t vocab_size_;
  std::size_t order_;
  std::uint64_t tokenizer_fp_ = 0;
  // counts_[m-1]: order-m grams; raw counts at the top order and for
  // boundary-initial grams, continuation counts otherwise.
  std::vector<std::unordered_map<std::u32string, std::uint64_t>> counts_;
  std::vector<std::unordered_map<std::u32string, ContextStats>> contexts_;
  std::vector<Discounts> discounts_;
};

inline NgramModel fit(std::span<const TokenId> stream, std::size_t vocab_size,
                      std::size_t order, const DiscountParams& discounts = {}) {
  return NgramModel::fit(stream, vocab_size, order, discounts);
}

inline void save_model(const NgramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << model.to_json().dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

inline NgramModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed model file at byte " + std::to_string(e.byte), e.byte);
  }
  return NgramModel::from_json(j);
}

// ---------------------------------------------------------------------------
// Entropy / perplexity

/// Sliding evaluation window: W tokens of which the final S are scored.
struct EvalWindowSpec {
  std::size_t window = 768;
  std::size_t stride = 384;

  void validate() const {
    if (stride < 1 || window < 1 || stride > window) {
      throw ConfigError("window spec requires 1 <= stride <= window (got window=" +
                        std::to_string(window) + ", stride=" + std::to_string(stride) + ")");
    }
  }
};

/// One evaluation window: tokens [begin, end) are visible, positions
/// [score_begin, end) are scored.
struct EvalWindow {
  std::size_t begin;
  std::size_t score_begin;
  std::size_t end;
};

/// Strided schedule over a stream of n tokens. Windows start every S
/// tokens; each scores only the tokens not scored by its predecessor, so
/// positions 1..n-1 are scored exactly once (position 0 has no context).
inline std::vector<EvalWindow> strided_windows(std::size_t n, const EvalWindowSpec& spec) {
  spec.validate();
  std::vector<EvalWindow> windows;
  std::size_t prev_end = 0;
  for (std::size_t begin = 0; begin < n; begin += spec.stride) {
    const auto end = std::min(begin + spec.window, n);
    const auto score_begin = std::max<std::size_t>(prev_end, 1);
    if (score_begin < end) windows.push_back({begin, score_begin, end});
    prev_end = end;
    if (end == n) break;
  }
  return windows;
}

struct EntropyReport {
  double cross_entropy_bits = 0.0;
  double perplexity = 1.0;
  std::size_t n_scored_tokens = 0;
  /// log2 |V| when the scoring vocabulary is known.
  std::optional<double> upper_bound_bits;

  nlohmann::json to_json() const {
    nlohmann::json j{{"cross_entropy_bits", cross_entropy_bits},
                     {"perplexity", perplexity},
                     {"n_scored_tokens", n_scored_tokens}};
    j["upper_bound_bits"] = upper_bound_bits ? nlohmann::json(*upper_bound_bits) : nlohmann::json();
    return j;
  }
};

/// Per-token base-2 log probabilities, the interchange format between the
/// core and external scorers.
struct TokenLogProb {
  std::int64_t pos;
  std::uint32_t tid;
  double lp2;
};

struct TokenLogProbStream {
  static constexpr std::string_view kFormat = "tlp-v1";
  std::string source_label;
  std::string tokenizer;
  /// PPL the producer computed itself, when it reports one.
  std::optional<double> reported_ppl;
  std::vector<TokenLogProb> records;
};

inline double entropy_upper_bound(std::size_t vocab_size) {
  if (vocab_size < 1) throw Error("vocabulary must contain at least one symbol");
  return std::log2(static_cast<double>(vocab_size));
}

inline double ppl_to_bits(double ppl) {
  if (!(ppl >= 1.0) || !std::isfinite(ppl)) {
    throw Error("perplexity must be a finite value >= 1 (got " + format_fixed(ppl, 6) + ")");
  }
  return std::log2(ppl);
}

/// How many times more bits per token the reference language spends than
/// the target: reference_bits / target_bits.
inline double efficiency_ratio(double bits_reference, double bits_target) {
  if (!(bits_reference > 0.0) || !(bits_target > 0.0)) {
    throw Error("efficiency ratio needs strictly positive bit rates");
  }
  return bits_reference / bits_target;
}

/// Averages the records of a stream. Fails on an empty stream or any
/// non-finite or positive log probability.
inline EntropyReport cross_entropy_from_stream(const TokenLogProbStream& stream) {
  if (stream.records.empty()) throw Error("token log-prob stream is empty");
  CompensatedSum sum;
  for (const auto& r : stream.records) {
    if (!std::isfinite(r.lp2) || r.lp2 > 0.0) {
      throw Error("invalid log probability at position " + std::to_string(r.pos));
    }
    sum.add(r.lp2);
  }
  EntropyReport rep;
  rep.n_scored_tokens = stream.records.size();
  rep.cross_entropy_bits = -sum.value() / static_cast<double>(rep.n_scored_tokens);
  rep.perplexity = std::exp2(rep.cross_entropy_bits);
  return rep;
}

/// Scores a stream with any callable (token, context span) -> log2 prob
/// under the strided window schedule, one record per scored position.
template <typename Scorer>
TokenLogProbStream score_strided(std::span<const TokenId> stream, const EvalWindowSpec& spec,
                                 Scorer&& score) {
  if (stream.size() < 2) throw Error("evaluation stream needs at least 2 tokens");
  TokenLogProbStream out;
  out.records.reserve(stream.size() - 1);
  for (const auto& w : strided_windows(stream.size(), spec)) {
    for (auto p = w.score_begin; p < w.end; ++p) {
      out.records.push_back({static_cast<std::int64_t>(p), stream[p],
                             score(stream[p], stream.subspan(w.begin, p - w.begin))});
    }
  }
  return out;
}

inline TokenLogProbStream score_stream(const NgramModel& model, std::span<const TokenId> stream,
                                       const EvalWindowSpec& spec) {
  auto out = score_strided(stream, spec, [&model](TokenId t, std::span<const TokenId> ctx) {
    return model.log_prob(t, ctx);
  });
  out.reported_ppl = cross_entropy_from_stream(out).perplexity;
  return out;
}

/// Strided-window cross-entropy H(P,Q) of `stream` under `model`.
inline EntropyReport cross_entropy(const NgramModel& model, std::span<const TokenId> stream,
                                   const EvalWindowSpec& spec = {}) {
  auto rep = cross_entropy_from_stream(score_stream(model, stream, spec));
  rep.upper_bound_bits = entropy_upper_bound(model.num_symbols());
  return rep;
}

// ---------------------------------------------------------------------------
// tlp-v1 files: a header object followed by one {"pos","tid","lp2"} per line.

inline void write_tlp(const TokenLogProbStream& s, std::ostream& out) {
  nlohmann::json header{{"format", TokenLogProbStream::kFormat},
                        {"source", s.source_label},
                        {"tokenizer", s.tokenizer}};
  if (s.reported_ppl) header["ppl"] = *s.reported_ppl;
  out << header.dump() << '\n';
  for (const auto& r : s.records) {
    out << nlohmann::json{{"pos", r.pos}, {"tid", r.tid}, {"lp2", r.lp2}}.dump() << '\n';
  }
}

inline TokenLogProbStream read_tlp(std::istream& in) {
  TokenLogProbStream s;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("malformed tlp record on line " + std::to_string(lineno) + ": " + e.what(),
                       lineno);
    }
    if (!j.is_object()) {
      throw ParseError("tlp line " + std::to_string(lineno) + " is not an object", lineno);
    }
    if (!have_header) {
      if (j.value("format", "") != TokenLogProbStream::kFormat) {
        throw ParseError("missing tlp-v1 header on line " + std::to_string(lineno), lineno);
      }
      s.source_label = j.value("source", "");
      s.tokenizer = j.value("tokenizer", "");
      if (const auto it = j.find("ppl"); it != j.end() && it->is_number()) {
        s.reported_ppl = it->get<double>();
      }
      have_header = true;
      continue;
    }
    const auto pos = j.find("pos");
    const auto tid = j.find("tid");
    const auto lp2 = j.find("lp2");
    if (pos == j.end() || !pos->is_number_integer() || tid == j.end() ||
        !tid->is_number_unsigned() || lp2 == j.end() || !lp2->is_number()) {
      throw ParseError("incomplete tlp record on line " + std::to_string(lineno), lineno);
    }
    TokenLogProb r{pos->get<std::int64_t>(), tid->get<std::uint32_t>(), lp2->get<double>()};
    if (!std::isfinite(r.lp2) || r.lp2 > 0.0) {
      throw ParseError("log probability must be finite and <= 0 at position " +
                           std::to_string(r.pos),
                       lineno);
    }
    if (!s.records.empty() && r.pos <= s.records.back().pos) {
      throw ParseError("positions must strictly increase (line " + std::to_string(lineno) + ")",
                       lineno);
    }
    s.records.push_back(r);
  }
  if (!have_header) throw ParseError("empty tlp file");
  return s;
}

inline TokenLogProbStream read_tlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tlp(in);
}

inline void write_tlp(const TokenLogProbStream& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_tlp(s, out);
}

}  // namespace rednote

#endif  // REDNOTE_LM_HPP
