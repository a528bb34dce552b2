#ifndef REDNOTE_EMBEDDING_HPP
#define REDNOTE_EMBEDDING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rednote/common.hpp"
#include "rednote/corpus.hpp"
#include "rednote/metrics.hpp"
#include "rednote/tokenize.hpp"

namespace rednote {

/// Row-major rows x dim matrix of token vectors.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d) : rows(r), dim(d), data(r * d, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

/// Maps the tokens of one document to one vector per token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  /// `doc_id` identifies the document for providers that serve stored
  /// contextual vectors; others ignore it.
  virtual EmbeddingMatrix embed(std::string_view doc_id,
                                std::span<const std::string> tokens) const = 0;
  virtual std::string label() const = 0;
  virtual std::size_t dim() const = 0;
};

/// Hashed bag of character n-grams of "<token>", L2-normalised. A lexical
/// stand-in for a semantic model: similar spellings score high.
class CharNgramProvider final : public EmbeddingProvider {
 public:
  CharNgramProvider(std::size_t min_n = 2, std::size_t max_n = 4, std::size_t dim = 256)
      : min_n_(min_n), max_n_(max_n), dim_(dim) {
    if (dim < 64) throw ConfigError("character n-gram provider needs dim >= 64");
    if (min_n < 1 || max_n < min_n) throw ConfigError("invalid character n-gram range");
  }

  EmbeddingMatrix embed(std::string_view, std::span<const std::string> tokens) const override {
    EmbeddingMatrix m(tokens.size(), dim_);
    std::vector<std::size_t> starts;
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      const std::string padded = "<" + tokens[r] + ">";
      starts.clear();
      for (std::size_t i = 0; i < padded.size();) {
        starts.push_back(i);
        utf8::next(padded, i);
      }
      starts.push_back(padded.size());
      const auto n_chars = starts.size() - 1;
      auto row = m.row(r);
      const auto add = [&](std::size_t from, std::size_t to) {
        const auto h = fnv1a64(std::string_view(padded).substr(starts[from], starts[to] - starts[from]));
        row[h % dim_] += 1.0f;
      };
      if (n_chars < min_n_) {
        add(0, n_chars);
      } else {
        for (auto n = min_n_; n <= std::min(max_n_, n_chars); ++n) {
          for (std::size_t i = 0; i + n <= n_chars; ++i) add(i, i + n);
        }
      }
      double norm = 0.0;
      for (float v : row) norm += static_cast<double>(v) * v;
      norm = std::sqrt(norm);
      for (float& v : row) v = static_cast<float>(v / norm);
    }
    return m;
  }

  std::string label() const override {
    return "char-ngram(" + std::to_string(min_n_) + "-" + std::to_string(max_n_) + ",d=" +
           std::to_string(dim_) + ")";
  }
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t min_n_, max_n_, dim_;
};

/// One basis vector per listed token; anything else embeds as zero. Cosine
/// similarity reduces to token equality.
class OneHotProvider final : public EmbeddingProvider {
 public:
  explicit OneHotProvider(std::vector<std::string> vocabulary) {
    for (auto& t : vocabulary) index_.try_emplace(std::move(t), index_.size());
    dim_ = std::max<std::size_t>(index_.size(), 1);
  }

  EmbeddingMatrix embed(std::string_view, std::span<const std::string> tokens) const override {
    EmbeddingMatrix m(tokens.size(), dim_);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      if (const auto it = index_.find(tokens[r]); it != index_.end()) m.row(r)[it->second] = 1.0f;
    }
    return m;
  }
  std::string label() const override { return "one-hot"; }
  std::size_t dim() const override { return dim_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 1;
};

// ---------------------------------------------------------------------------
// REMB1: "REMB1", u32 doc_count, u32 dim, then per document a u32-length
// prefixed UTF-8 doc_id, u32 token_count and token_count x dim float32.
// All integers and floats little-endian.

struct EmbeddingFile {
  std::size_t dim = 0;
  std::map<std::string, EmbeddingMatrix> documents;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteCursor {
 public:
  ByteCursor(std::string_view bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32("matrix value");
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("truncated REMB1 file reading ") + what + " at offset " +
                           std::to_string(pos_),
                       pos_);
    }
  }

 private:
  std::string_view bytes_;
  std::size_t pos_;
};

}  // namespace detail

inline std::string encode_remb1(const EmbeddingFile& file) {
  std::string out = "REMB1";
  detail::put_u32(out, static_cast<std::uint32_t>(file.documents.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(file.dim));
  for (const auto& [id, m] : file.documents) {
    if (m.dim != file.dim) throw Error("document '" + id + "' has dimension " + std::to_string(m.dim));
    detail::put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows));
    for (float f : m.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_u32(out, bits);
    }
  }
  return out;
}

inline EmbeddingFile decode_remb1(std::string_view bytes) {
  if (!bytes.starts_with("REMB1")) throw ParseError("bad REMB1 magic at offset 0", 0);
  detail::ByteCursor cur(bytes, 5);
  EmbeddingFile file;
  const auto count = cur.u32("doc_count");
  file.dim = cur.u32("dim");
  if (file.dim == 0) throw ParseError("REMB1 dimension must be positive", 9);
  for (std::uint32_t d = 0; d < count; ++d) {
    const auto id_len = cur.u32("doc_id length");
    std::string id(cur.take(id_len, "doc_id"));
    const auto rows = cur.u32("token_count");
    cur.need(std::uint64_t{rows} * file.dim * 4, "matrix");
    EmbeddingMatrix m(rows, file.dim);
    for (auto& v : m.data) {
      v = cur.f32();
      if (!std::isfinite(v)) {
        throw ParseError("non-finite value in document '" + id + "' at offset " +
                             std::to_string(cur.offset() - 4),
                         cur.offset() - 4);
      }
    }
    if (!file.documents.emplace(id, std::move(m)).second) {
      throw ParseError("duplicate document '" + id + "' in REMB1 file", cur.offset());
    }
  }
  if (!cur.done()) {
    throw ParseError("trailing bytes after last REMB1 document at offset " +
                         std::to_string(cur.offset()),
                     cur.offset());
  }
  return file;
}

inline void write_remb1(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto bytes = encode_remb1(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline EmbeddingFile read_remb1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_remb1(bytes);
}

/// Serves stored contextual vectors keyed by (doc_id, token position).
class ExternalEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit ExternalEmbeddingProvider(EmbeddingFile file, std::string label = "external")
      : file_(std::move(file)), label_(std::move(label)) {}

  /// Loads a REMB1 file; `expected_dim`, when given, must match its header.
  static ExternalEmbeddingProvider load(const std::filesystem::path& path,
                                        std::optional<std::size_t> expected_dim = std::nullopt) {
    auto file = read_remb1(path);
    if (expected_dim && *expected_dim != file.dim) {
      throw Error("embedding dimension mismatch: file has " + std::to_string(file.dim) +
                  ", expected " + std::to_string(*expected_dim));
    }
    return ExternalEmbeddingProvider(std::move(file), "external:" + path.filename().string());
  }

  EmbeddingMatrix embed(std::string_view doc_id, std::span<const std::string> tokens) const override {
    const auto it = file_.documents.find(std::string(doc_id));
    if (it == file_.documents.end()) {
      throw Error("no stored embeddings for document '" + std::string(doc_id) + "'");
    }
    if (it->second.rows != tokens.size()) {
      throw Error("document '" + std::string(doc_id) + "' has " + std::to_string(it->second.rows) +
                  " stored vectors but " + std::to_string(tokens.size()) + " tokens");
    }
    return it->second;
  }
  std::string label() const override { return label_; }
  std::size_t dim() const override { return file_.dim; }

 private:
  EmbeddingFile file_;
  std::string label_;
};

/// Random-pair similarity level used to rescale embedding scores.
struct RescaleBaseline {
  double b = 0.0;
  std::size_t n_pairs = 0;
  std::uint64_t seed = 0;

  double apply(double x) const { return (x - b) / (1.0 - b); }
};

/// Greedy cosine matching: each candidate row takes its best reference
/// row (precision) and vice versa (recall). Zero vectors match nothing.
/// With a baseline every component x becomes (x - b) / (1 - b).
inline Prf embed_score(const EmbeddingMatrix& cand, const EmbeddingMatrix& ref,
                       const std::optional<RescaleBaseline>& baseline = std::nullopt) {
  if (cand.rows == 0 || ref.rows == 0) throw Error("embedding score needs non-empty token lists");
  if (cand.dim != ref.dim) throw Error("embedding dimensions differ");
  const auto norms = [](const EmbeddingMatrix& m) {
    std::vector<double> n(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      double s = 0.0;
      for (float v : m.row(i)) s += static_cast<double>(v) * v;
      n[i] = std::sqrt(s);
    }
    return n;
  };
  const auto nc = norms(cand);
  const auto nr = norms(ref);
  constexpr double kNone = -2.0;  // below any cosine
  std::vector<double> best_c(cand.rows, kNone), best_r(ref.rows, kNone);
  for (std::size_t i = 0; i < cand.rows; ++i) {
    const auto ci = cand.row(i);
    for (std::size_t j = 0; j < ref.rows; ++j) {
      double sim = 0.0;
      if (nc[i] > 0.0 && nr[j] > 0.0) {
        const auto rj = ref.row(j);
        double dot = 0.0;
        for (std::size_t k = 0; k < cand.dim; ++k) dot += static_cast<double>(ci[k]) * rj[k];
        sim = std::clamp(dot / (nc[i] * nr[j]), -1.0, 1.0);
      }
      best_c[i] = std::max(best_c[i], sim);
      best_r[j] = std::max(best_r[j], sim);
    }
  }
  CompensatedSum sp, sr;
  for (double v : best_c) sp.add(v);
  for (double v : best_r) sr.add(v);
  auto out = Prf::from(sp.value() / static_cast<double>(cand.rows),
                       sr.value() / static_cast<double>(ref.rows));
  if (baseline) {
    out = {baseline->apply(out.precision), baseline->apply(out.recall), baseline->apply(out.f1)};
  }
  return out;
}

inline Prf embed_score(std::span<const std::string> cand, std::span<const std::string> ref,
                       const EmbeddingProvider& provider,
                       const std::optional<RescaleBaseline>& baseline = std::nullopt,
                       std::string_view cand_doc = {}, std::string_view ref_doc = {}) {
  if (cand.empty() || ref.empty()) throw Error("embedding score needs non-empty token lists");
  return embed_score(provider.embed(cand_doc, cand), provider.embed(ref_doc, ref), baseline);
}

/// Mean unrescaled F1 over `n_pairs` random document pairs drawn from
/// different admissions. Documents without tokens are redrawn.
inline RescaleBaseline estimate_baseline(const Corpus& corpus, const EmbeddingProvider& provider,
                                         std::size_t n_pairs = 1000, std::uint64_t seed = 0) {
  {
    std::unordered_map<std::string_view, int> admissions;
    for (const auto& d : corpus.documents) {
      if (!word_tokenize(d.text).empty()) admissions.emplace(d.admission_id, 0);
    }
    if (admissions.size() < 2) {
      throw Error("baseline estimation needs at least 2 admissions with non-empty notes");
    }
  }
  if (n_pairs == 0) throw ConfigError("baseline estimation needs n_pairs >= 1");
  const auto& docs = corpus.documents;
  Rng rng(seed);
  CompensatedSum sum;
  std::size_t drawn = 0;
  const std::size_t max_attempts = 1000 * n_pairs + 1000;
  for (std::size_t attempt = 0; drawn < n_pairs; ++attempt) {
    if (attempt >= max_attempts) throw Error("could not draw enough cross-admission pairs");
    const auto& ref = docs[rng.below(docs.size())];
    const auto& cand = docs[rng.below(docs.size())];
    if (ref.admission_id == cand.admission_id) continue;
    const auto rt = word_tokenize(ref.text);
    const auto ct = word_tokenize(cand.text);
    if (rt.empty() || ct.empty()) continue;
    sum.add(embed_score(ct, rt, provider, std::nullopt, cand.doc_id, ref.doc_id).f1);
    ++drawn;
  }
  RescaleBaseline out{sum.value() / static_cast<double>(n_pairs), n_pairs, seed};
  if (!(out.b < 1.0)) throw Error("random-pair baseline reached 1; rescaling is undefined");
  out.b = std::max(out.b, 0.0);
  return out;
}

}  // namespace rednote

#endif  // REDNOTE_EMBEDDING_HPP
