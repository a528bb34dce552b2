#ifndef REDNOTE_BPE_HPP
#define REDNOTE_BPE_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rednote/common.hpp"

namespace rednote {

using TokenId = std::uint32_t;

/// Ordered, duplicate-free list of byte-string tokens. Index = TokenId.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  /// Appends an entry and returns its id. Throws on a duplicate.
  TokenId add(std::string entry) {
    if (index_.contains(entry)) {
      throw Error("duplicate vocabulary entry");
    }
    const auto id = static_cast<TokenId>(entries_.size());
    index_.emplace(entry, id);
    entries_.push_back(std::move(entry));
    return id;
  }

  bool contains(std::string_view entry) const {
    return index_.contains(std::string(entry));
  }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& operator[](TokenId id) const { return entries_[id]; }
  const std::vector<std::string>& entries() const noexcept { return entries_; }

  /// Stable content hash; two vocabularies with equal entries in equal order
  /// hash equally on every platform.
  std::uint64_t hash() const noexcept {
    std::uint64_t h = kFnvOffset;
    for (const auto& e : entries_) {
      const std::uint64_t n = e.size();
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&n), 8), h);
      h = fnv1a64(e, h);
    }
    return h;
  }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

struct Merge {
  TokenId left;
  TokenId right;
  bool operator==(const Merge&) const = default;
};

namespace detail {

inline constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::string_view in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const auto n = (std::uint32_t(std::uint8_t(in[i])) << 16) |
                   (std::uint32_t(std::uint8_t(in[i + 1])) << 8) |
                   std::uint8_t(in[i + 2]);
    out += kBase64Alphabet[n >> 18];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += kBase64Alphabet[(n >> 6) & 63];
    out += kBase64Alphabet[n & 63];
  }
  if (const auto rest = in.size() - i; rest > 0) {
    std::uint32_t n = std::uint32_t(std::uint8_t(in[i])) << 16;
    if (rest == 2) n |= std::uint32_t(std::uint8_t(in[i + 1])) << 8;
    out += kBase64Alphabet[n >> 18];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += rest == 2 ? kBase64Alphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

/// Returns false on any malformed input.
inline bool base64_decode(std::string_view in, std::string& out) {
  out.clear();
  if (in.size() % 4 != 0) return false;
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (c == '=') {
      if (i + 2 < in.size()) return false;
      ++pad;
      continue;
    }
    if (pad) return false;
    const auto pos = kBase64Alphabet.find(c);
    if (pos == std::string_view::npos) return false;
    acc = (acc << 6) | static_cast<std::uint32_t>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  return true;
}

constexpr std::uint64_t pair_key(TokenId a, TokenId b) noexcept {
  return (std::uint64_t(a) << 32) | b;
}

}  // namespace detail

/// Splits text into pre-tokenization chunks: each chunk is a (possibly
/// empty) whitespace run followed by a non-whitespace run; trailing
/// whitespace forms its own chunk. Chunks concatenate to the input.
inline std::vector<std::string_view> bpe_pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t start = 0;
  bool prev_space = true;
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t at = i;
    const bool space = utf8::is_space(utf8::next(text, i));
    if (space && !prev_space) {
      chunks.push_back(text.substr(start, at - start));
      start = at;
    }
    prev_space = space;
  }
  if (start < text.size()) chunks.push_back(text.substr(start));
  return chunks;
}

struct BpeTrainOptions {
  /// A pair must occur at least this often to be merged.
  std::uint64_t min_pair_count = 2;
};

/// Byte-level BPE model: ids 0..255 are the raw bytes, id 256+k is the
/// result of merge k.
class BpeModel {
 public:
  static constexpr std::string_view kVersion = "bpe-v1";

  /// Byte-only model (no merges).
  BpeModel() {
    for (int b = 0; b < 256; ++b) vocab_.add(std::string(1, static_cast<char>(b)));
  }

  BpeModel(Vocab vocab, std::vector<Merge> merges)
      : vocab_(std::move(vocab)), merges_(std::move(merges)) {
    validate();
    build_ranks();
  }

  const Vocab& vocab() const noexcept { return vocab_; }
  const std::vector<Merge>& merges() const noexcept { return merges_; }
  std::uint64_t fingerprint() const noexcept { return vocab_.hash(); }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> ids;
    std::vector<TokenId> syms;
    for (auto chunk : bpe_pretokenize(text)) {
      syms.clear();
      for (unsigned char c : chunk) syms.push_back(c);
      merge_chunk(syms);
      ids.insert(ids.end(), syms.begin(), syms.end());
    }
    return ids;
  }

  std::string decode(std::span<const TokenId> ids) const {
    std::string out;
    for (auto id : ids) {
      if (id >= vocab_.size()) {
        throw Error("token id " + std::to_string(id) +
                    " out of range for vocabulary of size " +
                    std::to_string(vocab_.size()));
      }
      out += vocab_[id];
    }
    return out;
  }

  static BpeModel train(std::span<const std::string> texts,
                        std::size_t target_vocab_size,
                        const BpeTrainOptions& options = {});

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = kVersion;
    auto& v = j["vocab"] = nlohmann::json::array();
    for (const auto& e : vocab_.entries()) v.push_back(detail::base64_encode(e));
    auto& m = j["merges"] = nlohmann::json::array();
    for (const auto& mg : merges_) m.push_back({mg.left, mg.right});
    return j;
  }

  static BpeModel from_json(std::string_view text);

 private:
  void validate() const {
    if (vocab_.size() != 256 + merges_.size()) {
      throw ParseError("merge-count mismatch: vocab has " +
                       std::to_string(vocab_.size()) + " entries but " +
                       std::to_string(merges_.size()) + " merges imply " +
                       std::to_string(256 + merges_.size()));
    }
    for (int b = 0; b < 256; ++b) {
      const auto& e = vocab_[static_cast<TokenId>(b)];
      if (e.size() != 1 || static_cast<unsigned char>(e[0]) != b) {
        throw ParseError("vocab[" + std::to_string(b) +
                             "] is not the base byte token",
                         static_cast<std::size_t>(b));
      }
    }
    for (std::size_t k = 0; k < merges_.size(); ++k) {
      const auto [l, r] = merges_[k];
      const auto id = 256 + k;
      if (l >= id || r >= id || vocab_[static_cast<TokenId>(id)] != vocab_[l] + vocab_[r]) {
        throw ParseError("merges[" + std::to_string(k) +
                             "] is inconsistent with vocab[" +
                             std::to_string(id) + "]",
                         k);
      }
    }
  }

  void build_ranks() {
    ranks_.clear();
    for (std::size_t k = 0; k < merges_.size(); ++k) {
      ranks_.emplace(detail::pair_key(merges_[k].left, merges_[k].right),
                     static_cast<std::uint32_t>(k));
    }
  }

  void merge_chunk(std::vector<TokenId>& syms) const {
    while (syms.size() > 1) {
      auto best = std::numeric_limits<std::uint32_t>::max();
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const auto it = ranks_.find(detail::pair_key(syms[i], syms[i + 1]));
        if (it != ranks_.end()) best = std::min(best, it->second);
      }
      if (best == std::numeric_limits<std::uint32_t>::max()) return;
      const auto [l, r] = merges_[best];
      const auto merged = static_cast<TokenId>(256 + best);
      std::size_t w = 0;
      for (std::size_t i = 0; i < syms.size(); ++w) {
        if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
          syms[w] = merged;
          i += 2;
        } else {
          syms[w] = syms[i++];
        }
      }
      syms.resize(w);
    }
  }

  Vocab vocab_;
  std::vector<Merge> merges_;
  std::unordered_map<std::uint64_t, std::uint32_t> ranks_;
};

inline BpeModel BpeModel::train(std::span<const std::string> texts,
                                std::size_t target_vocab_size,
                                const BpeTrainOptions& options) {
  if (target_vocab_size < 257) {
    throw ConfigError("target vocabulary size must be at least 257");
  }
  struct Word {
    std::vector<TokenId> syms;
    std::uint64_t freq;
  };
  std::unordered_map<std::string_view, std::uint64_t> chunk_freq;
  std::size_t total_bytes = 0;
  for (const auto& t : texts) {
    total_bytes += t.size();
    for (auto c : bpe_pretokenize(t)) ++chunk_freq[c];
  }
  if (total_bytes == 0) throw Error("cannot train BPE on empty text");

  std::vector<Word> words;
  words.reserve(chunk_freq.size());
  for (const auto& [chunk, freq] : chunk_freq) {
    Word w{{}, freq};
    for (unsigned char c : chunk) w.syms.push_back(c);
    words.push_back(std::move(w));
  }

  BpeModel model;
  std::unordered_map<std::uint64_t, std::int64_t> counts;
  std::unordered_map<std::uint64_t, std::unordered_set<std::uint32_t>> where;

  struct Entry {
    std::int64_t count;
    std::uint64_t key;
  };
  const auto& vocab = model.vocab_;
  // Max-heap on count; ties go to the lexicographically smaller byte pair.
  const auto worse = [&vocab](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count < b.count;
    const auto al = static_cast<TokenId>(a.key >> 32), ar = static_cast<TokenId>(a.key);
    const auto bl = static_cast<TokenId>(b.key >> 32), br = static_cast<TokenId>(b.key);
    if (const int c = vocab[al].compare(vocab[bl]); c != 0) return c > 0;
    return vocab[ar].compare(vocab[br]) > 0;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);

  std::unordered_set<std::uint64_t> touched;
  const auto account = [&](std::uint32_t wi, std::int64_t sign) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      const auto key = detail::pair_key(w.syms[i], w.syms[i + 1]);
      counts[key] += sign * static_cast<std::int64_t>(w.freq);
      if (sign > 0) where[key].insert(wi);
      touched.insert(key);
    }
  };
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) account(wi, +1);
  for (auto key : touched) heap.push({counts[key], key});
  touched.clear();

  std::unordered_set<std::uint64_t> forbidden;
  const auto min_count = static_cast<std::int64_t>(std::max<std::uint64_t>(1, options.min_pair_count));
  while (model.vocab_.size() < target_vocab_size && !heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    const auto it = counts.find(top.key);
    if (it == counts.end() || it->second != top.count) continue;  // stale
    if (top.count < min_count) break;
    if (forbidden.contains(top.key)) continue;
    const auto l = static_cast<TokenId>(top.key >> 32);
    const auto r = static_cast<TokenId>(top.key);
    std::string merged_bytes = model.vocab_[l] + model.vocab_[r];
    if (model.vocab_.contains(merged_bytes)) {
      forbidden.insert(top.key);
      continue;
    }
    const TokenId merged = model.vocab_.add(std::move(merged_bytes));
    model.merges_.push_back({l, r});

    std::vector<std::uint32_t> affected(where[top.key].begin(), where[top.key].end());
    std::sort(affected.begin(), affected.end());
    for (auto wi : affected) {
      account(wi, -1);
      auto& syms = words[wi].syms;
      std::size_t w = 0;
      for (std::size_t i = 0; i < syms.size(); ++w) {
        if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
          syms[w] = merged;
          i += 2;
        } else {
          syms[w] = syms[i++];
        }
      }
      syms.resize(w);
      account(wi, +1);
    }
    for (auto key : touched) {
      const auto c = counts[key];
      if (c <= 0) {
        counts.erase(key);
        where.erase(key);
      } else {
        heap.push({c, key});
      }
    }
    touched.clear();
  }
  model.build_ranks();
  return model;
}

inline BpeModel BpeModel::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed tokenizer file at byte " +
                         std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_string() ||
      j["version"].get<std::string>() != kVersion) {
    throw ParseError("tokenizer header: expected version \"bpe-v1\"");
  }
  if (!j.contains("vocab") || !j["vocab"].is_array() || !j.contains("merges") ||
      !j["merges"].is_array()) {
    throw ParseError("tokenizer file lacks vocab or merges arrays");
  }
  const auto& jv = j["vocab"];
  const auto& jm = j["merges"];
  if (jv.size() != 256 + jm.size()) {
    throw ParseError("merge-count mismatch: " + std::to_string(jv.size()) +
                     " vocab entries vs " + std::to_string(jm.size()) + " merges");
  }
  Vocab vocab;
  std::string bytes;
  for (std::size_t i = 0; i < jv.size(); ++i) {
    if (!jv[i].is_string() || !detail::base64_decode(jv[i].get<std::string>(), bytes)) {
      throw ParseError("vocab[" + std::to_string(i) + "] is not valid base64", i);
    }
    if (vocab.contains(bytes)) {
      throw ParseError("vocab[" + std::to_string(i) + "] duplicates an earlier entry", i);
    }
    vocab.add(bytes);
  }
  std::vector<Merge> merges;
  for (std::size_t k = 0; k < jm.size(); ++k) {
    const auto& m = jm[k];
    if (!m.is_array() || m.size() != 2 || !m[0].is_number_unsigned() ||
        !m[1].is_number_unsigned()) {
      throw ParseError("merges[" + std::to_string(k) + "] is not a pair of ids", k);
    }
    const auto a = m[0].get<std::uint64_t>(), b = m[1].get<std::uint64_t>();
    if (a >= vocab.size() || b >= vocab.size()) {
      throw ParseError("merges[" + std::to_string(k) + "] references an unknown id", k);
    }
    merges.push_back({static_cast<TokenId>(a), static_cast<TokenId>(b)});
  }
  return BpeModel(std::move(vocab), std::move(merges));
}

inline BpeModel bpe_train(std::span<const std::string> texts,
                          std::size_t target_vocab_size,
                          const BpeTrainOptions& options = {}) {
  return BpeModel::train(texts, target_vocab_size, options);
}

inline std::vector<TokenId> bpe_encode(const BpeModel& model, std::string_view text) {
  return model.encode(text);
}

inline std::string bpe_decode(const BpeModel& model, std::span<const TokenId> ids) {
  return model.decode(ids);
}

inline void save_bpe(const BpeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << model.to_json().dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

inline BpeModel load_bpe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return BpeModel::from_json(ss.str());
}

}  // namespace rednote

#endif  // REDNOTE_BPE_HPP
