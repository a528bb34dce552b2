#ifndef REDNOTE_SYNTH_HPP
#define REDNOTE_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rednote/bpe.hpp"
#include "rednote/common.hpp"
#include "rednote/corpus.hpp"

namespace rednote {

struct NoteTypePlan {
  std::string label;
  /// Fraction of each note copied (as a prefix) into the next note.
  double redundancy = 0.0;
  std::size_t notes_per_admission = 2;
  std::size_t tokens_per_note = 100;
};

struct RedundancyPlan {
  std::vector<NoteTypePlan> note_types;
  std::size_t n_admissions = 1;
  std::size_t vocab_size = 1'000'000;
  std::uint64_t seed = 0;
};

/// Number of tokens note i+1 copies from note i.
inline std::size_t copied_tokens(const NoteTypePlan& t) {
  return static_cast<std::size_t>(
      std::ceil(t.redundancy * static_cast<double>(t.tokens_per_note) - 1e-9));
}

inline void validate(const RedundancyPlan& plan) {
  if (plan.note_types.empty()) throw ConfigError("redundancy plan lists no note types");
  for (const auto& t : plan.note_types) {
    if (!(t.redundancy >= 0.0 && t.redundancy <= 1.0)) {
      throw ConfigError("redundancy for '" + t.label + "' must lie in [0, 1]");
    }
    if (t.tokens_per_note < 1) throw ConfigError("tokens_per_note must be >= 1");
    if (t.notes_per_admission < 1) throw ConfigError("notes_per_admission must be >= 1");
  }
}

/// Copy-paste corpus with known redundancy. The first note of every
/// (admission, type) stream is fresh tokens; each later note repeats the
/// first ceil(r * len) tokens of its predecessor and appends fresh ones.
/// Tokens are decimal renderings of distinct integers drawn without
/// replacement from [0, vocab_size), so the unigram recall of every
/// successive pair is exactly ceil(r * len) / len.
inline Corpus generate_redundant_corpus(const RedundancyPlan& plan) {
  validate(plan);
  std::size_t needed = 0;
  for (const auto& t : plan.note_types) {
    needed += t.tokens_per_note + (t.notes_per_admission - 1) * (t.tokens_per_note - copied_tokens(t));
  }
  needed *= plan.n_admissions;
  if (needed > plan.vocab_size) {
    throw Error("token vocabulary exhausted: plan needs " + std::to_string(needed) +
                " fresh tokens but vocab_size is " + std::to_string(plan.vocab_size));
  }
  std::vector<std::uint64_t> pool(plan.vocab_size);
  std::iota(pool.begin(), pool.end(), std::uint64_t{0});
  Rng rng(plan.seed);
  rng.shuffle(pool.begin(), pool.end());
  std::size_t cursor = 0;

  // Base instant 2020-01-01T00:00:00Z.
  constexpr std::int64_t kBase = 1577836800;
  Corpus corpus{"synthetic", {}};
  char id[96];
  for (std::size_t a = 0; a < plan.n_admissions; ++a) {
    std::snprintf(id, sizeof id, "adm%05zu", a);
    const std::string admission = id;
    for (std::size_t ti = 0; ti < plan.note_types.size(); ++ti) {
      const auto& t = plan.note_types[ti];
      const auto keep = copied_tokens(t);
      std::vector<std::uint64_t> note;
      for (std::size_t n = 0; n < t.notes_per_admission; ++n) {
        if (n == 0) {
          note.assign(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                      pool.begin() + static_cast<std::ptrdiff_t>(cursor + t.tokens_per_note));
          cursor += t.tokens_per_note;
        } else {
          note.resize(keep);
          for (auto k = keep; k < t.tokens_per_note; ++k) note.push_back(pool[cursor++]);
        }
        std::string text;
        for (std::size_t k = 0; k < note.size(); ++k) {
          if (k) text.push_back(' ');
          text += std::to_string(note[k]);
        }
        std::snprintf(id, sizeof id, "adm%05zu-t%02zu-n%03zu", a, ti, n);
        corpus.documents.push_back(
            {id, admission, t.label,
             Timestamp{kBase + static_cast<std::int64_t>(a) * 86400 +
                       static_cast<std::int64_t>(n) * 3600 + static_cast<std::int64_t>(ti) * 60},
             std::move(text), std::nullopt});
      }
    }
  }
  return corpus;
}

/// Finite-state Markov chain over symbols 0..k-1.
class MarkovSource {
 public:
  explicit MarkovSource(std::vector<std::vector<double>> transitions)
      : p_(std::move(transitions)) {
    const auto k = p_.size();
    if (k == 0) throw ConfigError("Markov source needs at least one state");
    for (const auto& row : p_) {
      if (row.size() != k) throw ConfigError("transition matrix must be square");
      double sum = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) throw ConfigError("transition probabilities must be non-negative");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("transition rows must sum to 1");
    }
    pi_ = solve_stationary();
  }

  static MarkovSource uniform_iid(std::size_t k) {
    return MarkovSource(std::vector<std::vector<double>>(k, std::vector<double>(k, 1.0 / static_cast<double>(k))));
  }

  static MarkovSource two_state(double p_stay) {
    return MarkovSource({{p_stay, 1.0 - p_stay}, {1.0 - p_stay, p_stay}});
  }

  /// Deterministic cycle 0 -> 1 -> ... -> k-1 -> 0.
  static MarkovSource cycle(std::size_t k) {
    std::vector<std::vector<double>> p(k, std::vector<double>(k, 0.0));
    for (std::size_t s = 0; s < k; ++s) p[s][(s + 1) % k] = 1.0;
    return MarkovSource(std::move(p));
  }

  std::size_t states() const noexcept { return p_.size(); }
  const std::vector<std::vector<double>>& transitions() const noexcept { return p_; }
  const std::vector<double>& stationary() const noexcept { return pi_; }

  /// sum_s pi_s H(row_s), in bits per symbol.
  double entropy_rate() const {
    double h = 0.0;
    for (std::size_t s = 0; s < p_.size(); ++s) {
      double row_h = 0.0;
      for (double v : p_[s]) {
        if (v > 0.0) row_h -= v * std::log2(v);
      }
      h += pi_[s] * row_h;
    }
    return std::max(h, 0.0);
  }

 private:
  /// Solves pi (P - I) = 0 with sum(pi) = 1 by Gaussian elimination.
  std::vector<double> solve_stationary() const {
    const auto k = p_.size();
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) a[i][j] = p_[j][i] - (i == j ? 1.0 : 0.0);
    }
    for (std::size_t j = 0; j < k; ++j) a[k - 1][j] = 1.0;
    a[k - 1][k] = 1.0;
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < k; ++r) {
        if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
      }
      if (std::abs(a[piv][col]) < 1e-12) {
        throw ConfigError("transition matrix has no unique stationary distribution");
      }
      std::swap(a[piv], a[col]);
      for (std::size_t r = 0; r < k; ++r) {
        if (r == col) continue;
        const double f = a[r][col] / a[col][col];
        for (std::size_t c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
      }
    }
    std::vector<double> pi(k);
    for (std::size_t i = 0; i < k; ++i) pi[i] = std::max(0.0, a[i][k] / a[i][i]);
    return pi;
  }

  std::vector<std::vector<double>> p_;
  std::vector<double> pi_;
};

struct MarkovSample {
  std::vector<TokenId> tokens;
  double entropy_bits = 0.0;
};

/// Samples n_tokens symbols, starting from the stationary distribution.
inline MarkovSample generate_markov_stream(const MarkovSource& source, std::size_t n_tokens,
                                           std::uint64_t seed) {
  if (n_tokens < 1) throw ConfigError("n_tokens must be >= 1");
  Rng rng(seed);
  const auto draw = [&rng](const std::vector<double>& dist) {
    const double u = rng.unit();
    double acc = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      acc += dist[s];
      if (u < acc) return static_cast<TokenId>(s);
    }
    for (std::size_t s = dist.size(); s > 0; --s) {
      if (dist[s - 1] > 0.0) return static_cast<TokenId>(s - 1);
    }
    return TokenId{0};
  };
  MarkovSample out;
  out.entropy_bits = source.entropy_rate();
  out.tokens.reserve(n_tokens);
  TokenId state = draw(source.stationary());
  out.tokens.push_back(state);
  for (std::size_t i = 1; i < n_tokens; ++i) {
    state = draw(source.transitions()[state]);
    out.tokens.push_back(state);
  }
  return out;
}

}  // namespace rednote

#endif  // REDNOTE_SYNTH_HPP
