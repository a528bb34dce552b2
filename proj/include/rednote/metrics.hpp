#ifndef REDNOTE_METRICS_HPP
#define REDNOTE_METRICS_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <ranges>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rednote/common.hpp"

namespace rednote {

/// Precision / recall / F1 triple. F1 is the harmonic mean, 0 when both
/// precision and recall are 0.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Prf from(double precision, double recall) {
    const double sum = precision + recall;
    return {precision, recall, sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum};
  }
  bool operator==(const Prf&) const = default;
};

template <typename R>
concept TokenRange = std::ranges::random_access_range<R> && std::ranges::sized_range<R>;

namespace detail {

/// Maps both token sequences onto dense integer ids (shared alphabet).
template <TokenRange A, TokenRange B>
std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>> intern(const A& a, const B& b) {
  using T = std::ranges::range_value_t<A>;
  std::unordered_map<T, std::uint32_t> ids;
  const auto map = [&ids](const auto& r) {
    std::vector<std::uint32_t> out;
    out.reserve(std::ranges::size(r));
    for (const auto& t : r) {
      out.push_back(ids.try_emplace(t, static_cast<std::uint32_t>(ids.size())).first->second);
    }
    return out;
  };
  auto ia = map(a);
  auto ib = map(b);
  return {std::move(ia), std::move(ib)};
}

struct Block {
  std::size_t a, b, size;
};

/// Longest common contiguous block of a[alo,ahi) and b[blo,bhi). Among
/// equally long blocks the one starting earliest in a wins, then earliest in b.
class LongestMatchFinder {
 public:
  LongestMatchFinder(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b,
                     std::size_t alphabet)
      : a_(a), b2j_(alphabet), prev_(b.size() + 1, 0), cur_(b.size() + 1, 0) {
    for (std::size_t j = 0; j < b.size(); ++j) b2j_[b[j]].push_back(j);
  }

  Block find(std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi) {
    // prev_[j + 1] / cur_[j + 1]: length of the match ending at b[j] for
    // the previous / current row of a. Only touched cells are reset.
    Block best{alo, blo, 0};
    for (std::size_t i = alo; i < ahi; ++i) {
      const auto& js = b2j_[a_[i]];
      for (auto it = std::lower_bound(js.begin(), js.end(), blo); it != js.end() && *it < bhi; ++it) {
        const auto j = *it;
        const auto k = prev_[j] + 1;
        cur_[j + 1] = k;
        cur_touched_.push_back(j + 1);
        if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
      }
      for (auto t : prev_touched_) prev_[t] = 0;
      prev_touched_.clear();
      std::swap(prev_, cur_);
      std::swap(prev_touched_, cur_touched_);
    }
    for (auto t : prev_touched_) prev_[t] = 0;
    prev_touched_.clear();
    return best;
  }

 private:
  const std::vector<std::uint32_t>& a_;
  std::vector<std::vector<std::size_t>> b2j_;
  std::vector<std::size_t> prev_, cur_;
  std::vector<std::size_t> prev_touched_, cur_touched_;
};

}  // namespace detail

/// Total number of tokens matched by Ratcliff-Obershelp: the longest
/// common block, then recursively the left and right flanks.
template <TokenRange A, TokenRange B>
std::size_t gestalt_matches(const A& a, const B& b) {
  const auto [ia, ib] = detail::intern(a, b);
  std::size_t alphabet = 0;
  for (auto x : ia) alphabet = std::max<std::size_t>(alphabet, x + 1);
  for (auto x : ib) alphabet = std::max<std::size_t>(alphabet, x + 1);
  detail::LongestMatchFinder finder(ia, ib, alphabet);
  std::size_t matched = 0;
  std::vector<std::array<std::size_t, 4>> todo{{0, ia.size(), 0, ib.size()}};
  while (!todo.empty()) {
    const auto [alo, ahi, blo, bhi] = todo.back();
    todo.pop_back();
    const auto m = finder.find(alo, ahi, blo, bhi);
    if (m.size == 0) continue;
    matched += m.size;
    if (alo < m.a && blo < m.b) todo.push_back({alo, m.a, blo, m.b});
    if (m.a + m.size < ahi && m.b + m.size < bhi) todo.push_back({m.a + m.size, ahi, m.b + m.size, bhi});
  }
  return matched;
}

/// Gestalt pattern-matching ratio 2M / (|a| + |b|); 1.0 when both are empty.
template <TokenRange A, TokenRange B>
double gestalt_ratio(const A& a, const B& b) {
  const auto total = std::ranges::size(a) + std::ranges::size(b);
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(gestalt_matches(a, b)) / static_cast<double>(total);
}

/// ROUGE-N with clipped n-gram counts. Recall is relative to the reference
/// n-grams, precision to the candidate n-grams.
template <TokenRange A, TokenRange B>
Prf rouge_n(const A& cand, const B& ref, std::size_t n) {
  if (n < 1) throw ConfigError("ROUGE-N requires n >= 1");
  const auto [ic, ir] = detail::intern(cand, ref);
  const auto grams = [n](const std::vector<std::uint32_t>& s) {
    std::unordered_map<std::u32string, std::size_t> counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      ++counts[std::u32string(s.begin() + static_cast<std::ptrdiff_t>(i),
                              s.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
  };
  const auto cc = grams(ic);
  const auto rc = grams(ir);
  std::size_t overlap = 0;
  for (const auto& [g, c] : cc) {
    if (const auto it = rc.find(g); it != rc.end()) overlap += std::min(c, it->second);
  }
  const auto n_cand = ic.size() >= n ? ic.size() - n + 1 : 0;
  const auto n_ref = ir.size() >= n ? ir.size() - n + 1 : 0;
  const double p = n_cand ? static_cast<double>(overlap) / static_cast<double>(n_cand) : 0.0;
  const double r = n_ref ? static_cast<double>(overlap) / static_cast<double>(n_ref) : 0.0;
  return Prf::from(p, r);
}

/// Length of the longest common subsequence (two-row dynamic programme).
template <TokenRange A, TokenRange B>
std::size_t lcs_length(const A& a, const B& b) {
  const auto [ia, ib] = detail::intern(a, b);
  std::vector<std::size_t> prev(ib.size() + 1, 0), cur(ib.size() + 1, 0);
  for (std::size_t i = 0; i < ia.size(); ++i) {
    for (std::size_t j = 0; j < ib.size(); ++j) {
      cur[j + 1] = ia[i] == ib[j] ? prev[j] + 1 : std::max(prev[j + 1], cur[j]);
    }
    std::swap(prev, cur);
  }
  return prev[ib.size()];
}

/// ROUGE-L: LCS length over reference length (recall) and candidate
/// length (precision).
template <TokenRange A, TokenRange B>
Prf rouge_l(const A& cand, const B& ref) {
  const auto l = static_cast<double>(lcs_length(cand, ref));
  const auto nc = std::ranges::size(cand);
  const auto nr = std::ranges::size(ref);
  return Prf::from(nc ? l / static_cast<double>(nc) : 0.0, nr ? l / static_cast<double>(nr) : 0.0);
}

}  // namespace rednote

#endif  // REDNOTE_METRICS_HPP
