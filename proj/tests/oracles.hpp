#ifndef REDNOTE_TEST_ORACLES_HPP
#define REDNOTE_TEST_ORACLES_HPP

// Brute-force reference implementations, deliberately naive.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rednote/metrics.hpp"

namespace oracle {

using rednote::Prf;
using Toks = std::vector<std::string>;

// Naive Ratcliff-Obershelp: cubic longest-block search, earliest block in a
// then in b on ties, recursion on both flanks.
inline std::size_t gestalt_matches(const Toks& a, std::size_t alo, std::size_t ahi, const Toks& b,
                                   std::size_t blo, std::size_t bhi) {
  std::size_t bi = alo, bj = blo, bk = 0;
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      while (i + k < ahi && j + k < bhi && a[i + k] == b[j + k]) ++k;
      if (k > bk) bi = i, bj = j, bk = k;
    }
  }
  if (bk == 0) return 0;
  return bk + gestalt_matches(a, alo, bi, b, blo, bj) + gestalt_matches(a, bi + bk, ahi, b, bj + bk, bhi);
}

inline double gestalt_ratio(const Toks& a, const Toks& b) {
  if (a.empty() && b.empty()) return 1.0;
  return 2.0 * static_cast<double>(gestalt_matches(a, 0, a.size(), b, 0, b.size())) /
         static_cast<double>(a.size() + b.size());
}

inline Prf rouge_n(const Toks& cand, const Toks& ref, std::size_t n) {
  std::map<Toks, int> cc, rc;
  for (std::size_t i = 0; i + n <= cand.size(); ++i) ++cc[Toks(cand.begin() + i, cand.begin() + i + n)];
  for (std::size_t i = 0; i + n <= ref.size(); ++i) ++rc[Toks(ref.begin() + i, ref.begin() + i + n)];
  int overlap = 0, nc = 0, nr = 0;
  for (auto& [g, c] : cc) {
    nc += c;
    overlap += std::min(c, rc.count(g) ? rc[g] : 0);
  }
  for (auto& [g, c] : rc) nr += c;
  const double p = nc ? static_cast<double>(overlap) / nc : 0.0;
  const double r = nr ? static_cast<double>(overlap) / nr : 0.0;
  return {p, r, p + r == 0.0 ? 0.0 : 2 * p * r / (p + r)};
}

inline bool is_subsequence(const Toks& s, const Toks& of) {
  std::size_t j = 0;
  for (const auto& t : of) {
    if (j < s.size() && s[j] == t) ++j;
  }
  return j == s.size();
}

// Longest subsequence of a (all 2^|a| of them) that is also one of b.
inline std::size_t lcs_length(const Toks& a, const Toks& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    Toks s;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask >> i & 1u) s.push_back(a[i]);
    }
    if (s.size() > best && is_subsequence(s, b)) best = s.size();
  }
  return best;
}

inline Prf rouge_l(const Toks& cand, const Toks& ref) {
  const double l = static_cast<double>(lcs_length(cand, ref));
  const double p = cand.empty() ? 0.0 : l / static_cast<double>(cand.size());
  const double r = ref.empty() ? 0.0 : l / static_cast<double>(ref.size());
  return {p, r, p + r == 0.0 ? 0.0 : 2 * p * r / (p + r)};
}

}  // namespace oracle

#endif  // REDNOTE_TEST_ORACLES_HPP
