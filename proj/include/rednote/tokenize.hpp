#ifndef REDNOTE_TOKENIZE_HPP
#define REDNOTE_TOKENIZE_HPP

#include <string>
#include <string_view>
#include <vector>

#include "rednote/common.hpp"

namespace rednote {

/// Splits on runs of Unicode whitespace. No case folding or punctuation
/// handling: tokens are the raw byte spans between whitespace runs.
inline std::vector<std::string> word_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = std::string_view::npos;
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t at = i;
    const char32_t cp = utf8::next(text, i);
    if (utf8::is_space(cp)) {
      if (start != std::string_view::npos) {
        tokens.emplace_back(text.substr(start, at - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = at;
    }
  }
  if (start != std::string_view::npos) tokens.emplace_back(text.substr(start));
  return tokens;
}

/// Tokenizer adaptor over word_tokenize, usable wherever a callable
/// text -> token range is expected.
struct WordTokenizer {
  std::vector<std::string> operator()(std::string_view text) const {
    return word_tokenize(text);
  }
};

}  // namespace rednote

#endif  // REDNOTE_TOKENIZE_HPP
