#pragma once

// Tokenization, sentence segmentation and answer-string normalization shared
// by every stage. All offsets are byte offsets into UTF-8 text.

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace odqa {

struct Token {
  std::string text;  // lowercased
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Half-open byte range [begin, end).
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

namespace detail {

inline unsigned char byte_at(std::string_view s, std::size_t i) {
  return i < s.size() ? static_cast<unsigned char>(s[i]) : 0;
}

// Length in bytes of the whitespace code point starting at i, or 0.
inline std::size_t space_length(std::string_view s, std::size_t i) {
  const unsigned char c = byte_at(s, i);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return 1;
  const unsigned char c1 = byte_at(s, i + 1);
  const unsigned char c2 = byte_at(s, i + 2);
  if (c == 0xC2 && c1 == 0xA0) return 2;  // U+00A0
  if (c == 0xE2 && c1 == 0x80 && ((c2 >= 0x80 && c2 <= 0x8A) || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF))
    return 3;
  if (c == 0xE2 && c1 == 0x81 && c2 == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && c1 == 0x80 && c2 == 0x80) return 3;  // U+3000
  return 0;
}

// Length of a non-word code point (whitespace or punctuation) starting at i,
// or 0 when i starts a word character. Bytes of other multi-byte sequences
// are treated as word characters.
inline std::size_t separator_length(std::string_view s, std::size_t i) {
  if (auto n = space_length(s, i)) return n;
  const unsigned char c = byte_at(s, i);
  if (c < 0x80) {
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    return alnum ? 0 : 1;
  }
  const unsigned char c1 = byte_at(s, i + 1);
  if (c == 0xC2 && c1 >= 0xA1 && c1 <= 0xBF) return 2;  // Latin-1 punctuation and symbols
  if (c == 0xE2 && (c1 == 0x80 || c1 == 0x81)) return 3;  // General Punctuation block
  if (c == 0xE3 && c1 == 0x80) return 3;                  // CJK punctuation
  return 0;
}

inline bool is_word_at(std::string_view s, std::size_t i) {
  return i < s.size() && separator_length(s, i) == 0;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace detail

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), detail::ascii_lower);
  return out;
}

/// Lowercased tokens with their byte offsets. A token is a maximal run of
/// word characters; a '-' joins two runs when word characters sit on both
/// sides of it, so "COVID-19" stays one token.
inline std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!detail::is_word_at(text, i)) {
      i += detail::separator_length(text, i);
      continue;
    }
    const std::size_t begin = i;
    while (true) {
      while (detail::is_word_at(text, i)) ++i;
      if (i < text.size() && text[i] == '-' && i > begin && detail::is_word_at(text, i + 1)) {
        ++i;
        continue;
      }
      break;
    }
    out.push_back(Token{to_lower(text.substr(begin, i - begin)), begin, i});
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

inline std::size_t count_tokens(std::string_view text) { return tokenize_with_offsets(text).size(); }

// ---------------------------------------------------------------------------
// Segmentation

/// First byte after the text that belongs with token t-1 when a segment ends
/// right before token t: trailing punctuation up to the next whitespace, never
/// past the start of token t.
inline std::size_t segment_end_before(std::string_view text, const std::vector<Token>& tokens,
                                      std::size_t t) {
  std::size_t pos = tokens[t - 1].end;
  const std::size_t limit = tokens[t].begin;
  while (pos < limit && detail::space_length(text, pos) == 0) ++pos;
  return pos;
}

/// First non-whitespace byte at or after `from`.
inline std::size_t skip_space(std::string_view text, std::size_t from) {
  while (from < text.size()) {
    const auto n = detail::space_length(text, from);
    if (n == 0) break;
    from += n;
  }
  return from;
}

/// One past the last non-whitespace byte of `text`.
inline std::size_t trim_end(std::string_view text) {
  std::size_t end = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto n = detail::space_length(text, i);
    if (n == 0) {
      ++i;
      end = i;
    } else {
      i += n;
    }
  }
  return end;
}

/// Byte spans of the segments obtained by cutting the token sequence before
/// each index in `cuts` (strictly increasing, each in (0, tokens.size())).
/// Segments are trimmed; the bytes between consecutive segments are
/// whitespace only, so concatenating the segments with the gaps restores the
/// text.
inline std::vector<CharSpan> segment_spans(std::string_view text, const std::vector<Token>& tokens,
                                           const std::vector<std::size_t>& cuts) {
  std::vector<CharSpan> spans;
  std::size_t begin = skip_space(text, 0);
  for (std::size_t cut : cuts) {
    const std::size_t end = segment_end_before(text, tokens, cut);
    spans.push_back({begin, end});
    begin = skip_space(text, end);
  }
  spans.push_back({begin, std::max(begin, trim_end(text))});
  return spans;
}

/// Tokens, lowercased, that commonly end in '.' without ending a sentence.
inline bool is_abbreviation(std::string_view lowered) {
  static constexpr std::array<std::string_view, 28> kAbbrev = {
      "al",  "dr", "mr",  "mrs", "ms", "prof", "fig", "figs", "vs", "approx",
      "eq",  "eqs", "ref", "refs", "sp", "spp", "cf", "resp", "no", "vol",
      "ca",  "inc", "ltd", "jr",  "sr", "st",  "dept", "univ"};
  if (lowered.size() == 1 && lowered[0] >= 'a' && lowered[0] <= 'z') return true;  // initials, e.g., i.e.
  return std::find(kAbbrev.begin(), kAbbrev.end(), lowered) != kAbbrev.end();
}

/// True when a sentence boundary falls between token t-1 and token t:
/// terminal punctuation followed by whitespace, the next token starting with
/// an uppercase letter or digit, and the preceding word not an abbreviation.
inline bool is_sentence_boundary(std::string_view text, const std::vector<Token>& tokens,
                                 std::size_t t) {
  const std::size_t gap_begin = tokens[t - 1].end;
  const std::size_t gap_end = tokens[t].begin;
  bool terminated = false;
  for (std::size_t i = gap_begin; i < gap_end; ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && detail::space_length(text, i + 1) > 0 && i + 1 < gap_end) {
      if (c == '.' && i == gap_begin && is_abbreviation(tokens[t - 1].text)) continue;
      terminated = true;
      break;
    }
  }
  if (!terminated) return false;
  const char first = text[tokens[t].begin];
  return detail::is_ascii_upper(first) || detail::is_ascii_digit(first);
}

/// Token indices at which a new sentence starts (excluding 0).
inline std::vector<std::size_t> sentence_cuts(std::string_view text, const std::vector<Token>& tokens) {
  std::vector<std::size_t> cuts;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    if (is_sentence_boundary(text, tokens, t)) cuts.push_back(t);
  }
  return cuts;
}

/// Sentences of `text` as byte spans. Text without tokens yields no sentences.
inline std::vector<CharSpan> split_sentences(std::string_view text) {
  const auto tokens = tokenize_with_offsets(text);
  if (tokens.empty()) return {};
  return segment_spans(text, tokens, sentence_cuts(text, tokens));
}

// ---------------------------------------------------------------------------
// Answer normalization

/// Lowercase and collapse whitespace runs to single spaces, trimmed.
inline std::string normalize_whitespace_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < s.size()) {
    if (auto n = detail::space_length(s, i)) {
      pending_space = !out.empty();
      i += n;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(detail::ascii_lower(s[i]));
    ++i;
  }
  return out;
}

/// SQuAD-style answer normalization: lowercase, drop punctuation and the
/// articles a/an/the, collapse whitespace.
inline std::string normalize_answer(std::string_view s) {
  std::string no_punct;
  no_punct.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (detail::space_length(s, i) > 0) {
      no_punct.push_back(' ');
      i += detail::space_length(s, i);
    } else if (auto n = detail::separator_length(s, i)) {
      i += n;
    } else {
      no_punct.push_back(detail::ascii_lower(s[i]));
      ++i;
    }
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < no_punct.size()) {
    while (pos < no_punct.size() && no_punct[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < no_punct.size() && no_punct[pos] != ' ') ++pos;
    if (start == pos) break;
    const std::string_view word(no_punct.data() + start, pos - start);
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out.append(word);
  }
  return out;
}

inline std::vector<std::string> split_on_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] != ' ') ++pos;
    if (pos > start) out.emplace_back(s.substr(start, pos - start));
  }
  return out;
}

}  // namespace odqa
