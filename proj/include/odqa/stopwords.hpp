#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "odqa/errors.hpp"
#include "odqa/hash.hpp"
#include "odqa/text.hpp"

namespace odqa {

// Mirrors data/stopwords.txt; a unit test keeps the two in sync.
inline constexpr std::array kDefaultStopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
    "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn"};

/// Immutable set of lowercase stop tokens.
class Stoplist {
 public:
  Stoplist() = default;

  explicit Stoplist(std::vector<std::string> words) {
    for (auto& w : words) words_.insert(to_lower(w));
  }

  static const Stoplist& english() {
    static const Stoplist list = [] {
      std::vector<std::string> words(kDefaultStopwords.begin(), kDefaultStopwords.end());
      return Stoplist(std::move(words));
    }();
    return list;
  }

  /// UTF-8, one token per line; blank lines and lines starting with '#' are
  /// skipped.
  static Stoplist parse(std::string_view content) {
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos <= content.size()) {
      auto nl = content.find('\n', pos);
      if (nl == std::string_view::npos) nl = content.size();
      std::string_view line = content.substr(pos, nl - pos);
      pos = nl + 1;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string_view::npos || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t\r");
      words.emplace_back(line.substr(first, last - first + 1));
    }
    return Stoplist(std::move(words));
  }

  static Stoplist load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open stoplist: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(content);
  }

  bool contains(std::string_view token) const {
    return words_.count(to_lower(token)) != 0;
  }

  std::size_t size() const noexcept { return words_.size(); }

  std::vector<std::string> sorted_words() const {
    std::vector<std::string> out(words_.begin(), words_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Order-independent content hash, used in provider fingerprints.
  std::uint64_t fingerprint() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& w : sorted_words()) {
      h = fnv1a(w, h);
      h = fnv1a(std::string_view("\n", 1), h);
    }
    return h;
  }

 private:
  std::unordered_set<std::string> words_;
};

/// Order-preserving filter; membership is tested on the lowercased token.
inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 const Stoplist& stoplist) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stoplist.contains(t)) out.push_back(t);
  }
  return out;
}

}  // namespace odqa
