#pragma once

// Reference implementations written straight from the formulas, and random
// input generators. Nothing here calls the code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "odqa/corpus.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// BM25+

struct Bm25 {
  double k1 = 1.5;
  double b = 0.75;
  double delta = 1.0;
};

inline std::vector<double> bm25_plus(const std::vector<std::string>& query,
                                     const std::vector<std::vector<std::string>>& docs, Bm25 p = {}) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0.0;
  for (const auto& d : docs) total_len += static_cast<double>(d.size());
  const double avgdl = docs.empty() ? 0.0 : total_len / n;

  std::vector<std::string> terms = query;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  std::vector<double> scores(docs.size(), 0.0);
  for (const auto& t : terms) {
    double df = 0.0;
    for (const auto& d : docs) df += std::count(d.begin(), d.end(), t) > 0 ? 1.0 : 0.0;
    if (df == 0.0) continue;
    const double idf = std::log((n + 1.0) / df);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
      if (tf == 0.0) continue;
      const double len = static_cast<double>(docs[i].size());
      const double ratio = avgdl > 0.0 ? len / avgdl : 1.0;
      scores[i] += idf * ((p.k1 + 1.0) * tf / (p.k1 * ((1.0 - p.b) + p.b * ratio) + tf) + p.delta);
    }
  }
  return scores;
}

/// Positions sorted by score descending, lower position first on ties.
inline std::vector<std::size_t> rank_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 1; i < order.size(); ++i)  // insertion sort: stable by construction
    for (std::size_t j = i; j > 0 && scores[order[j]] > scores[order[j - 1]]; --j) std::swap(order[j], order[j - 1]);
  return order;
}

// ---------------------------------------------------------------------------
// Spans

struct Span {
  std::size_t s = 0, e = 0;
  double conf = 0.0;
};

/// Exhaustive argmax of start[s] + end[e] over s <= e < s + max_len, keeping
/// only positive totals; ties go to the shorter span, then the earlier start.
inline std::optional<Span> best_span(const std::vector<double>& start, const std::vector<double>& end,
                                     std::size_t max_len) {
  std::optional<Span> best;
  for (std::size_t s = 0; s < start.size(); ++s) {
    for (std::size_t e = s; e < end.size() && e - s + 1 <= max_len; ++e) {
      const double c = start[s] + end[e];
      if (!(c > 0.0)) continue;
      const bool better = !best || c > best->conf ||
                          (c == best->conf && (e - s < best->e - best->s || (e - s == best->e - best->s && s < best->s)));
      if (better) best = Span{s, e, c};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Largest remainder

/// Hamilton apportionment with exact integer remainders; equal remainders go
/// to the lower index. Quotas never exceed sizes when l <= sum(sizes).
inline std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& sizes, std::size_t l) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> out(sizes.size(), 0);
  if (total == 0) return out;
  std::vector<std::pair<std::size_t, std::size_t>> rem;  // (remainder numerator, index)
  std::size_t given = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    out[i] = (sizes[i] * l) / total;
    given += out[i];
    rem.emplace_back((sizes[i] * l) % total, i);
  }
  std::sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t j = 0; given < l; ++j, ++given) ++out[rem[j].second];
  return out;
}

// ---------------------------------------------------------------------------
// K-Means

inline double sse(const std::vector<std::vector<double>>& pts, const std::vector<std::size_t>& label, std::size_t k) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> mean(pts[0].size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != c) continue;
      ++count;
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
    }
    if (count == 0) return std::numeric_limits<double>::infinity();
    for (auto& v : mean) v /= static_cast<double>(count);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != c) continue;
      for (std::size_t d = 0; d < mean.size(); ++d) total += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
    }
  }
  return total;
}

/// Minimum-SSE partition into k non-empty groups by enumerating every
/// labeling (k^n), labels canonicalized by first appearance.
inline std::vector<std::size_t> best_partition(const std::vector<std::vector<double>>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> label(n, 0), best;
  double best_sse = std::numeric_limits<double>::infinity();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= k;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= k) label[i] = c % k;
    std::vector<std::size_t> map(k, k), canon(n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (map[label[i]] == k) map[label[i]] = next++;
      canon[i] = map[label[i]];
    }
    if (canon != label) continue;  // visit each partition once
    const double v = sse(pts, label, k);
    if (v < best_sse) {
      best_sse = v;
      best = label;
    }
  }
  return best;
}

inline std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> map;
  std::vector<std::size_t> out;
  for (auto l : labels) out.push_back(map.emplace(l, map.size()).first->second);
  return out;
}

// ---------------------------------------------------------------------------
// Inner product

inline double dot(const std::vector<float>& a, const std::vector<float>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
  return static_cast<double>(s);
}

}  // namespace oracle

namespace gen {

inline std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::vector<std::string> small_vocab(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("w" + std::to_string(i));
  return v;
}

/// Random prose: capitalized sentences, an occasional abbreviation, hyphen,
/// number, non-ASCII word, or a long run without any sentence boundary.
inline std::string prose(std::mt19937_64& rng, std::size_t tokens) {
  static const std::vector<std::string> words = {
      "virus", "cells", "protein", "binding", "assay", "cohort", "trial", "dose", "sample", "data",
      "the", "of", "and", "in", "was", "were", "for", "with", "mRNA", "SARS-CoV-2",
      "COVID-19", "e.g.", "Dr.", "et", "al.", "i.e.", "Fig.", "2020", "3.5", "naïve",
      "β-coronavirus", "ACE2", "x", "5%", "(n=12)"};
  std::string out;
  bool sentence_start = true;
  const bool no_boundaries = below(rng, 10) == 0;
  for (std::size_t i = 0; i < tokens; ++i) {
    std::string w = words[below(rng, words.size())];
    if (sentence_start && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (!out.empty()) out += below(rng, 40) == 0 ? "  " : " ";
    out += w;
    sentence_start = false;
    if (!no_boundaries && below(rng, 12) == 0) {
      out += below(rng, 5) == 0 ? "?" : ".";
      sentence_start = true;
    }
  }
  if (!no_boundaries) out += ".";
  return out;
}

inline odqa::Article article(std::mt19937_64& rng, std::size_t id) {
  odqa::Article a;
  a.article_id = "rand-" + std::to_string(id);
  a.title = "Random article " + std::to_string(id);
  const std::size_t paragraphs = 1 + below(rng, 8);
  for (std::size_t p = 0; p < paragraphs; ++p) {
    const std::size_t len = below(rng, 4) == 0 ? 200 + below(rng, 500) : 5 + below(rng, 180);
    a.paragraphs.push_back(prose(rng, len));
  }
  return a;
}

}  // namespace gen
