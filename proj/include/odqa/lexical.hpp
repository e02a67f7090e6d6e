#pragma once

// Pool-local lexical statistics: BM25+ scoring and re-ranking, and TF-IDF
// feature vectors for clustering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "odqa/corpus.hpp"
#include "odqa/errors.hpp"
#include "odqa/ranked_list.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"

namespace odqa {

enum class IdfVariant {
  smoothed,   // ln((N + 1) / df), strictly positive
  robertson,  // ln((N - df + 0.5) / (df + 0.5)), negative for df > N/2
};

struct Bm25Params {
  double k1 = 1.5;      // term-frequency saturation
  double b_len = 0.75;  // length normalization
  double delta = 1.0;   // BM25+ lower-bound bonus per matched term
  IdfVariant idf = IdfVariant::smoothed;

  void validate() const {
    if (!(k1 > 0.0)) throw std::invalid_argument("bm25: k1 must be > 0");
    if (!(b_len >= 0.0 && b_len <= 1.0)) throw std::invalid_argument("bm25: b must lie in [0, 1]");
    if (!(delta >= 0.0)) throw std::invalid_argument("bm25: delta must be >= 0");
  }
};

/// Sufficient statistics for BM25 over a fixed document pool.
class TermStats {
 public:
  TermStats() = default;

  /// `docs` holds (doc id, tokens) with stopwords already removed.
  explicit TermStats(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
    std::size_t total_len = 0;
    for (const auto& [id, tokens] : docs) {
      if (!doc_index_.emplace(id, term_freqs_.size()).second)
        throw std::invalid_argument("TermStats: duplicate doc id " + id);
      auto& tf = term_freqs_.emplace_back();
      for (const auto& t : tokens) ++tf[t];
      for (const auto& entry : tf) ++doc_freq_[entry.first];
      doc_lens_.push_back(tokens.size());
      total_len += tokens.size();
    }
    avg_doc_len_ = docs.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(docs.size());
  }

  std::size_t doc_count() const noexcept { return term_freqs_.size(); }
  double avg_doc_len() const noexcept { return avg_doc_len_; }

  std::size_t doc_freq(const std::string& term) const {
    auto it = doc_freq_.find(term);
    return it == doc_freq_.end() ? 0 : it->second;
  }

  bool contains(std::string_view doc_id) const { return doc_index_.count(std::string(doc_id)) != 0; }

  std::size_t doc_len(std::string_view doc_id) const { return doc_lens_[slot(doc_id)]; }

  std::uint32_t term_freq(std::string_view doc_id, const std::string& term) const {
    const auto& tf = term_freqs_[slot(doc_id)];
    auto it = tf.find(term);
    return it == tf.end() ? 0 : it->second;
  }

  double idf(const std::string& term, IdfVariant variant = IdfVariant::smoothed) const {
    const auto df = static_cast<double>(doc_freq(term));
    const auto n = static_cast<double>(doc_count());
    if (df == 0.0) return 0.0;
    if (variant == IdfVariant::robertson) return std::log((n - df + 0.5) / (df + 0.5));
    return std::log((n + 1.0) / df);
  }

 private:
  std::size_t slot(std::string_view doc_id) const {
    auto it = doc_index_.find(std::string(doc_id));
    if (it == doc_index_.end())
      throw Error("bm25: document '" + std::string(doc_id) + "' is not in the scored pool");
    return it->second;
  }

  std::unordered_map<std::string, std::size_t> doc_index_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> term_freqs_;
  std::vector<std::size_t> doc_lens_;
  std::unordered_map<std::string, std::size_t> doc_freq_;
  double avg_doc_len_ = 0.0;
};

/// Contribution of one query term: idf * ((k1+1) tf / (k1 (1 - b + b |D|/avgdl) + tf) + delta),
/// zero when tf is zero.
inline double bm25_plus_term(double tf, double doc_len, double avg_doc_len, double idf,
                             const Bm25Params& p) {
  if (tf <= 0.0) return 0.0;
  const double len_ratio = avg_doc_len > 0.0 ? doc_len / avg_doc_len : 1.0;
  const double norm = p.k1 * ((1.0 - p.b_len) + p.b_len * len_ratio);
  return idf * (((p.k1 + 1.0) * tf) / (norm + tf) + p.delta);
}

/// BM25+ over the distinct query terms. Throws odqa::Error when `doc_id` is not
/// part of the pool the statistics were built from.
inline double bm25_plus_score(const std::vector<std::string>& query_tokens, std::string_view doc_id,
                              const TermStats& stats, const Bm25Params& params) {
  const double len = static_cast<double>(stats.doc_len(doc_id));
  std::unordered_set<std::string> seen;
  double score = 0.0;
  for (const auto& term : query_tokens) {
    if (!seen.insert(term).second) continue;
    const auto tf = stats.term_freq(doc_id, term);
    if (tf == 0) continue;
    score += bm25_plus_term(tf, len, stats.avg_doc_len(), stats.idf(term, params.idf), params);
  }
  return score;
}

inline std::vector<std::string> content_tokens(std::string_view text, const Stoplist& stoplist) {
  return remove_stopwords(tokenize(text), stoplist);
}

/// Re-sorts `pool` by BM25+ computed over the pool itself. Ties keep the
/// incoming order.
inline RankedList rerank_bm25(std::string_view query, const RankedList& pool, const ChunkStore& chunks,
                              const Bm25Params& params, const Stoplist& stoplist) {
  params.validate();
  std::vector<std::pair<std::string, std::vector<std::string>>> docs;
  docs.reserve(pool.size());
  for (const auto& e : pool) docs.emplace_back(e.chunk_id, content_tokens(chunks.at(e.chunk_id).text, stoplist));
  const TermStats stats(docs);
  const auto query_tokens = content_tokens(query, stoplist);

  RankedList out;
  out.reserve(pool.size());
  for (const auto& e : pool)
    out.push_back({e.chunk_id, bm25_plus_score(query_tokens, e.chunk_id, stats, params), ScoreSource::bm25});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  return out;
}

/// Lexical-only retrieval: BM25+ over every chunk in the store, store order
/// breaking ties, truncated to `depth`.
inline RankedList bm25_search(std::string_view query, const ChunkStore& chunks, const Bm25Params& params,
                              const Stoplist& stoplist, std::size_t depth) {
  RankedList all;
  all.reserve(chunks.size());
  for (const auto& c : chunks.chunks()) all.push_back({c.chunk_id, 0.0, ScoreSource::bm25});
  auto ranked = rerank_bm25(query, all, chunks, params, stoplist);
  if (ranked.size() > depth) ranked.resize(depth);
  return ranked;
}

// ---------------------------------------------------------------------------
// TF-IDF

struct TfidfVector {
  std::map<std::string, double> weights;  // non-negative
  bool empty_document = false;            // no surviving tokens; zero vector

  double norm() const {
    double s = 0.0;
    for (const auto& [t, w] : weights) s += w * w;
    return std::sqrt(s);
  }

  double dot(const TfidfVector& other) const {
    double s = 0.0;
    auto a = weights.begin();
    auto b = other.weights.begin();
    while (a != weights.end() && b != other.weights.end()) {
      if (a->first < b->first) {
        ++a;
      } else if (b->first < a->first) {
        ++b;
      } else {
        s += a->second * b->second;
        ++a;
        ++b;
      }
    }
    return s;
  }
};

/// Vectors in pool order.
struct TfidfVectors {
  std::vector<std::string> ids;
  std::vector<TfidfVector> vectors;
  std::vector<std::string> vocabulary;  // sorted, pool-local

  std::size_t size() const noexcept { return ids.size(); }
};

/// tf = raw count in the chunk, idf = ln((N+1)/df) over the pool, then
/// L2-normalized. Chunks with no surviving tokens get a zero vector and the
/// empty_document flag.
inline TfidfVectors tfidf_vectors(const std::vector<std::string>& pool, const ChunkStore& chunks,
                                  const Stoplist& stoplist) {
  if (pool.empty()) throw std::invalid_argument("tfidf_vectors: empty pool");
  TfidfVectors out;
  out.ids = pool;
  std::vector<std::map<std::string, double>> counts(pool.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (auto& t : content_tokens(chunks.at(pool[i]).text, stoplist)) counts[i][std::move(t)] += 1.0;
    for (const auto& [t, c] : counts[i]) ++df[t];
  }
  const double n = static_cast<double>(pool.size());
  for (const auto& [t, d] : df) out.vocabulary.push_back(t);
  for (auto& tf : counts) {
    TfidfVector v;
    for (auto& [t, c] : tf) v.weights[t] = c * std::log((n + 1.0) / static_cast<double>(df[t]));
    const double norm = v.norm();
    if (norm > 0.0) {
      for (auto& [t, w] : v.weights) w /= norm;
    } else {
      v.weights.clear();
      v.empty_document = true;
    }
    out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace odqa
