#pragma once

// Retrieval composition: dense top-n, BM25+ re-rank, then cluster-proportional
// diversity selection of the final l documents.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "odqa/corpus.hpp"
#include "odqa/dense.hpp"
#include "odqa/lexical.hpp"
#include "odqa/ranked_list.hpp"
#include "odqa/stopwords.hpp"

namespace odqa {

struct PipelineConfig {
  std::size_t n = 100;  // dense fan-out
  std::size_t k = 20;   // diversity pool
  std::size_t l = 5;    // documents handed to the reader
  std::size_t num_clusters = 3;
  std::uint64_t kmeans_seed = 0;  // anchor offset into the pool, 0 = top-ranked
  Bm25Params bm25;
  std::size_t m = 3;              // max answer spans per document
  std::size_t max_span_len = 50;  // tokens

  void validate() const {
    if (l == 0) throw std::invalid_argument("pipeline: l must be positive");
    if (!(l < k)) throw std::invalid_argument("pipeline: l must be < k");
    if (!(k <= n)) throw std::invalid_argument("pipeline: k must be <= n");
    if (num_clusters == 0) throw std::invalid_argument("pipeline: num_clusters must be >= 1");
    if (num_clusters > k) throw std::invalid_argument("pipeline: num_clusters must be <= k");
    if (m == 0) throw std::invalid_argument("pipeline: m must be >= 1");
    if (max_span_len == 0) throw std::invalid_argument("pipeline: max_span_len must be >= 1");
    bm25.validate();
  }
};

// ---------------------------------------------------------------------------
// K-Means

struct ClusterAssignment {
  std::vector<std::size_t> cluster_of;  // aligned with the input points
  std::size_t num_clusters = 0;         // effective count, min(requested, points)
  std::size_t iterations = 0;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(num_clusters, 0);
    for (auto c : cluster_of) ++s[c];
    return s;
  }
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

inline constexpr std::size_t kKmeansMaxIterations = 100;

/// Lloyd's algorithm with Euclidean distance.
///
/// Initialization is farthest-point: the first centroid is point
/// `seed % size` (the top-ranked document for seed 0), each further centroid
/// the point farthest from those chosen, lowest index on ties. Assignment ties
/// go to the lowest cluster index; an empty cluster takes the point farthest
/// from its own centroid among clusters with more than one member. Clusters
/// are finally relabeled in order of first appearance, so point 0 is always
/// in cluster 0.
inline ClusterAssignment kmeans_points(const std::vector<std::vector<double>>& points, std::size_t num_clusters,
                                       std::uint64_t seed = 0) {
  if (num_clusters == 0) throw std::invalid_argument("kmeans: num_clusters must be >= 1");
  ClusterAssignment out;
  const std::size_t n = points.size();
  if (n == 0) return out;
  const std::size_t k = std::min(num_clusters, n);
  out.num_clusters = k;

  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(seed % n);
  while (true) {
    centroids.push_back(points[pick]);
    chosen[pick] = true;
    if (centroids.size() == k) break;
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], detail::squared_distance(points[i], points[pick]));
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (best == n || nearest[i] > nearest[best]) best = i;
    }
    pick = best;
  }

  std::vector<std::size_t> assign(n, k);
  for (std::size_t iter = 1; iter <= kKmeansMaxIterations; ++iter) {
    out.iterations = iter;
    std::vector<std::size_t> next(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = detail::squared_distance(points[i], centroids[c]);
        if (d < best) {
          best = d;
          next[i] = c;
        }
      }
    }
    std::vector<std::size_t> counts(k, 0);
    for (auto c : next) ++counts[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t donor = n;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[next[i]] < 2) continue;
        const double d = detail::squared_distance(points[i], centroids[next[i]]);
        if (d > far) {
          far = d;
          donor = i;
        }
      }
      --counts[next[donor]];
      next[donor] = c;
      counts[c] = 1;
      centroids[c] = points[donor];
    }
    const bool converged = next == assign;
    assign = std::move(next);
    if (converged) break;
    for (std::size_t c = 0; c < k; ++c) std::fill(centroids[c].begin(), centroids[c].end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& cen = centroids[assign[i]];
      for (std::size_t d = 0; d < cen.size(); ++d) cen[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (auto& v : centroids[c]) v /= static_cast<double>(counts[c]);
  }

  std::vector<std::size_t> relabel(k, k);
  std::size_t next_label = 0;
  for (auto c : assign)
    if (relabel[c] == k) relabel[c] = next_label++;
  out.cluster_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.cluster_of[i] = relabel[assign[i]];
  return out;
}

/// K-Means over TF-IDF vectors (in pool order), densified over the pool
/// vocabulary.
inline ClusterAssignment kmeans(const TfidfVectors& vectors, std::size_t num_clusters, std::uint64_t seed = 0) {
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < vectors.vocabulary.size(); ++i) column.emplace(vectors.vocabulary[i], i);
  std::vector<std::vector<double>> points(vectors.size(), std::vector<double>(vectors.vocabulary.size(), 0.0));
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (const auto& [term, w] : vectors.vectors[i].weights) points[i][column.at(term)] = w;
  return kmeans_points(points, num_clusters, seed);
}

// ---------------------------------------------------------------------------
// Allocation and selection

/// Splits l picks across clusters in proportion to their sizes by the
/// largest-remainder method: floor every quota size_i * l / k, then hand the
/// leftover units one at a time to the largest fractional remainders, ties
/// going to the lower `priority` value (the rank of the cluster's best
/// document; cluster index when empty). Picks never exceed a cluster's size.
inline std::vector<std::size_t> proportional_allocation(const std::vector<std::size_t>& sizes, std::size_t l,
                                                        std::vector<std::size_t> priority = {}) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (priority.empty()) {
    priority.resize(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) priority[i] = i;
  }
  if (priority.size() != sizes.size()) throw std::invalid_argument("allocation: priority size mismatch");
  std::vector<std::size_t> alloc(sizes.size(), 0);
  if (total == 0 || l == 0) return alloc;
  l = std::min(l, total);

  // Quota numerators over the common denominator `total`.
  std::vector<std::size_t> remainder(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    alloc[i] = std::min(sizes[i], sizes[i] * l / total);
    remainder[i] = sizes[i] * l - alloc[i] * total;
    assigned += alloc[i];
  }
  std::vector<std::size_t> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return priority[a] < priority[b];
  });
  while (assigned < l) {
    for (auto i : order) {
      if (assigned == l) break;
      if (alloc[i] < sizes[i]) {
        ++alloc[i];
        ++assigned;
      }
    }
  }
  return alloc;
}

/// Takes the allocation_i best-ranked members of each cluster and returns
/// them in pool order.
inline RankedList diversity_select(const RankedList& pool, const std::vector<std::size_t>& cluster_of,
                                   const std::vector<std::size_t>& allocation) {
  if (cluster_of.size() != pool.size()) throw std::invalid_argument("diversity_select: assignment size mismatch");
  std::vector<std::size_t> taken(allocation.size(), 0);
  RankedList out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto c = cluster_of[i];
    if (c >= allocation.size()) throw std::invalid_argument("diversity_select: cluster without allocation");
    if (taken[c] < allocation[c]) {
      ++taken[c];
      out.push_back(pool[i]);
    }
  }
  return out;
}

/// Dense top-max(n, depth) re-ranked by BM25+ and cut to depth, with no
/// clustering.
inline RankedList hybrid_search(const std::string& query, const DenseIndex& index, const EmbeddingProvider& provider,
                                const ChunkStore& chunks, std::size_t n, std::size_t depth, const Bm25Params& bm25 = {},
                                const Stoplist& stoplist = Stoplist::english()) {
  auto ranked = rerank_bm25(query, dense_search(query, index, provider, std::max(n, depth)), chunks, bm25, stoplist);
  if (ranked.size() > depth) ranked.resize(depth);
  return ranked;
}

/// Every intermediate ranking of one retrieval, for explanation and tests.
struct RetrievalTrace {
  RankedList dense;  // top-n by inner product
  RankedList bm25;   // dense list re-ranked by BM25+
  RankedList pool;   // top-k of the BM25+ list
  ClusterAssignment clusters;
  std::vector<std::size_t> allocation;
  RankedList final;  // at most l documents, pool order
};

inline RetrievalTrace retrieve(const std::string& query, const PipelineConfig& cfg, const DenseIndex& index,
                               const EmbeddingProvider& provider, const ChunkStore& chunks,
                               const Stoplist& stoplist = Stoplist::english()) {
  cfg.validate();
  RetrievalTrace trace;
  trace.dense = dense_search(query, index, provider, cfg.n);
  if (trace.dense.empty()) return trace;
  trace.bm25 = rerank_bm25(query, trace.dense, chunks, cfg.bm25, stoplist);
  trace.pool.assign(trace.bm25.begin(), trace.bm25.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.k, trace.bm25.size())));
  if (trace.pool.size() <= cfg.l) {
    trace.clusters.num_clusters = 1;
    trace.clusters.cluster_of.assign(trace.pool.size(), 0);
    trace.allocation = {trace.pool.size()};
    trace.final = trace.pool;
    return trace;
  }
  const auto features = tfidf_vectors(chunk_ids(trace.pool), chunks, stoplist);
  trace.clusters = kmeans(features, std::min(cfg.num_clusters, trace.pool.size()), cfg.kmeans_seed);
  // Relabeled clusters are numbered by their best-ranked member, so the
  // default priority (cluster index) is the rank tie-break.
  trace.allocation = proportional_allocation(trace.clusters.sizes(), cfg.l);
  trace.final = diversity_select(trace.pool, trace.clusters.cluster_of, trace.allocation);
  return trace;
}

}  // namespace odqa
