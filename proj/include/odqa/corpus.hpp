#pragma once

// Article ingestion: passage chunking, QA-to-retrieval transformation and
// dataset partitioning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "odqa/date.hpp"
#include "odqa/errors.hpp"
#include "odqa/text.hpp"

namespace odqa {

struct Article {
  std::string article_id;
  std::string title;
  std::string journal;
  std::optional<Date> publish_date;
  std::vector<std::string> paragraphs;
};

struct PassageChunk {
  std::string chunk_id;
  std::string article_id;
  std::string text;
  std::size_t token_count = 0;
  CharSpan span_in_article;  // into article_body()
  std::string journal;
  std::optional<Date> publish_date;
  std::string title;
};

enum class Split { train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

struct QAPair {
  std::string question_id;
  std::string question;
  std::string answer;
  std::string context_article_id;
  std::optional<Split> split;
};

struct RetrievalSample {
  std::string question_id;
  std::string question;
  std::vector<std::string> positive_chunk_ids;  // article order
  std::vector<std::string> negative_chunk_ids;
};

/// Inserted between paragraphs when an article body is reconstructed.
inline constexpr std::string_view kBlockSeparator = "\n\n";

inline std::string article_body(const Article& article) {
  std::string body;
  for (std::size_t i = 0; i < article.paragraphs.size(); ++i) {
    if (i > 0) body.append(kBlockSeparator);
    body.append(article.paragraphs[i]);
  }
  return body;
}

inline std::string make_chunk_id(std::string_view article_id, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%04zu", index);
  return std::string(article_id) + buf;
}

namespace detail {

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Cut inside (r.begin, r.end) nearest to the middle, preferring the given
// boundary flags; falls back to the middle token when no flagged cut exists.
inline std::size_t cut_near_middle(TokenRange r, const std::vector<bool>& boundary, std::size_t lo,
                                   std::size_t hi) {
  const double mid = (static_cast<double>(r.begin) + static_cast<double>(r.end)) / 2.0;
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = lo; c <= hi; ++c) {
    if (!boundary[c]) continue;
    const double dist = std::abs(static_cast<double>(c) - mid);
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  if (best != 0) return best;
  const auto m = static_cast<std::size_t>(std::ceil(mid));
  return std::clamp(m, lo, hi);
}

inline void split_oversize(TokenRange r, std::size_t max_tokens, const std::vector<bool>& boundary,
                           std::vector<TokenRange>& out) {
  if (r.size() <= max_tokens) {
    out.push_back(r);
    return;
  }
  const std::size_t cut = cut_near_middle(r, boundary, r.begin + 1, r.end - 1);
  split_oversize({r.begin, cut}, max_tokens, boundary, out);
  split_oversize({cut, r.end}, max_tokens, boundary, out);
}

}  // namespace detail

/// Splits an article into passages of [min_tokens, max_tokens] tokens.
///
/// Paragraphs longer than max_tokens are halved recursively at the sentence
/// boundary nearest the middle. Consecutive blocks are then merged until the
/// accumulator holds at least min_tokens; when the next block would overflow
/// max_tokens the combined run is cut at a sentence boundary inside
/// [min_tokens, max_tokens], nearest its middle. Only the last chunk of an
/// article may fall below min_tokens.
inline std::vector<PassageChunk> chunk_article(const Article& article, std::size_t min_tokens = 100,
                                               std::size_t max_tokens = 200) {
  if (min_tokens >= max_tokens) throw std::invalid_argument("chunk_article: min_tokens must be < max_tokens");
  if (max_tokens == 0) throw std::invalid_argument("chunk_article: max_tokens must be positive");
  if (article.paragraphs.empty()) return {};

  const std::string body = article_body(article);
  const auto tokens = tokenize_with_offsets(body);
  const std::size_t n = tokens.size();

  auto make_chunk = [&](std::size_t index, CharSpan span, std::size_t token_count) {
    PassageChunk c;
    c.chunk_id = make_chunk_id(article.article_id, index);
    c.article_id = article.article_id;
    c.text = body.substr(span.begin, span.size());
    c.token_count = token_count;
    c.span_in_article = span;
    c.journal = article.journal;
    c.publish_date = article.publish_date;
    c.title = article.title;
    return c;
  };

  if (n == 0) {
    const std::size_t begin = skip_space(body, 0);
    const std::size_t end = trim_end(body);
    if (begin >= end) return {};
    return {make_chunk(0, {begin, end}, 0)};
  }

  // boundary[t]: a cut before token t ends a sentence or paragraph.
  std::vector<bool> boundary(n + 1, false);
  for (std::size_t t = 1; t < n; ++t) boundary[t] = is_sentence_boundary(body, tokens, t);

  std::vector<detail::TokenRange> paragraphs;
  {
    std::size_t char_pos = 0;
    std::size_t t = 0;
    for (const auto& p : article.paragraphs) {
      const std::size_t p_end = char_pos + p.size();
      const std::size_t first = t;
      while (t < n && tokens[t].begin < p_end) ++t;
      if (t > first) {
        paragraphs.push_back({first, t});
        if (first > 0) boundary[first] = true;
      }
      char_pos = p_end + kBlockSeparator.size();
    }
  }

  std::vector<detail::TokenRange> blocks;
  for (const auto& p : paragraphs) detail::split_oversize(p, max_tokens, boundary, blocks);

  std::vector<detail::TokenRange> chunks;
  std::optional<detail::TokenRange> acc;
  for (const auto& block : blocks) {
    if (!acc) {
      acc = block;
    } else if (acc->size() + block.size() <= max_tokens) {
      acc->end = block.end;
    } else {
      // acc holds fewer than min_tokens here; cut the combined run.
      const detail::TokenRange combined{acc->begin, block.end};
      const std::size_t lo = combined.begin + min_tokens;
      const std::size_t hi = std::min(combined.begin + max_tokens, combined.end - 1);
      const std::size_t cut = detail::cut_near_middle(combined, boundary, lo, hi);
      chunks.push_back({combined.begin, cut});
      acc = detail::TokenRange{cut, combined.end};
    }
    if (acc->size() >= min_tokens) {
      chunks.push_back(*acc);
      acc.reset();
    }
  }
  if (acc) {
    if (!chunks.empty() && chunks.back().size() + acc->size() <= max_tokens) {
      chunks.back().end = acc->end;
    } else {
      chunks.push_back(*acc);
    }
  }

  std::vector<std::size_t> cuts;
  for (std::size_t i = 1; i < chunks.size(); ++i) cuts.push_back(chunks[i].begin);
  const auto spans = segment_spans(body, tokens, cuts);

  std::vector<PassageChunk> out;
  out.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) out.push_back(make_chunk(i, spans[i], chunks[i].size()));
  return out;
}

/// Random-access chunk storage keyed by chunk id, preserving insertion order.
class ChunkStore {
 public:
  ChunkStore() = default;

  explicit ChunkStore(std::vector<PassageChunk> chunks) {
    for (auto& c : chunks) add(std::move(c));
  }

  void add(PassageChunk chunk) {
    if (by_id_.count(chunk.chunk_id)) throw std::invalid_argument("duplicate chunk id: " + chunk.chunk_id);
    by_id_.emplace(chunk.chunk_id, chunks_.size());
    chunks_.push_back(std::move(chunk));
  }

  const PassageChunk* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
  }

  const PassageChunk& at(std::string_view id) const {
    if (const auto* c = find(id)) return *c;
    throw std::out_of_range("unknown chunk id: " + std::string(id));
  }

  const std::vector<PassageChunk>& chunks() const noexcept { return chunks_; }
  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }

 private:
  std::vector<PassageChunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct RetrievalSampleSet {
  std::vector<RetrievalSample> samples;
  std::size_t dropped = 0;  // answer found in no chunk of its article
};

/// Positives are the chunks of the context article containing the answer
/// under case-insensitive, whitespace-normalized matching; negatives are the
/// article's remaining chunks.
inline RetrievalSampleSet build_retrieval_samples(const std::vector<QAPair>& qa,
                                                  const std::vector<PassageChunk>& chunks) {
  std::unordered_map<std::string, std::vector<std::pair<const PassageChunk*, std::string>>> by_article;
  for (const auto& c : chunks) by_article[c.article_id].emplace_back(&c, normalize_whitespace_lower(c.text));

  RetrievalSampleSet out;
  for (const auto& pair : qa) {
    auto it = by_article.find(pair.context_article_id);
    if (it == by_article.end())
      throw std::invalid_argument("no chunks for context article " + pair.context_article_id);
    const std::string needle = normalize_whitespace_lower(pair.answer);
    RetrievalSample sample{pair.question_id, pair.question, {}, {}};
    for (const auto& [chunk, normalized] : it->second) {
      const bool hit = !needle.empty() && normalized.find(needle) != std::string::npos;
      (hit ? sample.positive_chunk_ids : sample.negative_chunk_ids).push_back(chunk->chunk_id);
    }
    if (sample.positive_chunk_ids.empty()) {
      ++out.dropped;
      continue;
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

struct SplitOptions {
  /// Test questions containing any of these phrases are dropped from the
  /// test set (matched on token sequences, case-insensitive).
  std::vector<std::string> document_specific_phrases = {"this study", "this paper", "this article",
                                                        "this review"};
};

struct DatasetSplit {
  std::vector<QAPair> train;
  std::vector<QAPair> dev;
  std::vector<QAPair> test;
  std::vector<QAPair> excluded;  // document-specific questions removed from test
};

/// Set sizes before document-specific filtering: train and dev are 70% and
/// 10% of n rounded to nearest, test takes the remainder.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

inline SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = (7 * n + 5) / 10;
  s.dev = (n + 5) / 10;
  s.test = n - s.train - s.dev;
  return s;
}

inline bool is_document_specific(std::string_view question, const std::vector<std::string>& phrases) {
  const auto q = tokenize(question);
  for (const auto& phrase : phrases) {
    const auto p = tokenize(phrase);
    if (p.empty() || p.size() > q.size()) continue;
    if (std::search(q.begin(), q.end(), p.begin(), p.end()) != q.end()) return true;
  }
  return false;
}

/// Uniform integer in [0, bound) from a 64-bit engine, without modulo bias.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// Fisher-Yates over an mt19937_64 stream; reproducible on every platform
/// (std::shuffle's algorithm is implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded_draw(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

inline DatasetSplit split_dataset(std::vector<QAPair> qa, std::uint64_t seed,
                                  const SplitOptions& options = {}) {
  seeded_shuffle(qa, seed);
  const auto sizes = split_sizes(qa.size());
  DatasetSplit out;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    auto& pair = qa[i];
    if (i < sizes.train) {
      pair.split = Split::train;
      out.train.push_back(std::move(pair));
    } else if (i < sizes.train + sizes.dev) {
      pair.split = Split::dev;
      out.dev.push_back(std::move(pair));
    } else if (is_document_specific(pair.question, options.document_specific_phrases)) {
      pair.split.reset();
      out.excluded.push_back(std::move(pair));
    } else {
      pair.split = Split::test;
      out.test.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace odqa
