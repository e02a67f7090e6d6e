#pragma once

// Extractive reading: per-token start/end scores from a span-scorer provider,
// selection of up to m non-overlapping spans, and confidence re-ranking of the
// retrieved documents.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "odqa/corpus.hpp"
#include "odqa/dense.hpp"
#include "odqa/errors.hpp"
#include "odqa/lexical.hpp"
#include "odqa/ranked_list.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"

namespace odqa {

struct SpanScores {
  std::vector<double> start;
  std::vector<double> end;
  std::vector<CharSpan> offsets;  // token -> bytes of the chunk text

  std::size_t size() const noexcept { return offsets.size(); }

  void validate(std::size_t text_size) const {
    if (start.size() != offsets.size() || end.size() != offsets.size())
      throw ProviderError("span scores: start/end/offset lengths differ");
    for (const auto& o : offsets)
      if (o.begin > o.end || o.end > text_size) throw ProviderError("span scores: token offset outside passage");
  }
};

struct AnswerSpan {
  std::size_t start_token = 0;
  std::size_t end_token = 0;  // inclusive
  std::size_t start_char = 0;
  std::size_t end_char = 0;  // exclusive
  double start_score = 0.0;
  double end_score = 0.0;
  double confidence = 0.0;  // start_score + end_score
  std::string text;

  std::size_t length() const noexcept { return end_token - start_token + 1; }
  bool overlaps(const AnswerSpan& o) const noexcept {
    return start_token <= o.end_token && o.start_token <= end_token;
  }
};

struct AnsweredDocument {
  RankedEntry retrieval;
  std::size_t retrieval_rank = 0;  // 0-based position in the retrieved list
  std::vector<AnswerSpan> spans;   // descending confidence, non-overlapping
  double doc_confidence = 0.0;     // confidence of spans.front()
  std::string error;               // provider failure for this document

  bool answered() const noexcept { return !spans.empty(); }
};

// ---------------------------------------------------------------------------
// Span scorers

class SpanScorer {
 public:
  virtual ~SpanScorer() = default;

  virtual std::string name() const = 0;

  /// Scores for each passage, or a ProviderError. Implementations that can
  /// fail per passage report it through `errors` (same length as passages,
  /// empty string = success).
  virtual std::vector<SpanScores> score(const std::string& question, std::span<const PassageChunk* const> passages,
                                        std::vector<std::string>& errors) const = 0;

  virtual bool reachable() const { return true; }
};

struct BaselineScorerParams {
  std::size_t window = 10;
  double decay = 0.9;
};

/// match(j) = 1 when token j is a non-stopword that occurs among the question's
/// content tokens. start(i) sums match(j) * decay^(j-i) over the window that
/// begins at i; end(i) sums match(j) * decay^(i-j) over the window ending at i.
inline SpanScores baseline_span_scores(std::string_view question, std::string_view passage,
                                       const Stoplist& stoplist = Stoplist::english(),
                                       const BaselineScorerParams& params = {}) {
  std::unordered_set<std::string> wanted;
  for (auto& t : content_tokens(question, stoplist)) wanted.insert(std::move(t));
  const auto tokens = tokenize_with_offsets(passage);
  const std::size_t n = tokens.size();
  std::vector<double> match(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (!stoplist.contains(tokens[j].text) && wanted.count(tokens[j].text)) match[j] = 1.0;

  SpanScores s;
  s.start.assign(n, 0.0);
  s.end.assign(n, 0.0);
  s.offsets.reserve(n);
  for (const auto& t : tokens) s.offsets.push_back({t.begin, t.end});
  const std::size_t w = std::max<std::size_t>(1, params.window);
  for (std::size_t i = 0; i < n; ++i) {
    double weight = 1.0;
    for (std::size_t j = i; j < std::min(n, i + w); ++j, weight *= params.decay) s.start[i] += match[j] * weight;
    weight = 1.0;
    for (std::size_t j = i + 1; j-- > (i + 1 >= w ? i + 1 - w : 0);) {
      s.end[i] += match[j] * weight;
      weight *= params.decay;
    }
  }
  return s;
}

class BaselineSpanScorer final : public SpanScorer {
 public:
  explicit BaselineSpanScorer(const Stoplist& stoplist = Stoplist::english(), BaselineScorerParams params = {})
      : stoplist_(stoplist), params_(params) {}

  std::string name() const override { return "baseline"; }

  std::vector<SpanScores> score(const std::string& question, std::span<const PassageChunk* const> passages,
                                std::vector<std::string>& errors) const override {
    errors.assign(passages.size(), {});
    std::vector<SpanScores> out;
    out.reserve(passages.size());
    for (const auto* p : passages) out.push_back(baseline_span_scores(question, p->text, stoplist_, params_));
    return out;
  }

 private:
  Stoplist stoplist_;
  BaselineScorerParams params_;
};

/// External reader: POST /score_spans
///   {"question": ..., "passages": [{"id": ..., "text": ...}]}
///   -> {"scores": [{"id": ..., "start": [...], "end": [...], "offsets": [[s, e], ...]}]}
class EndpointSpanScorer final : public SpanScorer {
 public:
  explicit EndpointSpanScorer(std::string url, HttpOptions options = {})
      : url_(std::move(url)), endpoint_(HttpEndpoint::parse(url_)), options_(options) {}

  std::string name() const override { return "endpoint:" + url_; }

  std::vector<SpanScores> score(const std::string& question, std::span<const PassageChunk* const> passages,
                                std::vector<std::string>& errors) const override {
    nlohmann::json body;
    body["question"] = question;
    body["passages"] = nlohmann::json::array();
    for (const auto* p : passages) body["passages"].push_back({{"id", p->chunk_id}, {"text", p->text}});
    const auto reply = post_json(endpoint_, "/score_spans", body, options_.timeout);

    std::unordered_map<std::string, const nlohmann::json*> by_id;
    if (reply.contains("scores") && reply["scores"].is_array())
      for (const auto& s : reply["scores"])
        if (s.contains("id") && s["id"].is_string()) by_id[s["id"].get<std::string>()] = &s;

    errors.assign(passages.size(), {});
    std::vector<SpanScores> out(passages.size());
    for (std::size_t i = 0; i < passages.size(); ++i) {
      auto it = by_id.find(passages[i]->chunk_id);
      if (it == by_id.end()) {
        errors[i] = "reader endpoint returned no scores for this passage";
        continue;
      }
      try {
        const auto& j = *it->second;
        SpanScores s;
        s.start = j.at("start").get<std::vector<double>>();
        s.end = j.at("end").get<std::vector<double>>();
        for (const auto& o : j.at("offsets")) s.offsets.push_back({o.at(0).get<std::size_t>(), o.at(1).get<std::size_t>()});
        s.validate(passages[i]->text.size());
        out[i] = std::move(s);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    return out;
  }

  bool reachable() const override {
    try {
      const PassageChunk probe{"probe", "", "probe", 1, {0, 5}, "", std::nullopt, ""};
      const PassageChunk* ptr = &probe;
      std::vector<std::string> errors;
      score("probe", std::span<const PassageChunk* const>(&ptr, 1), errors);
      return true;
    } catch (const ProviderError&) {
      return false;
    }
  }

 private:
  std::string url_;
  HttpEndpoint endpoint_;
  HttpOptions options_;
};

/// Uses `primary` and switches to `fallback` for any request the primary
/// fails outright (transport errors), remembering that it did.
class FallbackSpanScorer final : public SpanScorer {
 public:
  FallbackSpanScorer(std::unique_ptr<SpanScorer> primary, std::unique_ptr<SpanScorer> fallback)
      : primary_(std::move(primary)), fallback_(std::move(fallback)) {}

  std::string name() const override { return primary_->name() + " (fallback: " + fallback_->name() + ")"; }

  std::vector<SpanScores> score(const std::string& question, std::span<const PassageChunk* const> passages,
                                std::vector<std::string>& errors) const override {
    try {
      return primary_->score(question, passages, errors);
    } catch (const ProviderError&) {
      fell_back_ = true;
      return fallback_->score(question, passages, errors);
    }
  }

  bool reachable() const override { return primary_->reachable(); }
  bool fell_back() const noexcept { return fell_back_; }
  const SpanScorer& primary() const noexcept { return *primary_; }

 private:
  std::unique_ptr<SpanScorer> primary_;
  std::unique_ptr<SpanScorer> fallback_;
  mutable std::atomic<bool> fell_back_{false};
};

inline std::unique_ptr<SpanScorer> make_span_scorer(std::string_view spec, const Stoplist& stoplist = Stoplist::english(),
                                                    HttpOptions http = {}) {
  if (spec == "baseline") return std::make_unique<BaselineSpanScorer>(stoplist);
  if (spec.starts_with("endpoint:")) return std::make_unique<EndpointSpanScorer>(std::string(spec.substr(9)), http);
  throw std::invalid_argument("unknown span scorer: " + std::string(spec));
}

// ---------------------------------------------------------------------------
// Selection

namespace detail {

inline std::vector<std::size_t> top_positions(const std::vector<double>& scores, std::size_t breadth) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (breadth == 0 || breadth >= idx.size()) return idx;
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(breadth), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(breadth);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

struct SpanSelection {
  std::size_t m = 3;
  std::size_t max_span_len = 50;
  /// Start and end positions considered: the `candidate_breadth` best of
  /// each. 0 considers every position.
  std::size_t candidate_breadth = 0;
};

/// Ranks (start, end) candidates with start <= end and length <= max_span_len
/// by start + end score (ties: shorter span, then earlier start) and greedily
/// keeps those not overlapping an already accepted span, up to m. Spans whose
/// combined score is <= 0 are never returned. `text` is left empty.
inline std::vector<AnswerSpan> select_spans(const SpanScores& scores, const SpanSelection& sel) {
  if (sel.m == 0) throw std::invalid_argument("select_spans: m must be >= 1");
  if (sel.max_span_len == 0) throw std::invalid_argument("select_spans: max_span_len must be >= 1");
  const std::size_t n = scores.size();
  if (scores.start.size() != n || scores.end.size() != n)
    throw std::invalid_argument("select_spans: score arrays differ in length");

  const auto starts = detail::top_positions(scores.start, sel.candidate_breadth);
  const auto ends = detail::top_positions(scores.end, sel.candidate_breadth);
  struct Candidate {
    double confidence;
    std::size_t s, e;
  };
  std::vector<Candidate> cands;
  for (auto s : starts) {
    for (auto e : ends) {
      if (e < s || e - s + 1 > sel.max_span_len) continue;
      const double conf = scores.start[s] + scores.end[e];
      if (!(conf > 0.0)) continue;
      cands.push_back({conf, s, e});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.e - a.s != b.e - b.s) return a.e - a.s < b.e - b.s;
    return a.s < b.s;
  });

  std::vector<AnswerSpan> out;
  for (const auto& c : cands) {
    if (out.size() == sel.m) break;
    AnswerSpan span;
    span.start_token = c.s;
    span.end_token = c.e;
    if (std::any_of(out.begin(), out.end(), [&](const AnswerSpan& a) { return a.overlaps(span); })) continue;
    span.start_char = scores.offsets[c.s].begin;
    span.end_char = scores.offsets[c.e].end;
    span.start_score = scores.start[c.s];
    span.end_score = scores.end[c.e];
    span.confidence = c.confidence;
    out.push_back(std::move(span));
  }
  return out;
}

inline std::vector<AnswerSpan> select_spans(const SpanScores& scores, std::size_t m, std::size_t max_span_len) {
  return select_spans(scores, SpanSelection{m, max_span_len, 0});
}

/// Fills span text from the passage the scores were computed on.
inline void attach_text(std::vector<AnswerSpan>& spans, std::string_view passage) {
  for (auto& s : spans) s.text = std::string(passage.substr(s.start_char, s.end_char - s.start_char));
}

/// Reads every retrieved document, then orders them by the confidence of
/// their top span (descending, retrieval order on ties). Documents without
/// spans, including those the provider failed on, follow all answered ones in
/// retrieval order.
inline std::vector<AnsweredDocument> answer_documents(const std::string& question, const RankedList& docs,
                                                      const ChunkStore& chunks, const SpanScorer& scorer,
                                                      const SpanSelection& sel) {
  std::vector<AnsweredDocument> out(docs.size());
  std::vector<const PassageChunk*> passages;
  passages.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out[i].retrieval = docs[i];
    out[i].retrieval_rank = i;
    passages.push_back(&chunks.at(docs[i].chunk_id));
  }

  std::vector<SpanScores> scores;
  std::vector<std::string> errors;
  try {
    scores = scorer.score(question, passages, errors);
  } catch (const ProviderError& e) {
    scores.assign(docs.size(), {});
    errors.assign(docs.size(), e.what());
  }
  if (scores.size() != docs.size()) {
    scores.assign(docs.size(), {});
    errors.assign(docs.size(), "span scorer returned a result of the wrong size");
  }

  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i < errors.size() && !errors[i].empty()) {
      out[i].error = errors[i];
      continue;
    }
    out[i].spans = select_spans(scores[i], sel);
    attach_text(out[i].spans, passages[i]->text);
    if (!out[i].spans.empty()) out[i].doc_confidence = out[i].spans.front().confidence;
  }
  std::stable_sort(out.begin(), out.end(), [](const AnsweredDocument& a, const AnsweredDocument& b) {
    if (a.answered() != b.answered()) return a.answered();
    return a.doc_confidence > b.doc_confidence;
  });
  return out;
}

}  // namespace odqa
