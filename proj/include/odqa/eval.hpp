#pragma once

// Retrieval and reader metrics: token F1, exact match, the fuzzy-match
// judgment of a retrieved passage against a gold answer, and FM@k.

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "odqa/corpus.hpp"
#include "odqa/dense.hpp"
#include "odqa/reader.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"

namespace odqa {

/// SQuAD-style multiset overlap F1; 0 when either side is empty or nothing
/// overlaps.
inline double token_f1(const std::vector<std::string>& prediction, const std::vector<std::string>& gold) {
  if (prediction.empty() || gold.empty()) return 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  std::size_t overlap = 0;
  for (const auto& t : prediction) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(prediction.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

inline std::vector<std::string> squad_tokens(std::string_view text) { return split_on_spaces(normalize_answer(text)); }

inline int exact_match(std::string_view prediction, std::string_view gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

inline double answer_f1(std::string_view prediction, std::string_view gold) {
  return token_f1(squad_tokens(prediction), squad_tokens(gold));
}

/// Best F1 and EM over a document's returned spans; 0 when there are none.
struct SpanScore {
  double f1 = 0.0;
  int em = 0;
};

inline SpanScore best_span_score(const std::vector<AnswerSpan>& spans, std::string_view gold) {
  SpanScore best;
  for (const auto& s : spans) {
    best.f1 = std::max(best.f1, answer_f1(s.text, gold));
    best.em = std::max(best.em, exact_match(s.text, gold));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Fuzzy matching

enum class CompareAgainst { answer, question };

struct FuzzyMatchConfig {
  double a = 0.75;  // cosine threshold, condition 1
  double b = 0.60;  // cosine threshold, condition 2 (with F1 >= c)
  double c = 0.50;  // F1 threshold, condition 2
  double d = 0.80;  // F1 threshold, condition 3 (short answers only)
  std::size_t short_answer_max_tokens = 3;
  CompareAgainst compare_against = CompareAgainst::answer;

  void validate() const {
    for (double v : {a, b, c, d})
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("fuzzy match: thresholds must lie in [0, 1]");
    if (b > a) throw std::invalid_argument("fuzzy match: b must not exceed a");
    if (c > d) throw std::invalid_argument("fuzzy match: c must not exceed d");
  }

  nlohmann::json to_json() const {
    return {{"a", a},
            {"b", b},
            {"c", c},
            {"d", d},
            {"short_answer_max_tokens", short_answer_max_tokens},
            {"compare_against", compare_against == CompareAgainst::answer ? "answer" : "question"}};
  }
};

struct RetrievalJudgment {
  std::string question_id;
  std::string chunk_id;
  bool positive = false;
  int condition = 0;                // lowest condition that fired, 0 = none
  std::array<bool, 3> fired{};      // conditions fired on the deciding sentence
  std::optional<std::size_t> sentence;  // index of the deciding sentence
};

/// Judges passages against answers. Sentence splits and embeddings are cached
/// per chunk id, so one matcher should be reused across a whole run.
/// Thread-safe.
class FuzzyMatcher {
 public:
  FuzzyMatcher(const EmbeddingProvider& encoder, FuzzyMatchConfig cfg, const Stoplist& stoplist = Stoplist::english())
      : encoder_(encoder), cfg_(cfg), stoplist_(stoplist) {
    cfg_.validate();
  }

  const FuzzyMatchConfig& config() const noexcept { return cfg_; }

  /// Condition 1: cos(sentence, target) >= a. Condition 2: cos >= b and
  /// F1(sentence, answer) >= c. Condition 3: the answer has at most
  /// short_answer_max_tokens tokens and F1 >= d. Cosines are clamped at 0;
  /// F1 is over stopword-filtered tokens. `target` is the answer, or the
  /// question when compare_against says so.
  RetrievalJudgment judge(std::string_view answer, std::string_view question, const PassageChunk& chunk) const {
    RetrievalJudgment j;
    j.chunk_id = chunk.chunk_id;
    const auto& doc = sentences_of(chunk);
    if (doc.sentences.empty()) return j;

    const std::string target(cfg_.compare_against == CompareAgainst::answer ? answer : question);
    const auto target_vec = embedding_of(target);
    const auto answer_tokens = content_tokens(answer, stoplist_);
    const bool short_answer = count_tokens(answer) <= cfg_.short_answer_max_tokens;

    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const double cos = std::max(0.0, cosine(doc.embeddings[i], target_vec));
      const double f1 = token_f1(doc.tokens[i], answer_tokens);
      const std::array<bool, 3> fired{cos >= cfg_.a, cos >= cfg_.b && f1 >= cfg_.c, short_answer && f1 >= cfg_.d};
      if (fired[0] || fired[1] || fired[2]) {
        j.positive = true;
        j.fired = fired;
        j.condition = fired[0] ? 1 : fired[1] ? 2 : 3;
        j.sentence = i;
        return j;
      }
    }
    return j;
  }

 private:
  struct SentenceCache {
    std::vector<std::string> sentences;
    std::vector<Embedding> embeddings;
    std::vector<std::vector<std::string>> tokens;
  };

  const SentenceCache& sentences_of(const PassageChunk& chunk) const {
    std::lock_guard lock(mu_);
    auto it = by_chunk_.find(chunk.chunk_id);
    if (it != by_chunk_.end()) return it->second;
    SentenceCache cache;
    for (const auto& span : split_sentences(chunk.text)) cache.sentences.push_back(chunk.text.substr(span.begin, span.size()));
    if (!cache.sentences.empty()) cache.embeddings = encoder_.embed(cache.sentences);
    for (const auto& s : cache.sentences) cache.tokens.push_back(content_tokens(s, stoplist_));
    return by_chunk_.emplace(chunk.chunk_id, std::move(cache)).first->second;
  }

  Embedding embedding_of(const std::string& text) const {
    std::lock_guard lock(mu_);
    auto it = by_text_.find(text);
    if (it != by_text_.end()) return it->second;
    return by_text_.emplace(text, encoder_.embed_one(text)).first->second;
  }

  const EmbeddingProvider& encoder_;
  FuzzyMatchConfig cfg_;
  Stoplist stoplist_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, SentenceCache> by_chunk_;
  mutable std::unordered_map<std::string, Embedding> by_text_;
};

inline RetrievalJudgment fuzzy_match(std::string_view answer, const PassageChunk& document, const FuzzyMatchConfig& cfg,
                                     const EmbeddingProvider& encoder, std::string_view question = {}) {
  return FuzzyMatcher(encoder, cfg).judge(answer, question, document);
}

// ---------------------------------------------------------------------------
// FM@k

struct GoldAnswer {
  std::string question;
  std::string answer;
};

using RunFile = std::map<std::string, std::vector<std::string>>;  // question id -> ranked chunk ids
using GoldFile = std::map<std::string, GoldAnswer>;

struct FmReport {
  FuzzyMatchConfig thresholds;
  std::map<std::size_t, double> fm;  // k -> fraction of questions
  std::size_t questions = 0;
  std::size_t missing = 0;
  std::array<std::size_t, 4> condition_histogram{};  // [none, 1, 2, 3] over judged documents
  std::vector<std::string> warnings;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["thresholds"] = thresholds.to_json();
    for (const auto& [k, v] : fm) j["fm"]["FM@" + std::to_string(k)] = v;
    j["questions"] = questions;
    j["missing_questions"] = missing;
    j["condition_histogram"] = {{"none", condition_histogram[0]},
                                {"condition_1", condition_histogram[1]},
                                {"condition_2", condition_histogram[2]},
                                {"condition_3", condition_histogram[3]}};
    j["warnings"] = warnings;
    return j;
  }
};

/// FM@k: share of gold questions whose top-k list holds at least one
/// fuzzy-matched passage. Questions absent from the run count as misses.
inline FmReport fm_at_k(const RunFile& run, const GoldFile& gold, const std::vector<std::size_t>& ks,
                        const FuzzyMatcher& matcher, const ChunkStore& chunks) {
  if (ks.empty()) throw std::invalid_argument("fm_at_k: no cutoffs");
  FmReport report;
  report.thresholds = matcher.config();
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());
  std::map<std::size_t, std::size_t> hits;
  for (auto k : ks) hits[k] = 0;

  for (const auto& [qid, g] : gold) {
    ++report.questions;
    auto it = run.find(qid);
    if (it == run.end()) {
      ++report.missing;
      report.warnings.push_back("question " + qid + " missing from run; counted as a miss");
      continue;
    }
    std::optional<std::size_t> first_hit;
    const auto& ranked = it->second;
    for (std::size_t r = 0; r < std::min(depth, ranked.size()); ++r) {
      const auto* chunk = chunks.find(ranked[r]);
      if (!chunk) {
        report.warnings.push_back("question " + qid + ": unknown chunk " + ranked[r]);
        ++report.condition_histogram[0];
        continue;
      }
      const auto j = matcher.judge(g.answer, g.question, *chunk);
      ++report.condition_histogram[static_cast<std::size_t>(j.condition)];
      if (j.positive && !first_hit) first_hit = r + 1;
    }
    if (first_hit)
      for (auto& [k, h] : hits)
        if (*first_hit <= k) ++h;
  }
  for (const auto& [k, h] : hits)
    report.fm[k] = report.questions == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(report.questions);
  return report;
}

}  // namespace odqa
