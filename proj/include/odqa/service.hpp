#pragma once

// The question-answering service: request validation, retrieval with the
// publication-date filter and its relaxation, reading, and the JSON API.

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "odqa/corpus.hpp"
#include "odqa/date.hpp"
#include "odqa/dense.hpp"
#include "odqa/errors.hpp"
#include "odqa/io.hpp"
#include "odqa/pipeline.hpp"
#include "odqa/reader.hpp"
#include "odqa/text.hpp"

namespace odqa {

inline constexpr std::size_t kMaxTopK = 5;

/// An error with an HTTP status; `stage` names the pipeline stage for 503s.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what, std::string stage = {})
      : Error(what), status_(status), stage_(std::move(stage)) {}
  int status() const noexcept { return status_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  int status_;
  std::string stage_;
};

struct QueryRequest {
  std::string question;
  std::size_t top_k = kMaxTopK;
  std::optional<Date> date_from;
  std::optional<Date> date_to;

  bool date_filter_active() const noexcept { return date_from.has_value() || date_to.has_value(); }

  void validate() const {
    if (normalize_whitespace_lower(question).empty()) throw ServiceError(400, "question must not be empty");
    if (top_k < 1 || top_k > kMaxTopK) throw ServiceError(400, "top_k must be between 1 and 5");
    if (date_from && date_to && *date_to < *date_from) throw ServiceError(400, "date_from must not be after date_to");
  }
};

inline QueryRequest parse_query_request(const nlohmann::json& j) {
  if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
  QueryRequest req;
  if (!j.contains("question") || !j["question"].is_string()) throw ServiceError(400, "question must be a string");
  req.question = j["question"].get<std::string>();
  if (j.contains("top_k") && !j["top_k"].is_null()) {
    if (!j["top_k"].is_number_integer()) throw ServiceError(400, "top_k must be an integer");
    const auto k = j["top_k"].get<long long>();
    if (k < 1 || k > static_cast<long long>(kMaxTopK)) throw ServiceError(400, "top_k must be between 1 and 5");
    req.top_k = static_cast<std::size_t>(k);
  }
  for (const char* field : {"date_from", "date_to"}) {
    if (!j.contains(field) || j[field].is_null()) continue;
    if (!j[field].is_string()) throw ServiceError(400, std::string(field) + " must be a YYYY-MM-DD string");
    const auto s = j[field].get<std::string>();
    if (s.empty()) continue;
    const auto d = parse_date(s);
    if (!d) throw ServiceError(400, std::string("malformed ") + field + " '" + s + "', expected YYYY-MM-DD");
    (std::string_view(field) == "date_from" ? req.date_from : req.date_to) = d;
  }
  req.validate();
  return req;
}

struct Highlight {
  std::size_t start = 0;  // byte offsets into the snippet
  std::size_t end = 0;
  std::string text;
  double confidence = 0.0;
};

struct Provenance {
  std::size_t dense_rank = 0;  // 1-based
  double dense_score = 0.0;
  std::size_t bm25_rank = 0;
  double bm25_score = 0.0;
  std::size_t cluster = 0;
  std::size_t retrieval_rank = 0;
};

struct ResultDocument {
  std::string chunk_id;
  std::string title;
  std::string journal;
  std::optional<Date> publish_date;
  std::string snippet;
  std::vector<Highlight> highlights;  // by start offset
  double doc_confidence = 0.0;
  Provenance provenance;
  std::string reader_error;
};

struct QueryResponse {
  std::vector<ResultDocument> documents;
  bool date_filter_relaxed = false;
  std::vector<std::pair<std::string, double>> timings_ms;  // stage, milliseconds
};

inline nlohmann::json to_json(const ResultDocument& d) {
  nlohmann::json highlights = nlohmann::json::array();
  for (const auto& h : d.highlights)
    highlights.push_back({{"start", h.start}, {"end", h.end}, {"text", h.text}, {"confidence", h.confidence}});
  nlohmann::json j{{"chunk_id", d.chunk_id},
                   {"title", d.title},
                   {"journal", d.journal},
                   {"publish_date", date_to_json(d.publish_date)},
                   {"snippet", d.snippet},
                   {"highlights", std::move(highlights)},
                   {"doc_confidence", d.doc_confidence},
                   {"provenance",
                    {{"dense_rank", d.provenance.dense_rank},
                     {"dense_score", d.provenance.dense_score},
                     {"bm25_rank", d.provenance.bm25_rank},
                     {"bm25_score", d.provenance.bm25_score},
                     {"cluster", d.provenance.cluster},
                     {"retrieval_rank", d.provenance.retrieval_rank}}}};
  if (!d.reader_error.empty()) j["reader_error"] = d.reader_error;
  return j;
}

/// The response body. Timings are deliberately left out so that identical
/// requests produce identical bytes; see server_timing().
inline nlohmann::json to_json(const QueryResponse& r) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : r.documents) docs.push_back(to_json(d));
  return {{"documents", std::move(docs)}, {"date_filter_relaxed", r.date_filter_relaxed}};
}

/// Value for an HTTP Server-Timing header.
inline std::string server_timing(const QueryResponse& r) {
  std::string out;
  for (const auto& [stage, ms] : r.timings_ms) {
    if (!out.empty()) out += ", ";
    char buf[64];
    std::snprintf(buf, sizeof buf, ";dur=%.3f", ms);
    out += stage + buf;
  }
  return out;
}

inline bool date_in_range(const std::optional<Date>& d, const QueryRequest& req) {
  if (!d) return false;
  if (req.date_from && *d < *req.date_from) return false;
  if (req.date_to && *req.date_to < *d) return false;
  return true;
}

class QaService {
 public:
  QaService(ChunkStore chunks, DenseIndex index, std::unique_ptr<EmbeddingProvider> embedder,
            std::unique_ptr<SpanScorer> reader, AppConfig config, Stoplist stoplist = Stoplist::english())
      : embedder_(std::move(embedder)), config_(std::move(config)), stoplist_(std::move(stoplist)) {
    config_.pipeline.validate();
    auto fallback = std::make_unique<BaselineSpanScorer>(stoplist_);
    if (reader && reader->name() != "baseline")
      reader_ = std::make_unique<FallbackSpanScorer>(std::move(reader), std::move(fallback));
    else
      reader_ = std::move(fallback);
    install(std::move(chunks), std::move(index));
  }

  /// Swaps in a new corpus and index once in-flight queries have finished.
  void reload(ChunkStore chunks, DenseIndex index) {
    std::unique_lock lock(mu_);
    install(std::move(chunks), std::move(index));
  }

  /// Empty when the service can answer queries, otherwise why not.
  std::string refusal() const {
    std::shared_lock lock(mu_);
    return refusal_;
  }

  QueryResponse handle_query(const QueryRequest& req) const {
    req.validate();
    std::shared_lock lock(mu_);
    if (!refusal_.empty()) throw ServiceError(503, "service refuses queries: " + refusal_, "startup");

    using clock = std::chrono::steady_clock;
    QueryResponse resp;
    auto mark = clock::now();
    auto lap = [&](const char* stage) {
      const auto now = clock::now();
      resp.timings_ms.emplace_back(stage, std::chrono::duration<double, std::milli>(now - mark).count());
      mark = now;
    };

    RetrievalTrace trace;
    try {
      trace = retrieve(req.question, config_.pipeline, index_, *embedder_, chunks_, stoplist_);
    } catch (const ProviderError& e) {
      throw ServiceError(503, std::string("embedding provider failed: ") + e.what(), "dense_retrieval");
    } catch (const FingerprintMismatch& e) {
      throw ServiceError(503, e.what(), "dense_retrieval");
    }
    lap("retrieve");

    RankedList docs = trace.final;
    if (req.date_filter_active()) {
      RankedList kept;
      for (const auto& e : docs)
        if (date_in_range(chunks_.at(e.chunk_id).publish_date, req)) kept.push_back(e);
      if (kept.empty() && !docs.empty())
        resp.date_filter_relaxed = true;
      else
        docs = std::move(kept);
    }
    lap("date_filter");

    const SpanSelection sel{config_.pipeline.m, config_.pipeline.max_span_len, 0};
    auto answered = answer_documents(req.question, docs, chunks_, *reader_, sel);
    lap("read");

    if (answered.size() > req.top_k) answered.resize(req.top_k);
    for (const auto& a : answered) resp.documents.push_back(result_document(a, trace));
    lap("format");
    return resp;
  }

  nlohmann::json health_and_meta() const {
    std::shared_lock lock(mu_);
    nlohmann::json j;
    std::vector<std::string> notes;
    const bool embedder_up = embedder_->reachable();
    const bool reader_up = reader_->reachable();
    std::string status = "ok";
    if (!refusal_.empty()) {
      status = "unavailable";
      notes.push_back(refusal_);
    }
    if (!embedder_up) {
      if (status == "ok") status = "degraded";
      notes.push_back("embedding provider unreachable; queries will fail at dense retrieval");
    }
    const auto* fallback = dynamic_cast<const FallbackSpanScorer*>(reader_.get());
    if (!reader_up || (fallback && fallback->fell_back())) {
      if (status == "ok") status = "degraded";
      notes.push_back("reader provider unreachable; falling back to the baseline span scorer");
    }
    j["status"] = status;
    j["notes"] = notes;
    j["corpus"] = {{"chunks", chunks_.size()}};
    j["index"] = {{"fingerprint", index_.fingerprint()}, {"size", index_.size()}, {"dimension", index_.dimension()}};
    j["providers"] = {{"embedder", {{"fingerprint", embedder_->fingerprint()}, {"reachable", embedder_up}}},
                      {"reader",
                       {{"name", fallback ? fallback->primary().name() : reader_->name()},
                        {"reachable", reader_up},
                        {"fallback", fallback ? nlohmann::json("baseline") : nlohmann::json(nullptr)}}}};
    j["config"] = config_to_json(config_);
    return j;
  }

  const AppConfig& config() const noexcept { return config_; }

 private:
  void install(ChunkStore chunks, DenseIndex index) {
    chunks_ = std::move(chunks);
    index_ = std::move(index);
    refusal_.clear();
    if (index_.fingerprint() != embedder_->fingerprint()) {
      refusal_ = "index fingerprint '" + index_.fingerprint() + "' does not match embedding provider '" +
                 embedder_->fingerprint() + "'; rebuild the index with this provider";
      return;
    }
    if (index_.dimension() != embedder_->dimension()) {
      refusal_ = "index dimension differs from the embedding provider";
      return;
    }
    for (const auto& id : index_.ids()) {
      if (!chunks_.find(id)) {
        refusal_ = "index entry " + id + " is missing from the chunk store";
        return;
      }
    }
  }

  ResultDocument result_document(const AnsweredDocument& a, const RetrievalTrace& trace) const {
    const auto& chunk = chunks_.at(a.retrieval.chunk_id);
    ResultDocument d;
    d.chunk_id = chunk.chunk_id;
    d.title = chunk.title;
    d.journal = chunk.journal;
    d.publish_date = chunk.publish_date;
    d.snippet = chunk.text;
    d.doc_confidence = a.doc_confidence;
    d.reader_error = a.error;
    for (const auto& s : a.spans) d.highlights.push_back({s.start_char, s.end_char, s.text, s.confidence});
    std::sort(d.highlights.begin(), d.highlights.end(),
              [](const Highlight& x, const Highlight& y) { return x.start < y.start; });
    for (std::size_t i = 0; i < trace.dense.size(); ++i)
      if (trace.dense[i].chunk_id == d.chunk_id) d.provenance.dense_rank = i + 1, d.provenance.dense_score = trace.dense[i].score;
    for (std::size_t i = 0; i < trace.bm25.size(); ++i)
      if (trace.bm25[i].chunk_id == d.chunk_id) d.provenance.bm25_rank = i + 1, d.provenance.bm25_score = trace.bm25[i].score;
    for (std::size_t i = 0; i < trace.pool.size() && i < trace.clusters.cluster_of.size(); ++i)
      if (trace.pool[i].chunk_id == d.chunk_id) d.provenance.cluster = trace.clusters.cluster_of[i];
    d.provenance.retrieval_rank = a.retrieval_rank + 1;
    return d;
  }

  ChunkStore chunks_;
  DenseIndex index_{1, ""};
  std::unique_ptr<EmbeddingProvider> embedder_;
  std::unique_ptr<SpanScorer> reader_;
  AppConfig config_;
  Stoplist stoplist_;
  std::string refusal_;
  mutable std::shared_mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP binding

inline nlohmann::json error_body(const std::string& message, const std::string& stage = {}) {
  nlohmann::json j{{"error", message}};
  if (!stage.empty()) j["stage"] = stage;
  return j;
}

/// Registers POST /api/query and GET /api/health. `static_dir`, when given,
/// is mounted at / for the browser client.
inline void register_routes(httplib::Server& server, const QaService& service, const std::string& static_dir = {}) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/api/query", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) throw ServiceError(400, "request body is not valid JSON");
      const auto resp = service.handle_query(parse_query_request(body));
      res.set_header("Server-Timing", server_timing(resp));
      res.set_content(to_json(resp).dump(), "application/json");
    } catch (const ServiceError& e) {
      res.status = e.status();
      res.set_content(error_body(e.what(), e.stage()).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });

  server.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) {
    const auto j = service.health_and_meta();
    if (j["status"] == "unavailable") res.status = 503;
    res.set_content(j.dump(), "application/json");
  });

  if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

}  // namespace odqa
