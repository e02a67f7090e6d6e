#pragma once

// JSONL file formats and the JSON configuration document.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "odqa/corpus.hpp"
#include "odqa/date.hpp"
#include "odqa/errors.hpp"
#include "odqa/eval.hpp"
#include "odqa/pipeline.hpp"
#include "odqa/ranked_list.hpp"

namespace odqa {

using nlohmann::json;

/// Calls `fn` for every non-blank line parsed as JSON. Errors carry
/// file:line.
inline void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), record++);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
  }

  void write(const json& j) { out_ << j.dump() << '\n'; }

  ~JsonlWriter() = default;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline std::optional<Date> date_from_json(const json& j, const char* field) {
  if (!j.contains(field) || j[field].is_null()) return std::nullopt;
  const auto s = j[field].get<std::string>();
  if (s.empty()) return std::nullopt;
  auto d = parse_date(s);
  if (!d) throw std::invalid_argument(std::string("bad ") + field + " '" + s + "', expected YYYY-MM-DD");
  return d;
}

inline json date_to_json(const std::optional<Date>& d) { return d ? json(format_date(*d)) : json(nullptr); }

inline std::string string_or(const json& j, const char* field, std::string fallback = {}) {
  if (!j.contains(field) || j[field].is_null()) return fallback;
  return j[field].get<std::string>();
}

// ---------------------------------------------------------------------------
// Articles and chunks

inline Article article_from_json(const json& j) {
  Article a;
  if (!j.contains("article_id") || !j["article_id"].is_string()) throw std::invalid_argument("article_id is required");
  a.article_id = j["article_id"].get<std::string>();
  a.title = string_or(j, "title");
  a.journal = string_or(j, "journal");
  a.publish_date = date_from_json(j, "publish_date");
  if (j.contains("paragraphs") && !j["paragraphs"].is_null()) a.paragraphs = j["paragraphs"].get<std::vector<std::string>>();
  return a;
}

inline json article_to_json(const Article& a) {
  return {{"article_id", a.article_id},
          {"title", a.title},
          {"journal", a.journal},
          {"publish_date", date_to_json(a.publish_date)},
          {"paragraphs", a.paragraphs}};
}

inline std::vector<Article> read_articles(const std::filesystem::path& path) {
  std::vector<Article> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    auto a = article_from_json(j);
    if (!seen.insert(a.article_id).second) throw std::invalid_argument("duplicate article_id " + a.article_id);
    out.push_back(std::move(a));
  });
  return out;
}

inline json chunk_to_json(const PassageChunk& c) {
  return {{"chunk_id", c.chunk_id},
          {"article_id", c.article_id},
          {"text", c.text},
          {"token_count", c.token_count},
          {"char_start", c.span_in_article.begin},
          {"char_end", c.span_in_article.end},
          {"journal", c.journal},
          {"publish_date", date_to_json(c.publish_date)},
          {"title", c.title}};
}

inline PassageChunk chunk_from_json(const json& j) {
  PassageChunk c;
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.article_id = string_or(j, "article_id");
  c.text = j.at("text").get<std::string>();
  c.token_count = j.contains("token_count") ? j["token_count"].get<std::size_t>() : count_tokens(c.text);
  c.span_in_article = {j.value("char_start", std::size_t{0}), j.value("char_end", c.text.size())};
  c.journal = string_or(j, "journal");
  c.publish_date = date_from_json(j, "publish_date");
  c.title = string_or(j, "title");
  return c;
}

inline ChunkStore read_chunks(const std::filesystem::path& path) {
  ChunkStore store;
  for_each_jsonl(path, [&](const json& j, std::size_t) { store.add(chunk_from_json(j)); });
  return store;
}

inline void write_chunks(const std::filesystem::path& path, const std::vector<PassageChunk>& chunks) {
  JsonlWriter w(path);
  for (const auto& c : chunks) w.write(chunk_to_json(c));
}

// ---------------------------------------------------------------------------
// QA pairs, runs and gold answers

inline std::string default_question_id(std::size_t record) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%06zu", record);
  return buf;
}

/// Lines {"question", "answer", "context_article_id"}, optionally with
/// "question_id" (defaults to the record position) and "split".
inline std::vector<QAPair> read_qa(const std::filesystem::path& path) {
  std::vector<QAPair> out;
  for_each_jsonl(path, [&](const json& j, std::size_t record) {
    QAPair p;
    p.question_id = string_or(j, "question_id", default_question_id(record));
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.context_article_id = string_or(j, "context_article_id");
    if (p.answer.empty()) throw std::invalid_argument("empty answer for " + p.question_id);
    const auto split = string_or(j, "split");
    if (split == "train") p.split = Split::train;
    if (split == "dev") p.split = Split::dev;
    if (split == "test") p.split = Split::test;
    out.push_back(std::move(p));
  });
  return out;
}

inline json qa_to_json(const QAPair& p) {
  json j{{"question_id", p.question_id},
         {"question", p.question},
         {"answer", p.answer},
         {"context_article_id", p.context_article_id}};
  if (p.split) j["split"] = to_string(*p.split);
  return j;
}

inline void write_qa(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  JsonlWriter w(path);
  for (const auto& p : pairs) w.write(qa_to_json(p));
}

inline GoldFile read_gold(const std::filesystem::path& path) {
  GoldFile gold;
  for (auto& p : read_qa(path)) gold[p.question_id] = GoldAnswer{std::move(p.question), std::move(p.answer)};
  return gold;
}

/// Lines {"question_id": ..., "ranked_chunk_ids": [...]}.
inline RunFile read_run(const std::filesystem::path& path) {
  RunFile run;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    run[j.at("question_id").get<std::string>()] = j.at("ranked_chunk_ids").get<std::vector<std::string>>();
  });
  return run;
}

inline void write_run(const std::filesystem::path& path, const RunFile& run) {
  JsonlWriter w(path);
  for (const auto& [qid, ids] : run) w.write({{"question_id", qid}, {"ranked_chunk_ids", ids}});
}

// ---------------------------------------------------------------------------
// Configuration

/// Everything a `qa` process needs; every field has a default so a config
/// file only lists what it changes.
struct AppConfig {
  PipelineConfig pipeline;
  FuzzyMatchConfig fuzzy;
  std::string embedder = "baseline";  // baseline | endpoint:<url> | file:<path>
  std::size_t dimension = BaselineEmbedder::kDefaultDimension;
  std::string reader = "baseline";  // baseline | endpoint:<url>
  std::string stoplist;             // path; empty = built-in English list
  std::string sentence_encoder = "baseline";
  HttpOptions http;
  std::string corpus;  // chunks JSONL
  std::string index;
};

inline void apply_config_json(AppConfig& cfg, const json& j) {
  if (j.contains("pipeline")) {
    const auto& p = j["pipeline"];
    auto& pc = cfg.pipeline;
    pc.n = p.value("n", pc.n);
    pc.k = p.value("k", pc.k);
    pc.l = p.value("l", pc.l);
    pc.num_clusters = p.value("num_clusters", pc.num_clusters);
    pc.kmeans_seed = p.value("kmeans_seed", pc.kmeans_seed);
    pc.m = p.value("m", pc.m);
    pc.max_span_len = p.value("max_span_len", pc.max_span_len);
    if (p.contains("bm25")) {
      const auto& b = p["bm25"];
      pc.bm25.k1 = b.value("k1", pc.bm25.k1);
      pc.bm25.b_len = b.value("b", pc.bm25.b_len);
      pc.bm25.delta = b.value("delta", pc.bm25.delta);
      const auto idf = b.value("idf", std::string("smoothed"));
      if (idf == "smoothed") pc.bm25.idf = IdfVariant::smoothed;
      else if (idf == "robertson") pc.bm25.idf = IdfVariant::robertson;
      else throw std::invalid_argument("config: bm25.idf must be smoothed or robertson");
    }
  }
  if (j.contains("fuzzy_match")) {
    const auto& f = j["fuzzy_match"];
    auto& fc = cfg.fuzzy;
    fc.a = f.value("a", fc.a);
    fc.b = f.value("b", fc.b);
    fc.c = f.value("c", fc.c);
    fc.d = f.value("d", fc.d);
    fc.short_answer_max_tokens = f.value("short_answer_max_tokens", fc.short_answer_max_tokens);
    const auto against = f.value("compare_against", std::string("answer"));
    if (against == "answer") fc.compare_against = CompareAgainst::answer;
    else if (against == "question") fc.compare_against = CompareAgainst::question;
    else throw std::invalid_argument("config: fuzzy_match.compare_against must be answer or question");
  }
  cfg.embedder = j.value("embedder", cfg.embedder);
  cfg.dimension = j.value("dimension", cfg.dimension);
  cfg.reader = j.value("reader", cfg.reader);
  cfg.stoplist = j.value("stoplist", cfg.stoplist);
  cfg.sentence_encoder = j.value("sentence_encoder", cfg.sentence_encoder);
  cfg.corpus = j.value("corpus", cfg.corpus);
  cfg.index = j.value("index", cfg.index);
  if (j.contains("http")) {
    cfg.http.timeout = std::chrono::milliseconds(j["http"].value("timeout_ms", static_cast<long long>(cfg.http.timeout.count())));
    cfg.http.batch_size = j["http"].value("batch_size", cfg.http.batch_size);
  }
  cfg.pipeline.validate();
  cfg.fuzzy.validate();
}

inline AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  AppConfig cfg;
  try {
    apply_config_json(cfg, json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return cfg;
}

inline json config_to_json(const AppConfig& cfg) {
  const auto& p = cfg.pipeline;
  return {{"pipeline",
           {{"n", p.n},
            {"k", p.k},
            {"l", p.l},
            {"num_clusters", p.num_clusters},
            {"kmeans_seed", p.kmeans_seed},
            {"m", p.m},
            {"max_span_len", p.max_span_len},
            {"bm25",
             {{"k1", p.bm25.k1},
              {"b", p.bm25.b_len},
              {"delta", p.bm25.delta},
              {"idf", p.bm25.idf == IdfVariant::smoothed ? "smoothed" : "robertson"}}}}},
          {"fuzzy_match", cfg.fuzzy.to_json()},
          {"embedder", cfg.embedder},
          {"dimension", cfg.dimension},
          {"reader", cfg.reader},
          {"sentence_encoder", cfg.sentence_encoder},
          {"stoplist", cfg.stoplist}};
}

inline Stoplist load_stoplist(const AppConfig& cfg) {
  return cfg.stoplist.empty() ? Stoplist::english() : Stoplist::load(cfg.stoplist);
}

}  // namespace odqa
