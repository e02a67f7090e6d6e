// qa: command-line front end for chunking, indexing, querying, serving and
// evaluation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "odqa/odqa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string corpus;
  std::string index;
};

odqa::AppConfig resolve_config(const Common& c) {
  std::string path = c.config;
  if (const char* env = std::getenv("QA_CONFIG"); env && *env) path = env;
  odqa::AppConfig cfg = path.empty() ? odqa::AppConfig{} : odqa::load_config(path);
  if (!c.corpus.empty()) cfg.corpus = c.corpus;
  if (!c.index.empty()) cfg.index = c.index;
  return cfg;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw odqa::Error(std::string(what) + " is required (flag or config)");
}

std::unique_ptr<odqa::EmbeddingProvider> embedder_for(const odqa::AppConfig& cfg, const odqa::Stoplist& stop) {
  return odqa::make_embedding_provider(cfg.embedder, cfg.dimension, stop, cfg.http);
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<std::size_t> parse_ks(const std::string& s) {
  std::vector<std::size_t> ks;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ','))
    if (!part.empty()) ks.push_back(static_cast<std::size_t>(std::stoul(part)));
  if (ks.empty()) throw std::invalid_argument("--k needs at least one cutoff");
  return ks;
}

// ---------------------------------------------------------------------------

void corpus_chunk(const std::string& in, const std::string& out, std::size_t min_tokens, std::size_t max_tokens) {
  const auto articles = odqa::read_articles(in);
  odqa::JsonlWriter w(out);
  std::size_t total = 0;
  for (const auto& a : articles) {
    for (const auto& c : odqa::chunk_article(a, min_tokens, max_tokens)) {
      w.write(odqa::chunk_to_json(c));
      ++total;
    }
  }
  std::cerr << articles.size() << " articles -> " << total << " chunks\n";
}

void corpus_split(const std::string& in, std::uint64_t seed, const std::string& out_dir) {
  auto split = odqa::split_dataset(odqa::read_qa(in), seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  odqa::write_qa(dir / "train.jsonl", split.train);
  odqa::write_qa(dir / "dev.jsonl", split.dev);
  odqa::write_qa(dir / "test.jsonl", split.test);
  odqa::write_qa(dir / "excluded.jsonl", split.excluded);
  std::cerr << "train " << split.train.size() << ", dev " << split.dev.size() << ", test " << split.test.size()
            << ", excluded " << split.excluded.size() << "\n";
}

void corpus_samples(const std::string& qa, const std::string& chunks_path, const std::string& out) {
  const auto chunks = odqa::read_chunks(chunks_path);
  const auto set = odqa::build_retrieval_samples(odqa::read_qa(qa), chunks.chunks());
  odqa::JsonlWriter w(out);
  for (const auto& s : set.samples)
    w.write({{"question_id", s.question_id},
             {"question", s.question},
             {"positive_chunk_ids", s.positive_chunk_ids},
             {"negative_chunk_ids", s.negative_chunk_ids}});
  std::cerr << set.samples.size() << " samples, " << set.dropped << " dropped (answer not found)\n";
}

void index_build(const odqa::AppConfig& cfg, const std::string& provider, std::size_t dim, const std::string& out,
                 odqa::IndexBuildOptions options) {
  require(cfg.corpus, "--corpus");
  const auto stop = odqa::load_stoplist(cfg);
  const auto chunks = odqa::read_chunks(cfg.corpus);
  auto p = odqa::make_embedding_provider(provider, dim, stop, cfg.http);
  const auto index = odqa::build_index(chunks, *p, options);
  index.save(out);
  std::cerr << "indexed " << index.size() << " chunks, fingerprint " << index.fingerprint() << "\n";
}

json answered_to_json(const std::vector<odqa::AnsweredDocument>& docs, const odqa::ChunkStore& chunks) {
  json out = json::array();
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto& d = docs[r];
    const auto& c = chunks.at(d.retrieval.chunk_id);
    json spans = json::array();
    for (const auto& s : d.spans)
      spans.push_back({{"text", s.text}, {"start", s.start_char}, {"end", s.end_char}, {"confidence", s.confidence}});
    out.push_back({{"rank", r + 1},
                   {"chunk_id", c.chunk_id},
                   {"title", c.title},
                   {"doc_confidence", d.doc_confidence},
                   {"retrieval_rank", d.retrieval_rank + 1},
                   {"spans", spans}});
  }
  return out;
}

void print_list(const char* name, const odqa::RankedList& list, std::size_t limit) {
  std::cout << "  " << name << " (" << list.size() << "):\n";
  for (std::size_t i = 0; i < std::min(limit, list.size()); ++i)
    std::cout << "    " << i + 1 << ". " << list[i].chunk_id << "  " << format_score(list[i].score) << "\n";
  if (list.size() > limit) std::cout << "    ...\n";
}

void query(odqa::AppConfig cfg, const std::string& question, std::size_t l, bool explain, bool as_json) {
  require(cfg.corpus, "--corpus");
  require(cfg.index, "--index");
  if (l != 0) cfg.pipeline.l = l;
  const auto stop = odqa::load_stoplist(cfg);
  const auto chunks = odqa::read_chunks(cfg.corpus);
  const auto index = odqa::DenseIndex::load(cfg.index);
  auto provider = embedder_for(cfg, stop);
  auto scorer = odqa::make_span_scorer(cfg.reader, stop, cfg.http);

  const auto trace = odqa::retrieve(question, cfg.pipeline, index, *provider, chunks, stop);
  const odqa::SpanSelection sel{cfg.pipeline.m, cfg.pipeline.max_span_len, 0};
  const auto answered = odqa::answer_documents(question, trace.final, chunks, *scorer, sel);

  if (as_json) {
    json j{{"question", question}, {"documents", answered_to_json(answered, chunks)}};
    if (explain) {
      j["trace"] = {{"dense", odqa::chunk_ids(trace.dense)},
                    {"bm25", odqa::chunk_ids(trace.bm25)},
                    {"pool", odqa::chunk_ids(trace.pool)},
                    {"clusters", trace.clusters.cluster_of},
                    {"allocation", trace.allocation},
                    {"final", odqa::chunk_ids(trace.final)}};
    }
    std::cout << j.dump(2) << "\n";
    return;
  }

  std::cout << "Q: " << question << "\n\n";
  for (std::size_t r = 0; r < answered.size(); ++r) {
    const auto& d = answered[r];
    const auto& c = chunks.at(d.retrieval.chunk_id);
    std::cout << r + 1 << ". [" << c.chunk_id << "] " << c.title;
    if (c.publish_date) std::cout << " (" << odqa::format_date(*c.publish_date) << ")";
    std::cout << "\n   confidence " << format_score(d.doc_confidence) << ", retrieved #" << d.retrieval_rank + 1 << "\n";
    for (const auto& s : d.spans) std::cout << "   > " << s.text << "  [" << format_score(s.confidence) << "]\n";
    if (!d.error.empty()) std::cout << "   reader error: " << d.error << "\n";
  }
  if (!explain) return;

  std::cout << "\nStages:\n";
  print_list("dense", trace.dense, 10);
  print_list("bm25+", trace.bm25, 10);
  std::cout << "  pool / clusters (" << trace.clusters.num_clusters << " clusters, " << trace.clusters.iterations
            << " iterations):\n";
  for (std::size_t i = 0; i < trace.pool.size(); ++i)
    std::cout << "    " << i + 1 << ". " << trace.pool[i].chunk_id << "  cluster " << trace.clusters.cluster_of[i]
              << "\n";
  std::cout << "  allocation:";
  for (auto a : trace.allocation) std::cout << " " << a;
  std::cout << "\n";
  print_list("final", trace.final, trace.final.size());
}

void serve(const odqa::AppConfig& cfg, std::string bind, const std::string& static_dir) {
  if (const char* env = std::getenv("QA_BIND"); env && *env) bind = env;
  require(cfg.corpus, "--corpus");
  require(cfg.index, "--index");
  const auto stop = odqa::load_stoplist(cfg);
  odqa::QaService service(odqa::read_chunks(cfg.corpus), odqa::DenseIndex::load(cfg.index), embedder_for(cfg, stop),
                          odqa::make_span_scorer(cfg.reader, stop, cfg.http), cfg, stop);
  if (const auto why = service.refusal(); !why.empty()) std::cerr << "warning: refusing queries: " << why << "\n";

  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--bind expects host:port");
  const std::string host = bind.substr(0, colon);
  const int port = std::stoi(bind.substr(colon + 1));
  httplib::Server server;
  odqa::register_routes(server, service, static_dir);
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw odqa::Error("cannot bind " + bind);
}

odqa::RankedList run_system(const std::string& system, const std::string& question, const odqa::AppConfig& cfg,
                            const odqa::DenseIndex& index, const odqa::EmbeddingProvider& provider,
                            const odqa::ChunkStore& chunks, const odqa::Stoplist& stop, std::size_t depth) {
  const auto& p = cfg.pipeline;
  if (system == "dense") return odqa::dense_search(question, index, provider, depth);
  if (system == "hybrid") return odqa::hybrid_search(question, index, provider, chunks, p.n, depth, p.bm25, stop);
  if (system == "pipeline") return odqa::retrieve(question, p, index, provider, chunks, stop).final;
  throw std::invalid_argument("unknown system " + system + " (dense, bm25, hybrid, pipeline)");
}

void run(const odqa::AppConfig& cfg, const std::string& qa, const std::string& system, std::size_t depth,
         const std::string& out) {
  require(cfg.corpus, "--corpus");
  const auto stop = odqa::load_stoplist(cfg);
  const auto chunks = odqa::read_chunks(cfg.corpus);
  std::optional<odqa::DenseIndex> index;
  std::unique_ptr<odqa::EmbeddingProvider> provider;
  if (system != "bm25") {
    require(cfg.index, "--index");
    index = odqa::DenseIndex::load(cfg.index);
    provider = embedder_for(cfg, stop);
  }
  odqa::RunFile runfile;
  for (const auto& q : odqa::read_qa(qa)) {
    const auto ranked = system == "bm25"
                            ? odqa::bm25_search(q.question, chunks, cfg.pipeline.bm25, stop, depth)
                            : run_system(system, q.question, cfg, *index, *provider, chunks, stop, depth);
    runfile[q.question_id] = odqa::chunk_ids(ranked);
  }
  odqa::write_run(out, runfile);
  std::cerr << system << ": " << runfile.size() << " questions -> " << out << "\n";
}

void eval_fm(const odqa::AppConfig& cfg, const std::string& run_path, const std::string& gold_path,
             const std::string& ks) {
  require(cfg.corpus, "--corpus");
  const auto stop = odqa::load_stoplist(cfg);
  const auto chunks = odqa::read_chunks(cfg.corpus);
  auto encoder = odqa::make_embedding_provider(cfg.sentence_encoder, cfg.dimension, stop, cfg.http);
  const odqa::FuzzyMatcher matcher(*encoder, cfg.fuzzy, stop);
  const auto report = odqa::fm_at_k(odqa::read_run(run_path), odqa::read_gold(gold_path), parse_ks(ks), matcher, chunks);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << report.to_json().dump(2) << "\n";
}

void eval_reader(const odqa::AppConfig& cfg, const std::string& qa_path, std::size_t m) {
  require(cfg.corpus, "--corpus");
  const auto stop = odqa::load_stoplist(cfg);
  const auto chunks = odqa::read_chunks(cfg.corpus);
  auto scorer = odqa::make_span_scorer(cfg.reader, stop, cfg.http);
  const auto qa = odqa::read_qa(qa_path);
  const auto samples = odqa::build_retrieval_samples(qa, chunks.chunks());
  std::map<std::string, std::string> answer_of;
  for (const auto& q : qa) answer_of[q.question_id] = q.answer;

  const odqa::SpanSelection sel{m == 0 ? cfg.pipeline.m : m, cfg.pipeline.max_span_len, 0};
  double f1 = 0.0, em = 0.0;
  for (const auto& s : samples.samples) {
    odqa::RankedList docs;
    for (const auto& id : s.positive_chunk_ids) docs.push_back({id, 0.0, odqa::ScoreSource::reader});
    odqa::SpanScore best;
    for (const auto& d : odqa::answer_documents(s.question, docs, chunks, *scorer, sel)) {
      const auto sc = odqa::best_span_score(d.spans, answer_of[s.question_id]);
      best.f1 = std::max(best.f1, sc.f1);
      best.em = std::max(best.em, sc.em);
    }
    f1 += best.f1;
    em += best.em;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, samples.samples.size()));
  std::cout << json{{"m", sel.m},
                    {"questions", samples.samples.size()},
                    {"dropped", samples.dropped},
                    {"exact_match", 100.0 * em / n},
                    {"f1", 100.0 * f1 / n}}
                   .dump(2)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-domain question answering over article collections"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "JSON config file (QA_CONFIG overrides)");
    cmd->add_option("--corpus", common.corpus, "chunks JSONL");
    cmd->add_option("--index", common.index, "dense index file");
  };

  auto* corpus = app.add_subcommand("corpus", "corpus preparation");
  corpus->require_subcommand(1);
  std::string in, out, out_dir, qa_path;
  std::size_t min_tokens = 100, max_tokens = 200;
  std::uint64_t seed = 0;
  auto* chunk = corpus->add_subcommand("chunk", "split articles into passages");
  chunk->add_option("--in", in, "articles JSONL")->required();
  chunk->add_option("--out", out, "chunks JSONL")->required();
  chunk->add_option("--min", min_tokens, "minimum tokens per chunk");
  chunk->add_option("--max", max_tokens, "maximum tokens per chunk");
  auto* split = corpus->add_subcommand("split", "seeded train/dev/test split of QA pairs");
  split->add_option("--in", in, "QA JSONL")->required();
  split->add_option("--seed", seed, "shuffle seed")->required();
  split->add_option("--out-dir", out_dir, "output directory")->required();
  auto* samples = corpus->add_subcommand("samples", "positive/negative chunks per question");
  samples->add_option("--qa", qa_path, "QA JSONL")->required();
  samples->add_option("--chunks", in, "chunks JSONL")->required();
  samples->add_option("--out", out, "samples JSONL")->required();

  auto* index = app.add_subcommand("index", "dense index");
  index->require_subcommand(1);
  auto* build = index->add_subcommand("build", "embed every chunk");
  add_common(build);
  std::string provider = "baseline";
  std::size_t dim = odqa::BaselineEmbedder::kDefaultDimension;
  odqa::IndexBuildOptions build_options;
  build->add_option("--provider", provider, "baseline | endpoint:<url> | file:<path>");
  build->add_option("--dim", dim, "embedding dimension");
  build->add_option("--out", out, "index file")->required();
  build->add_option("--batch-size", build_options.batch_size, "chunks per provider call");
  build->add_option("--threads", build_options.threads, "parallel batches");

  auto* q = app.add_subcommand("query", "answer one question");
  add_common(q);
  std::string question;
  std::size_t l = 0;
  bool explain = false, as_json = false;
  q->add_option("--question", question, "question text")->required();
  q->add_option("--l", l, "documents to return");
  q->add_flag("--explain", explain, "show every retrieval stage");
  q->add_flag("--json", as_json, "machine-readable output");

  auto* srv = app.add_subcommand("serve", "HTTP API");
  add_common(srv);
  std::string bind = "127.0.0.1:8080", static_dir;
  srv->add_option("--bind", bind, "host:port (QA_BIND overrides)");
  srv->add_option("--static", static_dir, "directory served at /");

  auto* rn = app.add_subcommand("run", "write a run file for a retrieval system");
  add_common(rn);
  std::string system = "hybrid";
  std::size_t depth = 50;
  rn->add_option("--qa", qa_path, "questions JSONL")->required();
  rn->add_option("--system", system, "dense | bm25 | hybrid | pipeline");
  rn->add_option("--depth", depth, "ranked chunks per question");
  rn->add_option("--out", out, "run JSONL")->required();

  auto* ev = app.add_subcommand("eval", "evaluation");
  ev->require_subcommand(1);
  auto* fm = ev->add_subcommand("fm", "fuzzy-match FM@k of a run");
  add_common(fm);
  std::string run_path, gold_path, ks = "5,20,50";
  fm->add_option("--run", run_path, "run JSONL")->required();
  fm->add_option("--gold", gold_path, "gold QA JSONL")->required();
  fm->add_option("--k", ks, "comma-separated cutoffs");
  auto* rd = ev->add_subcommand("reader", "span F1/EM on the gold passages");
  add_common(rd);
  std::size_t m = 0;
  rd->add_option("--qa", qa_path, "QA JSONL")->required();
  rd->add_option("--m", m, "spans per document (default from config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (chunk->parsed()) corpus_chunk(in, out, min_tokens, max_tokens);
    else if (split->parsed()) corpus_split(in, seed, out_dir);
    else if (samples->parsed()) corpus_samples(qa_path, in, out);
    else if (build->parsed()) index_build(resolve_config(common), provider, dim, out, build_options);
    else if (q->parsed()) query(resolve_config(common), question, l, explain, as_json);
    else if (srv->parsed()) serve(resolve_config(common), bind, static_dir);
    else if (rn->parsed()) run(resolve_config(common), qa_path, system, depth, out);
    else if (fm->parsed()) eval_fm(resolve_config(common), run_path, gold_path, ks);
    else if (rd->parsed()) eval_reader(resolve_config(common), qa_path, m);
  } catch (const odqa::ProviderError& e) {
    std::cerr << "error: " << e.what();
    if (!e.item().empty()) std::cerr << " (item " << e.item() << ")";
    std::cerr << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
