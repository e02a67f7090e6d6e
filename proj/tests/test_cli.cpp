#include <catch_amalgamated.hpp>

#include <fstream>

#include "cli_support.hpp"
#include "odqa/io.hpp"

namespace {

const std::string kFixtures = ODQA_DATA_DIR "/fixtures/";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("qa corpus chunk writes passages", "[cli]") {
  const auto dir = fresh_dir("odqa_cli_chunk");
  const auto r = run_qa("corpus chunk --in " + shell_arg(kFixtures + "eval_articles.jsonl") + " --out " +
                        shell_arg(dir / "chunks.jsonl"));
  REQUIRE(r.exit_code == 0);
  const auto store = odqa::read_chunks(dir / "chunks.jsonl");
  CHECK(store.size() == odqa::read_chunks(kFixtures + "eval_chunks.jsonl").size());
  CHECK(slurp(dir / "chunks.jsonl") == slurp(kFixtures + "eval_chunks.jsonl"));
}

TEST_CASE("qa corpus split is reproducible", "[cli]") {
  const auto a = fresh_dir("odqa_cli_split_a"), b = fresh_dir("odqa_cli_split_b");
  REQUIRE(run_qa("corpus split --in " + shell_arg(kFixtures + "eval_qa.jsonl") + " --seed 7 --out-dir " + shell_arg(a)).exit_code == 0);
  REQUIRE(run_qa("corpus split --in " + shell_arg(kFixtures + "eval_qa.jsonl") + " --seed 7 --out-dir " + shell_arg(b)).exit_code == 0);
  for (const char* part : {"train.jsonl", "dev.jsonl", "test.jsonl", "excluded.jsonl"}) {
    INFO(part);
    CHECK(slurp(a / part) == slurp(b / part));
  }
  CHECK(odqa::read_qa(a / "train.jsonl").size() == 35);
}

TEST_CASE("qa index build, query and eval", "[cli]") {
  const auto dir = fresh_dir("odqa_cli_query");
  const auto corpus = shell_arg(kFixtures + "service_chunks.jsonl");
  const auto index = shell_arg(dir / "svc.idx");
  REQUIRE(run_qa("index build --corpus " + corpus + " --out " + index).exit_code == 0);

  const std::string q = " query --corpus " + corpus + " --index " + index +
                        " --question 'What are the most common symptoms of covid?' --json";
  const auto first = run_qa(q), second = run_qa(q);
  REQUIRE(first.exit_code == 0);
  CHECK(first.out == second.out);
  const auto j = nlohmann::json::parse(first.out);
  REQUIRE_FALSE(j["documents"].empty());
  CHECK(j["documents"][0]["chunk_id"].get<std::string>().starts_with("svc-symptoms"));

  const auto text = run_qa("query --corpus " + corpus + " --index " + index + " --question 'symptoms of covid' --explain");
  CHECK(text.exit_code == 0);
  CHECK_FALSE(text.out.empty());

  CHECK(run_qa("query --corpus " + corpus + " --index " + shell_arg(dir / "missing.idx") + " --question x").exit_code != 0);
}

TEST_CASE("qa run and eval fm", "[cli]") {
  const auto dir = fresh_dir("odqa_cli_eval");
  const auto corpus = shell_arg(kFixtures + "eval_chunks.jsonl");
  const auto qa = shell_arg(kFixtures + "eval_qa.jsonl");
  REQUIRE(run_qa("index build --corpus " + corpus + " --out " + shell_arg(dir / "eval.idx")).exit_code == 0);
  for (const char* system : {"dense", "bm25", "hybrid", "pipeline"}) {
    INFO(system);
    const auto run_file = dir / (std::string(system) + ".jsonl");
    REQUIRE(run_qa(std::string("run --corpus ") + corpus + " --index " + shell_arg(dir / "eval.idx") + " --qa " + qa +
                   " --system " + system + " --out " + shell_arg(run_file))
                .exit_code == 0);
    CHECK(odqa::read_run(run_file).size() == 50);
  }
  const auto r = run_qa("eval fm --corpus " + corpus + " --run " + shell_arg(dir / "hybrid.jsonl") + " --gold " + qa);
  REQUIRE(r.exit_code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report["questions"] == 50);
  CHECK(report["fm"]["FM@5"].get<double>() <= report["fm"]["FM@20"].get<double>());

  const auto rd = run_qa("eval reader --corpus " + shell_arg(kFixtures + "reader_chunks.jsonl") + " --qa " +
                         shell_arg(kFixtures + "reader_qa.jsonl") + " --m 3");
  REQUIRE(rd.exit_code == 0);
  CHECK(nlohmann::json::parse(rd.out)["questions"] == 5);
}

TEST_CASE("qa rejects bad usage", "[cli]") {
  CHECK(run_qa("").exit_code != 0);
  CHECK(run_qa("query").exit_code != 0);
  CHECK(run_qa("run --qa x --out y --system nonsense --corpus " + shell_arg(kFixtures + "eval_chunks.jsonl")).exit_code != 0);
}
