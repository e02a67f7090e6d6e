#include <catch_amalgamated.hpp>

#include <atomic>
#include <fstream>

#include "local_server.hpp"
#include "odqa/dense.hpp"
#include "support.hpp"

using Catch::Matchers::WithinAbs;

namespace {

odqa::ChunkStore random_store(std::mt19937_64& rng, std::size_t n) {
  odqa::ChunkStore store;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "c%04zu", i);
    const auto text = gen::prose(rng, 5 + gen::below(rng, 40));
    store.add({id, "art", text, odqa::count_tokens(text), {}, "", {}, ""});
  }
  return store;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "odqa_test_dense";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("baseline embedder: examples", "[embed]") {
  const odqa::BaselineEmbedder e;
  CHECK(e.embed_text("mask transmission") == e.embed_text("mask transmission"));
  const auto q = e.embed_text("mask transmission");
  CHECK(odqa::cosine(q, e.embed_text("mask transmission rates")) > odqa::cosine(q, e.embed_text("financial markets")));
  const auto zero = e.embed_text("");
  CHECK(zero.size() == 256);
  CHECK(std::all_of(zero.begin(), zero.end(), [](float v) { return v == 0.0f; }));
  CHECK(e.embed_text("the of and") == zero);
  CHECK_THAT(odqa::inner_product(q, q), WithinAbs(1.0, 1e-6));
  CHECK(e.embed_text("Mask, TRANSMISSION!") == q);
}

TEST_CASE("baseline embedder: fingerprint names dimension and stoplist", "[embed]") {
  const odqa::BaselineEmbedder a(256), b(128), c(256, odqa::Stoplist({"virus"}));
  CHECK(a.fingerprint().starts_with("baseline-hash-v1/d=256/stop="));
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK_THROWS_AS(odqa::BaselineEmbedder(8), std::invalid_argument);
}

TEST_CASE("dense_search equals brute-force inner products", "[dense][oracle]") {
  std::mt19937_64 rng(17);
  const auto store = random_store(rng, 1000);
  const odqa::BaselineEmbedder e;
  const auto index = odqa::build_index(store, e);
  REQUIRE(index.size() == 1000);
  for (int trial = 0; trial < 20; ++trial) {
    const auto query = gen::prose(rng, 1 + gen::below(rng, 8));
    const auto qv = e.embed_text(query);
    std::vector<std::pair<double, std::string>> want;
    for (const auto& c : store.chunks()) want.emplace_back(oracle::dot(qv, e.embed_text(c.text)), c.chunk_id);
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t n = std::vector<std::size_t>{1, 7, 100, 1000, 5000}[trial % 5];
    const auto got = odqa::dense_search(query, index, e, n);
    REQUIRE(got.size() == std::min<std::size_t>(n, 1000));
    for (std::size_t r = 0; r < got.size(); ++r) {
      CHECK_THAT(got[r].score, WithinAbs(want[r].first, 1e-6));
      if (r + 1 < got.size()) CHECK(got[r].score >= got[r + 1].score);
    }
    // identical scores may differ in the last float bit between the two sums;
    // ids must match wherever the oracle's scores are clearly separated
    for (std::size_t r = 0; r + 1 < got.size(); ++r)
      if (want[r].first - want[r + 1].first > 1e-6 && (r == 0 || want[r - 1].first - want[r].first > 1e-6))
        CHECK(got[r].chunk_id == want[r].second);
  }
}

TEST_CASE("dense_search: examples", "[dense]") {
  odqa::ChunkStore store;
  const std::vector<std::string> texts = {"masks reduce droplet spread", "vaccines train immunity",
                                          "ventilation dilutes aerosols"};
  for (std::size_t i = 0; i < texts.size(); ++i) store.add({"c" + std::to_string(i), "a", texts[i], 3, {}, "", {}, ""});
  const odqa::BaselineEmbedder e;
  const auto index = odqa::build_index(store, e);

  const auto top = odqa::dense_search("vaccines train immunity", index, e, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].chunk_id == "c1");
  CHECK_THAT(top[0].score, WithinAbs(1.0, 1e-6));

  const auto orth = odqa::dense_search("zzz", index, e, 10);
  REQUIRE(orth.size() == 3);
  CHECK(odqa::chunk_ids(orth) == std::vector<std::string>{"c0", "c1", "c2"});
  for (const auto& r : orth) CHECK(r.score == 0.0);

  const odqa::BaselineEmbedder other(128);
  CHECK_THROWS_AS(odqa::dense_search("x", index, other, 1), odqa::FingerprintMismatch);
}

TEST_CASE("index persistence round-trip", "[dense][io]") {
  std::mt19937_64 rng(2);
  const auto store = random_store(rng, 50);
  const odqa::BaselineEmbedder e;
  const auto index = odqa::build_index(store, e);
  const auto path = temp_file("round.idx");
  index.save(path);
  const auto loaded = odqa::DenseIndex::load(path);
  CHECK(loaded.fingerprint() == index.fingerprint());
  CHECK(loaded.ids() == index.ids());
  CHECK(loaded.serialize() == index.serialize());
  CHECK(odqa::dense_search("virus protein", loaded, e, 10) == odqa::dense_search("virus protein", index, e, 10));

  // rebuilding is byte-identical, also with parallel batches
  CHECK(odqa::build_index(store, e).serialize() == index.serialize());
  CHECK(odqa::build_index(store, e, {7, 4}).serialize() == index.serialize());

  auto bytes = index.serialize();
  CHECK(bytes.substr(0, 8) == std::string("ODQAIDX\0", 8));
  CHECK_THROWS_AS(odqa::DenseIndex::deserialize(bytes.substr(0, bytes.size() - 1)), odqa::FormatError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(odqa::DenseIndex::deserialize(bytes), odqa::FormatError);
}

TEST_CASE("index validates rows", "[dense]") {
  odqa::DenseIndex index(2, "fp");
  const std::vector<float> ok{1.0f, 0.0f}, wrong{1.0f}, nan{std::nanf(""), 0.0f};
  index.add("a", ok);
  CHECK_THROWS_AS(index.add("b", wrong), odqa::ProviderError);
  CHECK_THROWS_AS(index.add("b", nan), odqa::ProviderError);
  CHECK_THROWS_AS(index.add("a", ok), std::invalid_argument);
  CHECK(index.slot("a") == 0u);
  CHECK_FALSE(index.slot("b"));
}

TEST_CASE("endpoint embedder talks to a local server", "[dense][http]") {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto& t : body["texts"]) {
      const auto s = t.get<std::string>();
      vectors.push_back({static_cast<float>(s.size()), 1.0f, 0.0f});
    }
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  const auto url = srv.start() + "/v1";

  odqa::HttpOptions opts;
  opts.batch_size = 2;
  const odqa::EndpointEmbedder e(url, 3, opts);
  const auto out = e.embed({"a", "bb", "ccc"});
  REQUIRE(out.size() == 3);
  CHECK(out[2] == odqa::Embedding{3.0f, 1.0f, 0.0f});
  CHECK(calls == 2);
  CHECK(e.reachable());
  CHECK(e.fingerprint() == "endpoint:" + url + "/d=3");

  const odqa::EndpointEmbedder wrong_dim(url, 4);
  CHECK_THROWS_AS(wrong_dim.embed({"a"}), odqa::ProviderError);

  odqa::ChunkStore store;
  store.add({"c1", "a", "x", 1, {}, "", {}, ""});
  store.add({"c2", "a", "yy", 1, {}, "", {}, ""});
  const auto index = odqa::build_index(store, e);
  CHECK(index.size() == 2);
}

TEST_CASE("endpoint embedder failure names the chunk", "[dense][http]") {
  odqa::HttpOptions opts;
  opts.timeout = std::chrono::milliseconds(500);
  const odqa::EndpointEmbedder e(dead_url(), 3, opts);
  CHECK_FALSE(e.reachable());
  odqa::ChunkStore store;
  store.add({"first", "a", "x", 1, {}, "", {}, ""});
  try {
    (void)odqa::build_index(store, e);
    FAIL("expected a provider error");
  } catch (const odqa::ProviderError& err) {
    CHECK(err.item() == "first");
  }
  CHECK_THROWS_AS(odqa::EndpointEmbedder("https://example.org", 3), std::invalid_argument);
}

TEST_CASE("precomputed vectors file", "[dense]") {
  const auto path = temp_file("vectors.jsonl");
  {
    std::ofstream out(path);
    out << R"({"chunk_id": "a", "vector": [1, 0]})" << "\n"
        << R"({"chunk_id": "b", "vector": [0, 1]})" << "\n"
        << R"({"text": "query about b", "vector": [0.1, 0.9]})" << "\n";
  }
  const odqa::PrecomputedEmbedder e(path);
  CHECK(e.dimension() == 2);
  odqa::ChunkStore store;
  store.add({"a", "x", "alpha", 1, {}, "", {}, ""});
  store.add({"b", "x", "beta", 1, {}, "", {}, ""});
  const auto index = odqa::build_index(store, e);
  const auto hits = odqa::dense_search("query about b", index, e, 2);
  CHECK(hits[0].chunk_id == "b");
  CHECK_THROWS_AS(e.embed({"unknown"}), odqa::ProviderError);

  store.add({"c", "x", "gamma", 1, {}, "", {}, ""});
  try {
    (void)odqa::build_index(store, e);
    FAIL("expected a provider error");
  } catch (const odqa::ProviderError& err) {
    CHECK(err.item() == "c");
  }
}

TEST_CASE("make_embedding_provider", "[dense]") {
  CHECK(odqa::make_embedding_provider("baseline")->dimension() == 256);
  CHECK(odqa::make_embedding_provider("baseline", 64)->dimension() == 64);
  CHECK_THROWS_AS(odqa::make_embedding_provider("bert"), std::invalid_argument);
}
