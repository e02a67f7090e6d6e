#include <catch_amalgamated.hpp>

#include <set>

#include "odqa/corpus.hpp"
#include "odqa/io.hpp"
#include "support.hpp"

namespace {

std::string words(std::size_t n, const std::string& stem = "tok", std::size_t sentence_every = 0) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    std::string w = stem + std::to_string(i);
    if (sentence_every && i % sentence_every == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    out += w;
    if (sentence_every && (i + 1) % sentence_every == 0 && i + 1 < n) out += '.';
  }
  return out + ".";
}

odqa::Article make_article(std::vector<std::string> paragraphs) {
  odqa::Article a;
  a.article_id = "a1";
  a.title = "T";
  a.paragraphs = std::move(paragraphs);
  return a;
}

std::vector<std::size_t> token_counts(const std::vector<odqa::PassageChunk>& chunks) {
  std::vector<std::size_t> out;
  for (const auto& c : chunks) out.push_back(c.token_count);
  return out;
}

}  // namespace

TEST_CASE("chunk_article: one 250-token paragraph splits in two near halves", "[chunk]") {
  // sentences of 25 tokens, so the boundary nearest 125 is at 125
  const auto chunks = odqa::chunk_article(make_article({words(250, "tok", 25)}));
  REQUIRE(chunks.size() == 2);
  CHECK(token_counts(chunks) == std::vector<std::size_t>{125, 125});
}

TEST_CASE("chunk_article: short paragraphs merge", "[chunk]") {
  const auto chunks = odqa::chunk_article(make_article({words(60, "a"), words(70, "b")}));
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].token_count == 130);
  CHECK(chunks[0].text == words(60, "a") + "\n\n" + words(70, "b"));
}

TEST_CASE("chunk_article: a lone short paragraph is kept", "[chunk]") {
  const auto chunks = odqa::chunk_article(make_article({words(80)}));
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].token_count == 80);
  CHECK(odqa::chunk_article(make_article({})).empty());
}

TEST_CASE("chunk_article: ids, metadata and offsets", "[chunk]") {
  auto a = make_article({words(150, "x"), words(150, "y")});
  a.journal = "J";
  a.publish_date = odqa::parse_date("2020-04-01");
  const auto chunks = odqa::chunk_article(a);
  REQUIRE(chunks.size() == 2);
  const auto body = odqa::article_body(a);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    CHECK(chunks[i].chunk_id == odqa::make_chunk_id("a1", i));
    CHECK(chunks[i].article_id == "a1");
    CHECK(chunks[i].journal == "J");
    CHECK(chunks[i].publish_date == a.publish_date);
    CHECK(body.substr(chunks[i].span_in_article.begin, chunks[i].span_in_article.size()) == chunks[i].text);
  }
  CHECK(chunks[0].chunk_id == "a1#0000");
}

TEST_CASE("chunk_article: a paragraph without sentence boundaries splits mid-paragraph", "[chunk]") {
  std::string text;
  for (int i = 0; i < 450; ++i) text += "word" + std::to_string(i) + " ";
  const auto chunks = odqa::chunk_article(make_article({text}));
  for (const auto& c : chunks) CHECK(c.token_count <= 200);
  std::size_t total = 0;
  for (const auto& c : chunks) total += c.token_count;
  CHECK(total == 450);
}

TEST_CASE("chunk_article: rejects min >= max", "[chunk]") {
  CHECK_THROWS_AS(odqa::chunk_article(make_article({"x"}), 200, 200), std::invalid_argument);
}

TEST_CASE("chunk_article: invariants on random articles", "[chunk][property]") {
  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n < 300; ++n) {
    const auto a = gen::article(rng, n);
    const auto chunks = odqa::chunk_article(a);
    const auto body = odqa::article_body(a);
    REQUIRE_FALSE(chunks.empty());
    std::size_t pos = 0;
    std::vector<std::string> rebuilt;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      INFO("article " << n << " chunk " << i);
      CHECK(c.token_count == odqa::count_tokens(c.text));
      CHECK(c.token_count <= 200);
      if (i + 1 < chunks.size()) CHECK(c.token_count >= 100);
      REQUIRE(c.span_in_article.begin >= pos);
      CHECK(body.substr(c.span_in_article.begin, c.span_in_article.size()) == c.text);
      for (std::size_t k = pos; k < c.span_in_article.begin; ++k)
        CHECK(std::isspace(static_cast<unsigned char>(body[k])));
      pos = c.span_in_article.end;
      for (auto& t : odqa::tokenize(c.text)) rebuilt.push_back(std::move(t));
    }
    for (std::size_t k = pos; k < body.size(); ++k) CHECK(std::isspace(static_cast<unsigned char>(body[k])));
    CHECK(rebuilt == odqa::tokenize(body));
  }
}

TEST_CASE("build_retrieval_samples: examples", "[samples]") {
  std::vector<odqa::PassageChunk> chunks;
  const std::vector<std::string> texts = {"alpha beta", "Fomite\n transmission of virus", "gamma",
                                          "FOMITE TRANSMISSION again", "delta"};
  for (std::size_t i = 0; i < texts.size(); ++i)
    chunks.push_back({odqa::make_chunk_id("art", i), "art", texts[i], odqa::count_tokens(texts[i]), {}, "", {}, ""});
  chunks.push_back({"other#0000", "other", "fomite transmission", 2, {}, "", {}, ""});

  const std::vector<odqa::QAPair> qa = {{"q1", "how?", "fomite transmission", "art", {}},
                                        {"q2", "what?", "gamma", "art", {}},
                                        {"q3", "huh?", "xyzzy", "art", {}}};
  const auto set = odqa::build_retrieval_samples(qa, chunks);
  REQUIRE(set.samples.size() == 2);
  CHECK(set.dropped == 1);
  CHECK(set.samples[0].positive_chunk_ids == std::vector<std::string>{"art#0001", "art#0003"});
  CHECK(set.samples[0].negative_chunk_ids == std::vector<std::string>{"art#0000", "art#0002", "art#0004"});
  CHECK(set.samples[1].positive_chunk_ids == std::vector<std::string>{"art#0002"});

  // oracle: substring scan over normalized text
  for (const auto& s : set.samples) {
    std::set<std::string> pos(s.positive_chunk_ids.begin(), s.positive_chunk_ids.end());
    for (const auto& id : s.negative_chunk_ids) CHECK_FALSE(pos.count(id));
  }
  CHECK_THROWS(odqa::build_retrieval_samples({{"q", "q", "a", "missing", {}}}, chunks));
}

TEST_CASE("split sizes", "[split]") {
  const auto big = odqa::split_sizes(2019);
  CHECK(big.train == 1413);
  CHECK(big.dev == 202);
  CHECK(big.test == 404);
  const auto small = odqa::split_sizes(10);
  CHECK(small.train == 7);
  CHECK(small.dev == 1);
  CHECK(small.test == 2);
  for (std::size_t n = 0; n < 3000; ++n) {
    const auto s = odqa::split_sizes(n);
    CHECK(s.train + s.dev + s.test == n);
  }
}

TEST_CASE("split_dataset: a reproducible partition", "[split]") {
  std::vector<odqa::QAPair> qa;
  for (std::size_t i = 0; i < 200; ++i) qa.push_back({"q" + std::to_string(i), "question " + std::to_string(i), "a", "x", {}});
  qa[5].question = "How many participants are there in this study?";
  const auto a = odqa::split_dataset(qa, 42);
  const auto b = odqa::split_dataset(qa, 42);
  const auto c = odqa::split_dataset(qa, 43);

  auto ids = [](const std::vector<odqa::QAPair>& v) {
    std::vector<std::string> out;
    for (const auto& p : v) out.push_back(p.question_id);
    return out;
  };
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.test) == ids(b.test));
  CHECK(ids(a.train) != ids(c.train));
  CHECK(a.train.size() == 140);
  CHECK(a.dev.size() == 20);
  CHECK(a.test.size() + a.excluded.size() == 40);

  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.dev, &a.test, &a.excluded})
    for (const auto& p : *part) CHECK(seen.insert(p.question_id).second);
  CHECK(seen.size() == qa.size());
  for (const auto& p : a.test) CHECK(p.split == odqa::Split::test);
  for (const auto& p : a.excluded) CHECK(odqa::is_document_specific(p.question, odqa::SplitOptions{}.document_specific_phrases));
}

TEST_CASE("document-specific questions", "[split]") {
  const auto phrases = odqa::SplitOptions{}.document_specific_phrases;
  CHECK(odqa::is_document_specific("How many participants are there in this study?", phrases));
  CHECK(odqa::is_document_specific("What does THIS  Paper claim?", phrases));
  CHECK_FALSE(odqa::is_document_specific("Is this studying hard?", phrases));
  CHECK_FALSE(odqa::is_document_specific("What are symptoms of covid?", phrases));
}

TEST_CASE("seeded_shuffle is a fixed permutation per seed", "[split]") {
  std::vector<int> v(10);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  odqa::seeded_shuffle(v, 1);
  odqa::seeded_shuffle(w, 1);
  CHECK(v == w);
  std::sort(w.begin(), w.end());
  CHECK(w == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("chunk store", "[corpus]") {
  odqa::ChunkStore store;
  store.add({"c1", "a", "text", 1, {}, "", {}, ""});
  CHECK_THROWS_AS(store.add({"c1", "a", "other", 1, {}, "", {}, ""}), std::invalid_argument);
  CHECK(store.find("c1"));
  CHECK_FALSE(store.find("c2"));
  CHECK_THROWS_AS(store.at("c2"), std::out_of_range);
}

TEST_CASE("jsonl round trips", "[io]") {
  const auto dir = std::filesystem::temp_directory_path() / "odqa_test_corpus";
  std::filesystem::create_directories(dir);
  auto a = make_article({words(120, "p"), words(30, "q")});
  a.publish_date = odqa::parse_date("2021-01-02");
  {
    odqa::JsonlWriter w(dir / "articles.jsonl");
    w.write(odqa::article_to_json(a));
  }
  const auto back = odqa::read_articles(dir / "articles.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0].paragraphs == a.paragraphs);
  CHECK(back[0].publish_date == a.publish_date);

  const auto chunks = odqa::chunk_article(a);
  odqa::write_chunks(dir / "chunks.jsonl", chunks);
  const auto store = odqa::read_chunks(dir / "chunks.jsonl");
  REQUIRE(store.size() == chunks.size());
  CHECK(store.chunks()[0].text == chunks[0].text);
  CHECK(store.chunks()[0].span_in_article == chunks[0].span_in_article);

  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"article_id": "x", "publish_date": "2020-13-01"})" << "\n";
  }
  CHECK_THROWS_AS(odqa::read_articles(dir / "bad.jsonl"), odqa::FormatError);
}
