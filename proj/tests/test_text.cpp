#include <catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "odqa/date.hpp"
#include "odqa/stopwords.hpp"
#include "odqa/text.hpp"

using odqa::tokenize;
using Words = std::vector<std::string>;

TEST_CASE("tokenize: examples", "[text]") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("COVID-19 spreads.") == Words{"covid-19", "spreads"});
  CHECK(tokenize("Social distancing, distancing") == Words{"social", "distancing", "distancing"});
}

TEST_CASE("tokenize: punctuation and whitespace", "[text]") {
  CHECK(tokenize("  \t\n ").empty());
  CHECK(tokenize("a-b- -c d--e") == Words{"a-b", "c", "d", "e"});
  CHECK(tokenize("ACE2/TMPRSS2 (n=12)") == Words{"ace2", "tmprss2", "n", "12"});
  CHECK(tokenize("3.5% of 1,000") == Words{"3", "5", "of", "1", "000"});
  CHECK(tokenize("it's") == Words{"it", "s"});
}

TEST_CASE("tokenize: non-ASCII letters stay inside words", "[text]") {
  CHECK(tokenize("naïve β-coronavirus") == Words{"naïve", "β-coronavirus"});
  // no-break space and em dash separate words
  CHECK(tokenize("alpha\xC2\xA0" "beta\xE2\x80\x94gamma") == Words{"alpha", "beta", "gamma"});
}

TEST_CASE("tokenize_with_offsets locates every token", "[text]") {
  const std::string text = "The ACE2 receptor, naïve T-cells.";
  const auto toks = odqa::tokenize_with_offsets(text);
  REQUIRE(toks.size() == 5);
  for (const auto& t : toks) CHECK(odqa::to_lower(text.substr(t.begin, t.end - t.begin)) == t.text);
  CHECK(odqa::count_tokens(text) == 5);
}

TEST_CASE("split_sentences", "[text]") {
  const std::string text = "Fever was common. Cough followed, e.g. in adults. Dr. Smith agreed! 2020 was hard? yes";
  std::vector<std::string> got;
  for (const auto& s : odqa::split_sentences(text)) got.push_back(text.substr(s.begin, s.size()));
  CHECK(got == Words{"Fever was common.", "Cough followed, e.g. in adults.", "Dr. Smith agreed!", "2020 was hard? yes"});
  CHECK(odqa::split_sentences("   ").empty());
  CHECK(odqa::split_sentences("no boundary here").size() == 1);
}

TEST_CASE("split_sentences: gaps between sentences are whitespace", "[text]") {
  const std::string text = "  One two.   Three four!\nFive six.  ";
  const auto spans = odqa::split_sentences(text);
  REQUIRE(spans.size() == 3);
  std::size_t pos = 0;
  for (const auto& s : spans) {
    for (std::size_t i = pos; i < s.begin; ++i) CHECK(std::isspace(static_cast<unsigned char>(text[i])));
    pos = s.end;
  }
}

TEST_CASE("normalize_answer drops case, punctuation, articles", "[text]") {
  CHECK(odqa::normalize_answer("The  ACE2, receptor!") == "ace2 receptor");
  CHECK(odqa::normalize_answer("an apple a day") == "apple day");
  CHECK(odqa::normalize_whitespace_lower("  Fomite \n Transmission ") == "fomite transmission");
}

TEST_CASE("remove_stopwords: examples", "[stopwords]") {
  const auto& stop = odqa::Stoplist::english();
  CHECK(odqa::remove_stopwords({"the", "virus", "is", "airborne"}, stop) == Words{"virus", "airborne"});
  CHECK(odqa::remove_stopwords({}, stop).empty());
  CHECK(odqa::remove_stopwords({"virus", "virus"}, stop) == Words{"virus", "virus"});
  CHECK(stop.contains("THE"));
}

TEST_CASE("shipped stoplist file matches the built-in list", "[stopwords]") {
  const auto file = odqa::Stoplist::load(ODQA_DATA_DIR "/stopwords.txt");
  CHECK(file.sorted_words() == odqa::Stoplist::english().sorted_words());
  CHECK(file.fingerprint() == odqa::Stoplist::english().fingerprint());
}

TEST_CASE("stoplist parsing skips comments and blanks", "[stopwords]") {
  const auto s = odqa::Stoplist::parse("# header\n\nFoo\n  bar  \n# baz\n");
  CHECK(s.size() == 2);
  CHECK(s.contains("foo"));
  CHECK(s.contains("bar"));
  CHECK_FALSE(s.contains("baz"));
}

TEST_CASE("dates", "[date]") {
  const auto d = odqa::parse_date("2020-02-29");
  REQUIRE(d);
  CHECK(odqa::format_date(*d) == "2020-02-29");
  CHECK_FALSE(odqa::parse_date("2021-02-29"));
  CHECK_FALSE(odqa::parse_date("2020-2-1"));
  CHECK_FALSE(odqa::parse_date("2020/02/01"));
  CHECK_FALSE(odqa::parse_date(""));
  CHECK(*odqa::parse_date("2020-01-31") < *odqa::parse_date("2020-02-01"));
}
