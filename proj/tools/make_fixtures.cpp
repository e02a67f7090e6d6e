// make_fixtures: writes the deterministic fixture corpora under data/fixtures.
//
//   eval_articles.jsonl, eval_chunks.jsonl, eval_qa.jsonl
//       50 synthetic articles of 4 paragraphs (200 chunks) and one question per
//       article. Distractor paragraphs repeat the generic vocabulary of the
//       questions; answer paragraphs carry a rare entity name.
//   diversity_chunks.jsonl, diversity_query.json
//       10 near-duplicate chunks on one topic and 10 on another.
//   service_chunks.jsonl
//       6 dated articles for the HTTP service.
//   reader_chunks.jsonl, reader_qa.jsonl
//       Passages with questions whose answer is not the reader's first span.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "odqa/odqa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(odqa::bounded_draw(engine_, n)); }
  bool chance(std::size_t percent) { return below(100) < percent; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                          "br", "dr", "kl", "pr", "st", "tr"};
const std::vector<std::string> kVowels = {"a", "e", "i", "o", "u", "ai", "eo"};
const std::vector<std::string> kCodas = {"", "", "n", "r", "l", "x", "m", "s"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += rng.pick(kOnsets) + rng.pick(kVowels);
  return w + rng.pick(kCodas);
}

std::vector<std::string> unique_words(Rng& rng, std::size_t count, std::size_t syllables,
                                      std::set<std::string>& taken) {
  const auto& stop = odqa::Stoplist::english();
  std::vector<std::string> out;
  while (out.size() < count) {
    auto w = pseudo_word(rng, syllables);
    if (stop.contains(w) || !taken.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

const std::vector<std::string> kGeneric = {"patients", "respiratory", "infection", "clinical", "trials",
                                           "treatment", "outcomes", "severe", "hospital", "disease"};
const std::vector<std::string> kGenericPhrases = {
    "patients with respiratory infection", "in clinical trials", "treatment outcomes",
    "severe respiratory disease", "hospital patients", "clinical outcomes of infection"};
const std::vector<std::string> kJournals = {"Journal of Emerging Infections", "Clinical Virology Reports",
                                            "Respiratory Medicine Letters", "Epidemiology Today"};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string neutral_sentence(Rng& rng, const std::vector<std::string>& vocab) {
  const std::size_t n = 8 + rng.below(9);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += (i > 0 && i % 4 == 0) ? std::string(rng.chance(50) ? "the" : "of") : rng.pick(vocab);
  }
  return capitalize(s) + ".";
}

std::string generic_sentence(Rng& rng, const std::vector<std::string>& vocab) {
  const std::size_t n = 3 + rng.below(3);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += rng.chance(70) ? rng.pick(kGenericPhrases) : rng.pick(kGeneric) + " " + rng.pick(vocab);
  }
  return capitalize(s) + ".";
}

std::string paragraph(Rng& rng, std::vector<std::string> sentences_in, std::size_t min_tokens,
                      const std::function<std::string()>& make) {
  std::vector<std::string> sentences = std::move(sentences_in);
  std::size_t tokens = 0;
  for (const auto& s : sentences) tokens += odqa::count_tokens(s);
  const std::size_t target = min_tokens + rng.below(40);
  while (tokens < target) {
    auto s = make();
    tokens += odqa::count_tokens(s);
    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(rng.below(sentences.size() + 1)), std::move(s));
  }
  std::string out;
  for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
  return out;
}

std::string date_string(Rng& rng) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu-%02zu-%02zu", 2020 + rng.below(2), 1 + rng.below(12), 1 + rng.below(28));
  return buf;
}

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  odqa::JsonlWriter w(path);
  for (const auto& r : rows) w.write(r);
}

std::vector<json> chunk_rows(const std::vector<odqa::Article>& articles) {
  std::vector<json> rows;
  for (const auto& a : articles)
    for (const auto& c : odqa::chunk_article(a)) rows.push_back(odqa::chunk_to_json(c));
  return rows;
}

// ---------------------------------------------------------------------------

void eval_fixture(const fs::path& dir) {
  Rng rng(20200311);
  std::set<std::string> taken;
  const auto vocab = unique_words(rng, 1500, 2, taken);
  const auto entities = unique_words(rng, 50, 3, taken);
  const auto answer_words = unique_words(rng, 150, 2, taken);
  const std::vector<std::string> verbs = {"lowered", "raised", "blocked", "restored", "shortened"};
  const std::vector<std::string> nouns = {"markers", "levels", "titers", "counts", "scores"};
  const std::vector<std::string> templates = {
      "What did %s treatment change for patients with respiratory infection in clinical trials?",
      "Which outcomes did %s treatment affect in hospital patients with severe respiratory disease?",
      "In clinical trials of respiratory infection, what was the effect of %s treatment on patients?",
      "What did %s treatment change?"};

  std::vector<odqa::Article> articles;
  std::vector<json> qa;
  for (std::size_t i = 0; i < 50; ++i) {
    odqa::Article a;
    char id[16];
    std::snprintf(id, sizeof id, "syn-%03zu", i);
    a.article_id = id;
    a.title = capitalize(rng.pick(vocab)) + " " + rng.pick(vocab) + " in respiratory infection";
    a.journal = rng.pick(kJournals);
    a.publish_date = odqa::parse_date(date_string(rng));

    const auto& entity = entities[i];
    const std::string answer = verbs[i % verbs.size()] + " " + answer_words[3 * i] + " " + answer_words[3 * i + 1] +
                               " " + answer_words[3 * i + 2] + " " + nouns[(i / 5) % nouns.size()];
    const std::size_t answer_paragraph = i % 4;
    for (std::size_t p = 0; p < 4; ++p) {
      std::vector<std::string> seed;
      std::function<std::string()> filler = [&] { return neutral_sentence(rng, vocab); };
      if (p == answer_paragraph) {
        seed.push_back("In the " + rng.pick(vocab) + " cohort, " + entity + " treatment " + answer + ".");
        for (std::size_t r = 0; r < i % 3; ++r)
          seed.push_back(capitalize(entity) + " " + rng.pick(vocab) + " " + rng.pick(vocab) + " was " +
                         rng.pick(vocab) + ".");
      } else if (rng.chance(55)) {
        filler = [&] { return generic_sentence(rng, vocab); };
      }
      a.paragraphs.push_back(paragraph(rng, seed, 110, filler));
    }
    char qbuf[256];
    std::snprintf(qbuf, sizeof qbuf, templates[i % templates.size()].c_str(), entity.c_str());
    char qid[16];
    std::snprintf(qid, sizeof qid, "eval-%03zu", i);
    qa.push_back({{"question_id", qid}, {"question", qbuf}, {"answer", answer}, {"context_article_id", a.article_id}});
    articles.push_back(std::move(a));
  }

  std::vector<json> article_rows;
  for (const auto& a : articles) article_rows.push_back(odqa::article_to_json(a));
  write_lines(dir / "eval_articles.jsonl", article_rows);
  const auto chunks = chunk_rows(articles);
  write_lines(dir / "eval_chunks.jsonl", chunks);
  write_lines(dir / "eval_qa.jsonl", qa);
  std::cerr << "eval: " << articles.size() << " articles, " << chunks.size() << " chunks, " << qa.size()
            << " questions\n";
}

// ---------------------------------------------------------------------------

void diversity_fixture(const fs::path& dir) {
  const std::string mask_base =
      "Surgical masks reduce transmission of respiratory droplets in crowded indoor settings. Mask wearing "
      "by health workers lowered infection rates in hospital wards. Cloth masks filter fewer droplets than "
      "surgical masks but still reduce transmission.";
  const std::string vent_base =
      "Ventilation of indoor rooms dilutes airborne particles and lowers transmission. Opening windows and "
      "running air filters reduced infection in schools. Poorly ventilated rooms concentrate aerosols "
      "over time.";
  const std::vector<std::string> mask_extra = {"Fit testing improves the seal.", "Masks were worn for eight hours.",
                                               "Compliance was high among nurses.", "Reuse degraded filtration.",
                                               "N95 respirators performed best."};
  const std::vector<std::string> vent_extra = {"Carbon dioxide monitors tracked air quality.",
                                               "Air changes per hour were measured.",
                                               "Portable purifiers ran continuously.",
                                               "Classrooms were tested in winter.", "Ceiling fans mixed the air."};
  std::vector<json> rows;
  auto add = [&](const std::string& prefix, std::size_t i, const std::string& base,
                 const std::vector<std::string>& extra) {
    char id[32];
    std::snprintf(id, sizeof id, "%s-%02zu", prefix.c_str(), i);
    std::string text = base + " " + extra[i % extra.size()] + " " + extra[(i + 2) % extra.size()];
    odqa::PassageChunk c{id, id, text, odqa::count_tokens(text), {0, text.size()}, "Fixture Journal",
                         odqa::parse_date("2020-06-01"), prefix == "mask" ? "Masks" : "Ventilation"};
    rows.push_back(odqa::chunk_to_json(c));
  };
  for (std::size_t i = 0; i < 10; ++i) add("mask", i, mask_base, mask_extra);
  for (std::size_t i = 0; i < 10; ++i) add("vent", i, vent_base, vent_extra);
  write_lines(dir / "diversity_chunks.jsonl", rows);
  odqa::JsonlWriter q(dir / "diversity_query.json");
  q.write({{"question", "Do masks reduce transmission of infection indoors?"}});
}

// ---------------------------------------------------------------------------

struct Doc {
  const char* id;
  const char* title;
  const char* journal;
  const char* date;  // empty = undated
  const char* text;
};

void service_fixture(const fs::path& dir) {
  const std::vector<Doc> docs = {
      {"svc-symptoms", "Clinical features of COVID-19", "Clinical Virology Reports", "2020-03-15",
       "The most common symptoms of covid are fever, dry cough and fatigue. Loss of taste or smell was reported "
       "by many patients in the first week. Shortness of breath marks more severe disease and may need oxygen."},
      {"svc-transmission", "Routes of SARS-CoV-2 transmission", "Journal of Emerging Infections", "2020-05-02",
       "The virus spreads mainly through respiratory droplets and aerosols between people in close contact. "
       "Surface contamination plays a smaller role. Crowded indoor spaces carry the highest risk of spread."},
      {"svc-vaccines", "Efficacy of mRNA vaccines", "Vaccine Research Letters", "2021-01-20",
       "Two doses of mRNA vaccine prevented symptomatic infection in over ninety percent of trial participants. "
       "Protection against severe illness remained high for months after the second dose."},
      {"svc-children", "Covid in children", "Pediatric Infectious Disease", "2020-09-10",
       "Children with covid usually have mild symptoms such as runny nose and sore throat. A rare inflammatory "
       "syndrome can follow infection weeks later and requires hospital care."},
      {"svc-treatment", "Dexamethasone for hospitalised patients", "Respiratory Medicine Letters", "2020-07-17",
       "Dexamethasone reduced mortality among hospitalised patients who needed oxygen or mechanical ventilation. "
       "No benefit was seen in patients who did not require respiratory support."},
      {"svc-incubation", "Incubation period estimates", "Epidemiology Today", "",
       "The incubation period of the coronavirus has a median of about five days. Almost all infected people "
       "who develop illness do so within fourteen days of exposure."}};
  std::vector<json> rows;
  for (const auto& d : docs) {
    const std::string text = d.text;
    odqa::PassageChunk c{d.id, d.id, text, odqa::count_tokens(text), {0, text.size()}, d.journal,
                         *d.date ? odqa::parse_date(d.date) : std::nullopt, d.title};
    rows.push_back(odqa::chunk_to_json(c));
  }
  write_lines(dir / "service_chunks.jsonl", rows);
}

// ---------------------------------------------------------------------------

void reader_fixture(const fs::path& dir) {
  struct Item {
    const char* question;
    const char* answer;
    const char* passage;
  };
  const std::vector<Item> items = {
      {"Which receptor does the spike protein bind?", "binds the ACE2 receptor",
       "The spike protein of the virus is heavily glycosylated, and the spike protein changes shape during entry. "
       "Later structural work showed that it binds the ACE2 receptor on host cells."},
      {"Which drug reduced mortality in patients receiving oxygen?", "dexamethasone reduced mortality",
       "Trials looked for drugs in patients receiving oxygen, enrolling patients receiving oxygen at many sites. "
       "Hydroxychloroquine showed no benefit. In the largest arm, dexamethasone reduced mortality by a third."},
      {"How long does the virus stay stable on plastic?", "stable on plastic for up to three days",
       "The virus was stable for four hours on copper and the virus was stable for one day on cardboard in the "
       "laboratory. It stayed stable on plastic for up to three days."},
      {"What is the median incubation period?", "median incubation period is about five days",
       "The incubation period is the time from exposure to the first symptoms. Pooled data suggest the median "
       "incubation period is about five days, with a long tail."},
      {"What fraction of infections are asymptomatic?", "about one third of infections",
       "Screening studies estimated the fraction of infections without symptoms. About one third of infections "
       "stayed asymptomatic throughout follow-up."}};
  std::vector<json> chunks, qa;
  for (std::size_t i = 0; i < items.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "reader-%02zu", i);
    const std::string text = items[i].passage;
    odqa::PassageChunk c{std::string(id) + "#0000", id, text, odqa::count_tokens(text), {0, text.size()},
                         "Fixture Journal", odqa::parse_date("2020-04-01"), "Reader fixture"};
    chunks.push_back(odqa::chunk_to_json(c));
    char qid[32];
    std::snprintf(qid, sizeof qid, "read-%02zu", i);
    qa.push_back({{"question_id", qid},
                  {"question", items[i].question},
                  {"answer", items[i].answer},
                  {"context_article_id", id}});
  }
  write_lines(dir / "reader_chunks.jsonl", chunks);
  write_lines(dir / "reader_qa.jsonl", qa);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixtures");
  try {
    fs::create_directories(dir);
    eval_fixture(dir);
    diversity_fixture(dir);
    service_fixture(dir);
    reader_fixture(dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
