#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covtriage/preprocess.hpp"
#include "covtriage/rng.hpp"

using namespace covtriage;

namespace {

std::vector<std::string> surfaces(const Sentence& s) {
  std::vector<std::string> out;
  for (const Token& t : s.tokens) out.push_back(t.surface);
  return out;
}

}  // namespace

TEST_CASE("empty text yields no sentences") {
  CHECK(split_and_tokenize("").empty());
  CHECK(split_and_tokenize("   ").empty());
}

TEST_CASE("two sentences tokenize as stated") {
  auto sentences = split_and_tokenize("I have a dry cough. It hurts.");
  REQUIRE(sentences.size() == 2);
  CHECK(surfaces(sentences[0]) == std::vector<std::string>{"I", "have", "a", "dry", "cough", "."});
  CHECK(surfaces(sentences[1]) == std::vector<std::string>{"It", "hurts", "."});
}

TEST_CASE("abbreviation guard keeps e.g. inside one sentence") {
  auto sentences = split_and_tokenize("e.g. fever");
  CHECK(sentences.size() == 1);
  auto more = split_and_tokenize("See Dr. Smith today. Then rest.");
  CHECK(more.size() == 2);
}

TEST_CASE("offsets reconstruct the original text exactly") {
  const std::string texts[] = {
      "I have a dry cough. It hurts.",
      "Isn't it bad? Yes! Honestly, e.g. 10.5 days... fine.",
      "My temp is 38.2 and I can't sleep.",
  };
  for (const std::string& text : texts) {
    auto sentences = split_and_tokenize(text);
    for (const Sentence& s : sentences) {
      REQUIRE(s.char_range.end <= text.size());
      for (const Token& t : s.tokens) {
        CHECK(text.substr(t.char_range.begin, t.char_range.size()) == t.surface);
      }
    }
  }
}

TEST_CASE("contractions split at the apostrophe") {
  auto sentences = split_and_tokenize("I can't sleep");
  REQUIRE(sentences.size() == 1);
  CHECK(surfaces(sentences[0]) == std::vector<std::string>{"I", "can", "'t", "sleep"});
}

TEST_CASE("decimal numbers stay one token") {
  auto sentences = split_and_tokenize("about 10.5 days then 3 weeks");
  REQUIRE(sentences.size() == 1);
  CHECK(surfaces(sentences[0]) ==
        std::vector<std::string>{"about", "10.5", "days", "then", "3", "weeks"});
}

TEST_CASE("dictionary flags cover single and multi-word matches") {
  Lexicon negation = make_lexicon(lexcat::kNegation, {{"no", {}}});
  Lexicon symptom = make_lexicon(lexcat::kSymptom, {{"fever", {}}, {"sore throat", {}}});
  auto sents = split_and_tokenize("no fever and sore throat");
  REQUIRE(sents.size() == 1);
  auto flags = dictionary_flags(sents[0], {&negation, &symptom});
  REQUIRE(flags.size() == 5);
  CHECK(flags[0] == std::set<std::string>{lexcat::kNegation});
  CHECK(flags[1] == std::set<std::string>{lexcat::kSymptom});
  CHECK(flags[2].empty());
  CHECK(flags[3] == std::set<std::string>{lexcat::kSymptom});  // sore
  CHECK(flags[4] == std::set<std::string>{lexcat::kSymptom});  // throat
}

TEST_CASE("each category flags independently") {
  Lexicon intens = make_lexicon(lexcat::kIntensifier, {{"very", {}}});
  Lexicon severity = make_lexicon(lexcat::kSeverity, {{"severe", 4.0}});
  Lexicon symptom = make_lexicon(lexcat::kSymptom, {{"pain", {}}});
  auto sents = split_and_tokenize("very severe pain");
  auto flags = dictionary_flags(sents[0], {&intens, &severity, &symptom});
  CHECK(flags[0] == std::set<std::string>{lexcat::kIntensifier});
  CHECK(flags[1] == std::set<std::string>{lexcat::kSeverity});
  CHECK(flags[2] == std::set<std::string>{lexcat::kSymptom});
}

TEST_CASE("longest match wins inside one category") {
  Lexicon severity = make_lexicon(lexcat::kSeverity, {{"mild", 2.0}, {"very mild", 1.0}});
  auto sents = split_and_tokenize("very mild cough");
  auto flags = dictionary_flags(sents[0], {&severity});
  CHECK(flags[0] == std::set<std::string>{lexcat::kSeverity});
  CHECK(flags[1] == std::set<std::string>{lexcat::kSeverity});
  CHECK(flags[2].empty());
}

TEST_CASE("semantic flags mirror the dictionary matcher") {
  Lexicon body = make_lexicon(lexcat::kSemBodyPart, {{"chest", {}}});
  Lexicon disease = make_lexicon(lexcat::kSemDiseaseOrSyndrome, {{"pneumonia", {}}});
  auto sents = split_and_tokenize("chest pneumonia nothing");
  auto flags = semantic_flags(sents[0], {&body, &disease});
  CHECK(flags[0] == std::set<std::string>{lexcat::kSemBodyPart});
  CHECK(flags[1] == std::set<std::string>{lexcat::kSemDiseaseOrSyndrome});
  CHECK(flags[2].empty());
}

TEST_CASE("phrase matching never flags a token outside a matched phrase") {
  // brute-force oracle: a token may carry a category flag only if some
  // lexicon phrase occurs as a token subsequence covering it
  const std::vector<std::string> words = {"no",   "fever", "sore", "throat", "very",
                                          "mild", "pain",  "and",  "chest",  "ache"};
  Lexicon symptom = make_lexicon(
      lexcat::kSymptom, {{"fever", {}}, {"sore throat", {}}, {"chest ache", {}}, {"pain", {}}});
  Rng rng(99);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.uniform(8);
    std::string text;
    std::vector<std::string> chosen;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& w = words[rng.uniform(words.size())];
      chosen.push_back(w);
      if (!text.empty()) text += ' ';
      text += w;
    }
    auto sents = split_and_tokenize(text);
    REQUIRE(sents.size() == 1);
    auto flags = dictionary_flags(sents[0], {&symptom});
    for (std::size_t t = 0; t < chosen.size(); ++t) {
      bool covered = false;
      for (const std::string& phrase : symptom.entries) {
        std::vector<std::string> pw;
        std::size_t pos = 0;
        while (pos < phrase.size()) {
          std::size_t sp = phrase.find(' ', pos);
          if (sp == std::string::npos) sp = phrase.size();
          pw.push_back(phrase.substr(pos, sp - pos));
          pos = sp + 1;
        }
        for (std::size_t start = 0; start + pw.size() <= chosen.size(); ++start) {
          bool match = true;
          for (std::size_t k = 0; k < pw.size(); ++k) {
            if (chosen[start + k] != pw[k]) {
              match = false;
              break;
            }
          }
          if (match && start <= t && t < start + pw.size()) covered = true;
        }
      }
      if (!flags[t].empty()) CHECK(covered);
    }
  }
}

TEST_CASE("featurize emits w0 and shape with no offset features at window 0") {
  auto sents = split_and_tokenize("Fever");
  std::vector<TokenFlags> flags(1);
  auto feats = featurize(sents[0], flags, 0);
  REQUIRE(feats.size() == 1);
  const auto& fs = feats[0].features;
  CHECK(std::find(fs.begin(), fs.end(), "w0=fever") != fs.end());
  CHECK(std::find(fs.begin(), fs.end(), "shape0=Xxxxx") != fs.end());
  for (const std::string& f : fs) {
    CHECK(f.find("+1") == std::string::npos);
    CHECK(f.find("-1") == std::string::npos);
  }
}

TEST_CASE("window 2 features reference every offset for the middle token") {
  auto sents = split_and_tokenize("one two three four five");
  std::vector<TokenFlags> flags(5);
  auto feats = featurize(sents[0], flags, 2);
  const auto& fs = feats[2].features;
  CHECK(std::find(fs.begin(), fs.end(), "w-2=one") != fs.end());
  CHECK(std::find(fs.begin(), fs.end(), "w-1=two") != fs.end());
  CHECK(std::find(fs.begin(), fs.end(), "w0=three") != fs.end());
  CHECK(std::find(fs.begin(), fs.end(), "w+1=four") != fs.end());
  CHECK(std::find(fs.begin(), fs.end(), "w+2=five") != fs.end());
  // boundary markers at the edges
  CHECK(std::find(feats[0].features.begin(), feats[0].features.end(), "BOS") !=
        feats[0].features.end());
  CHECK(std::find(feats[4].features.begin(), feats[4].features.end(), "EOS") !=
        feats[4].features.end());
}

TEST_CASE("feature generation is deterministic") {
  LexiconSet lex = load_lexicon_set(COVTRIAGE_DATA_DIR "/lexicons");
  auto sents = split_and_tokenize("I have a very severe dry cough in my chest.");
  auto f1 = featurize(sents[0], token_flags(sents[0], lex), 2);
  auto f2 = featurize(sents[0], token_flags(sents[0], lex), 2);
  REQUIRE(f1.size() == f2.size());
  for (std::size_t t = 0; t < f1.size(); ++t) {
    CHECK(f1[t].features == f2[t].features);
  }
}

TEST_CASE("dict and sem flags both appear as features") {
  LexiconSet lex = load_lexicon_set(COVTRIAGE_DATA_DIR "/lexicons");
  auto sents = split_and_tokenize("severe cough in my chest");
  auto flags = token_flags(sents[0], lex);
  auto feats = featurize(sents[0], flags, 0);
  CHECK(std::find(feats[0].features.begin(), feats[0].features.end(), "dict0=Severity") !=
        feats[0].features.end());
  CHECK(std::find(feats[1].features.begin(), feats[1].features.end(), "dict0=Symptom") !=
        feats[1].features.end());
  CHECK(std::find(feats[4].features.begin(), feats[4].features.end(), "sem0=BodyPart") !=
        feats[4].features.end());
}
