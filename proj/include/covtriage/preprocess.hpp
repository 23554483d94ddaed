#ifndef COVTRIAGE_PREPROCESS_HPP
#define COVTRIAGE_PREPROCESS_HPP

#include <set>
#include <string>
#include <vector>

#include "covtriage/corpus.hpp"

namespace covtriage {

/// Rule tokenizer: sentence boundaries at .!? followed by whitespace (with an
/// abbreviation guard list), tokens split on whitespace and punctuation,
/// contractions split at the apostrophe. Offsets reconstruct the input
/// exactly.
std::vector<Sentence> split_and_tokenize(const std::string& text);

/// Dictionary and semantic-type membership of one token, filled by phrase
/// matching against the lexicons.
struct TokenFlags {
  std::set<std::string> dict;  // e.g. "Symptom", "Severity"
  std::set<std::string> sem;   // e.g. "BodyPart", "DiseaseOrSyndrome"
};

/// Longest-match-first, left-to-right multi-word phrase matching over
/// lowercase surfaces. Every token covered by a matched phrase receives the
/// lexicon's category flag; matches from different lexicons may overlap.
std::vector<std::set<std::string>> dictionary_flags(const Sentence& sentence,
                                                    const std::vector<const Lexicon*>& lexicons);

/// Same matcher over the three semantic-type lexicons standing in for a
/// medical term mapper. Flags are the bare type names ("SignOrSymptom", ...).
std::vector<std::set<std::string>> semantic_flags(const Sentence& sentence,
                                                  const std::vector<const Lexicon*>& semlex);

std::vector<TokenFlags> token_flags(const Sentence& sentence, const LexiconSet& lexicons);

struct TokenFeatures {
  int token_index = 0;
  std::vector<std::string> features;  // sorted, unique
};

/// Per-token feature strings: lowercase identity, word shape, 3-char
/// prefix/suffix and all flags, each emitted for every relative offset in
/// [-window, +window], plus BOS/EOS markers at the sentence boundaries.
std::vector<TokenFeatures> featurize(const Sentence& sentence,
                                     const std::vector<TokenFlags>& flags, int window);

constexpr int kDefaultFeatureWindow = 2;

/// Case/digit pattern of a token: X, x, 9, plain punctuation kept, # other.
std::string word_shape(const std::string& surface);

}  // namespace covtriage

#endif
