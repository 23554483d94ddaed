#ifndef COVTRIAGE_RELEXT_HPP
#define COVTRIAGE_RELEXT_HPP

#include <vector>

#include "covtriage/corpus.hpp"

namespace covtriage {

struct RelationConfig {
  int max_distance = 5;
  bool skip_stop_words = true;
  Lexicon stop_words;
};

/// Token distance between two spans of one sentence: the number of tokens
/// strictly between their nearest edges, excluding stop words when the config
/// says so. Overlapping spans have distance 0.
int span_distance(const Sentence& sentence, const ConceptSpan& a, const ConceptSpan& b,
                  const RelationConfig& config);

/// A punctuation token between two spans ends the attachment scope: the pair
/// is not a linking candidate ("no fever, bad cough" keeps the cough
/// asserted).
bool pair_blocked(const Sentence& sentence, const ConceptSpan& a, const ConceptSpan& b);

/// Links each symptom of the sentence to its closest eligible modifier of
/// every kind within the configured distance; punctuation between a pair
/// blocks it. Ties prefer a modifier preceding the symptom, then the leftmost
/// one. A symptom with no modifier at all yields a single SYM_UNRESOLVED
/// relation. Intensifiers adjacent to a linked severity bump its value by one
/// (capped at 5); a negation lying closer to a linked severity than to the
/// symptom negates the severity instead of the symptom.
std::vector<Relation> extract_relations(const Sentence& sentence,
                                        const std::vector<ConceptSpan>& concepts,
                                        const RelationConfig& config,
                                        const Lexicon& severity_lexicon);

/// Convenience wrapper running extraction over every sentence of a post.
std::vector<Relation> extract_relations(const Post& post,
                                        const std::vector<ConceptSpan>& concepts,
                                        const RelationConfig& config,
                                        const Lexicon& severity_lexicon);

/// Severity phrase -> 1..5 scale value from the lexicon; +1 (capped at 5)
/// when intensified. Unknown phrases default to 3 with a logged warning.
double normalize_severity(const ConceptSpan& span, const Lexicon& severity_lexicon,
                          bool intensified);

/// Duration phrase -> weeks: day=1/7, week=1, fortnight=2, month=30/7,
/// year=365/7, truncated toward zero to 2 decimals. Accepts digit counts,
/// decimal counts and word numbers ("a week", "two days", "couple of days").
/// Throws ParseError for text it cannot read.
double normalize_duration(const ConceptSpan& span);

/// Non-throwing probe used when filtering candidate duration modifiers.
bool try_normalize_duration(const std::string& text, double& weeks_out);

}  // namespace covtriage

#endif
