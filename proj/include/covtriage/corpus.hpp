#ifndef COVTRIAGE_CORPUS_HPP
#define COVTRIAGE_CORPUS_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "covtriage/error.hpp"

namespace covtriage {

/// Half-open [begin, end) interval of byte offsets into a UTF-8 string, or of
/// token indices within a sentence.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin >= end; }
  bool contains(const Span& other) const { return begin <= other.begin && other.end <= end; }
  bool overlaps(const Span& other) const { return begin < other.end && other.begin < end; }
  auto operator<=>(const Span&) const = default;
};

struct Token {
  Span char_range;      // into Post::text
  std::string surface;  // exact slice of the text
};

struct Sentence {
  Span char_range;
  std::vector<Token> tokens;
};

enum class ConceptLabel { SYM, SEVERITY, BPOC, DURATION, INTENSIFIER, NEGATION, OTHER };

constexpr int kNumConceptLabels = 7;  // including OTHER

const std::string& to_string(ConceptLabel label);
ConceptLabel concept_label_from_string(const std::string& s);

/// A labeled span of tokens inside one sentence. Character offsets are the
/// source of truth; token indices are derived from the tokenization.
struct ConceptSpan {
  ConceptLabel label = ConceptLabel::OTHER;
  std::size_t sentence_index = 0;
  Span token_range;  // token indices within the sentence
  Span char_range;   // byte offsets into the post text
  std::string text;  // exact slice of the post text

  auto operator<=>(const ConceptSpan&) const = default;
};

enum class RelationKind { SYM_SEVERITY, SYM_DURATION, SYM_BPOC, SYM_NEGATION, SYM_UNRESOLVED };

const std::string& to_string(RelationKind kind);
RelationKind relation_kind_from_string(const std::string& s);

/// Which modifier label a relation kind links to.
ConceptLabel modifier_label(RelationKind kind);

/// A typed symptom-modifier link. `value` holds the normalized severity
/// (1-5 scale) or duration (weeks). `negated` marks a severity whose nearest
/// negation attaches to the severity word rather than the symptom.
struct Relation {
  RelationKind kind = RelationKind::SYM_UNRESOLVED;
  ConceptSpan symptom;
  std::optional<ConceptSpan> modifier;
  std::optional<double> value;
  bool negated = false;

  auto operator<=>(const Relation&) const = default;
};

struct DoctorAnswers {
  int triage = 1;   // 1 = stay home, 2 = GP, 3 = hospital
  int rating = 1;   // Likert 1..5
  bool sufficient = true;

  auto operator<=>(const DoctorAnswers&) const = default;
};

enum class DoctorId { A, B, C };

const std::string& to_string(DoctorId id);

struct Post {
  std::string id;
  std::string text;
  std::vector<Sentence> sentences;
};

struct AnnotatedPost {
  Post post;
  std::vector<ConceptSpan> gold_concepts;
  std::vector<Relation> gold_relations;
  std::map<DoctorId, DoctorAnswers> answers;  // empty for unlabeled posts
  std::optional<std::vector<ConceptSpan>> predicted_concepts;
  std::optional<std::vector<Relation>> predicted_relations;

  bool labeled() const { return !answers.empty(); }
};

bool operator==(const Post& a, const Post& b);
bool operator==(const Token& a, const Token& b);
bool operator==(const Sentence& a, const Sentence& b);
bool operator==(const AnnotatedPost& a, const AnnotatedPost& b);

/// A flat phrase dictionary. Entries are lowercase and trimmed; severity
/// lexicons carry a 1..5 value per phrase.
struct Lexicon {
  std::string category;
  std::set<std::string> entries;
  std::map<std::string, double> values;

  bool contains(const std::string& phrase) const { return entries.count(phrase) > 0; }
};

/// Named lexicon categories used across the pipeline.
namespace lexcat {
inline constexpr const char* kSymptom = "Symptom";
inline constexpr const char* kSeverity = "Severity";
inline constexpr const char* kDuration = "Duration";
inline constexpr const char* kIntensifier = "Intensifier";
inline constexpr const char* kNegation = "Negation";
inline constexpr const char* kStopWord = "StopWord";
inline constexpr const char* kSemSignOrSymptom = "SemType:SignOrSymptom";
inline constexpr const char* kSemDiseaseOrSyndrome = "SemType:DiseaseOrSyndrome";
inline constexpr const char* kSemBodyPart = "SemType:BodyPart";
}  // namespace lexcat

/// Validates all structural invariants of a post and its annotations.
/// Throws ValidationError naming the violated invariant.
void validate(const AnnotatedPost& ap);

/// Resolves a character-range annotation against the post's tokenization.
/// Throws ValidationError when the range does not align with token
/// boundaries inside a single sentence.
ConceptSpan resolve_concept(const Post& post, ConceptLabel label, std::size_t start,
                            std::size_t end);

/// Corpus I/O: newline-delimited JSON records, one post per line. Sentence and
/// token boundaries are re-derived from the text on load; character offsets in
/// the file are authoritative.
std::vector<AnnotatedPost> load_corpus(const std::string& path);
void save_corpus(const std::vector<AnnotatedPost>& posts, const std::string& path);

/// Single-record (de)serialization used by load/save and the tests.
std::string to_json_line(const AnnotatedPost& post);
AnnotatedPost from_json_line(const std::string& line, std::size_t line_no);

/// Loads a lexicon file: one phrase per line, optional tab-separated numeric
/// value, '#' comment lines ignored. Entries are lowercased and deduplicated.
Lexicon load_lexicon(const std::string& path, const std::string& category);

/// Builds a lexicon in memory (used by tests and the generator).
Lexicon make_lexicon(const std::string& category,
                     const std::vector<std::pair<std::string, std::optional<double>>>& items);

/// All lexicons the pipeline consumes, loaded from a directory of fixed file
/// names (symptoms.txt, severity.txt, ...).
struct LexiconSet {
  Lexicon symptom, severity, duration, intensifier, negation, stop_words;
  Lexicon sem_sign_or_symptom, sem_disease_or_syndrome, sem_body_part;

  std::vector<const Lexicon*> dictionary() const {
    return {&symptom, &severity, &duration, &intensifier, &negation};
  }
  std::vector<const Lexicon*> semantic() const {
    return {&sem_sign_or_symptom, &sem_disease_or_syndrome, &sem_body_part};
  }
};

LexiconSet load_lexicon_set(const std::string& directory);

/// Lowercases ASCII letters in place; multi-byte UTF-8 sequences pass through.
std::string to_lower(std::string s);

}  // namespace covtriage

#endif
