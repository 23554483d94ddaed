#ifndef COVTRIAGE_VECTORIZE_HPP
#define COVTRIAGE_VECTORIZE_HPP

#include <string>
#include <vector>

#include "covtriage/corpus.hpp"

namespace covtriage {

/// Ordered, deduplicated, lowercase phrase list fixed at construction.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> phrases);

  std::size_t size() const { return phrases_.size(); }
  /// Index of a lowercase phrase, or -1 when out of vocabulary.
  int index_of(const std::string& phrase) const;
  const std::string& phrase(std::size_t i) const { return phrases_[i]; }
  const std::vector<std::string>& phrases() const { return phrases_; }

 private:
  std::vector<std::string> phrases_;
};

struct Vocabularies {
  Vocabulary symptoms;
  Vocabulary body_parts;
};

/// Collects distinct lowercase SYM / BPOC span texts from the training split,
/// sorted lexicographically.
Vocabularies build_vocabularies(const std::vector<AnnotatedPost>& training_posts);

enum class VectorKind { SymptomOnly, SymptomModifier };

/// Sparse fixed-length encoding of one post.
struct PostVector {
  VectorKind kind = VectorKind::SymptomOnly;
  std::size_t dimension = 0;
  std::vector<std::pair<std::size_t, double>> values;  // sorted by index, nonzero

  double at(std::size_t i) const;
  std::vector<double> dense() const;
};

/// Which annotation layer feeds the vectors.
enum class Regime { GroundTruth, Predicted };

/// Per-symptom 1 / 0 / -1 encoding (present / absent / negated). Negation
/// dominates assertion within a post; out-of-vocabulary symptoms are dropped.
PostVector symptom_only_vector(const std::vector<ConceptSpan>& concepts,
                               const std::vector<Relation>& relations,
                               const Vocabulary& symptoms);

/// Symptom block + body-part presence block + per-symptom duration block +
/// per-symptom severity block (0 absent, -1 negated, else value; maxima win
/// among multiple relations).
PostVector symptom_modifier_vector(const std::vector<ConceptSpan>& concepts,
                                   const std::vector<Relation>& relations,
                                   const Vocabularies& vocabs);

PostVector make_vector(const AnnotatedPost& post, const Vocabularies& vocabs, VectorKind kind,
                       Regime regime);

/// Sparse "index:value" text row (space separated), one line per vector.
std::string to_sparse_row(const PostVector& v);

}  // namespace covtriage

#endif
