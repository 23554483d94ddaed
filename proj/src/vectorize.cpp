#include "covtriage/vectorize.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "covtriage/log.hpp"

namespace covtriage {

Vocabulary::Vocabulary(std::vector<std::string> phrases) {
  for (std::string& p : phrases) p = to_lower(p);
  std::sort(phrases.begin(), phrases.end());
  phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
  phrases_ = std::move(phrases);
}

int Vocabulary::index_of(const std::string& phrase) const {
  auto it = std::lower_bound(phrases_.begin(), phrases_.end(), phrase);
  if (it == phrases_.end() || *it != phrase) return -1;
  return static_cast<int>(it - phrases_.begin());
}

Vocabularies build_vocabularies(const std::vector<AnnotatedPost>& training_posts) {
  std::vector<std::string> symptoms, parts;
  for (const AnnotatedPost& ap : training_posts) {
    for (const ConceptSpan& c : ap.gold_concepts) {
      if (c.label == ConceptLabel::SYM) {
        symptoms.push_back(to_lower(c.text));
      } else if (c.label == ConceptLabel::BPOC) {
        parts.push_back(to_lower(c.text));
      }
    }
  }
  if (symptoms.empty()) log_warn("building an empty symptom vocabulary");
  return Vocabularies{Vocabulary(std::move(symptoms)), Vocabulary(std::move(parts))};
}

double PostVector::at(std::size_t i) const {
  auto it = std::lower_bound(values.begin(), values.end(), i,
                             [](const auto& p, std::size_t k) { return p.first < k; });
  if (it == values.end() || it->first != i) return 0.0;
  return it->second;
}

std::vector<double> PostVector::dense() const {
  std::vector<double> out(dimension, 0.0);
  for (const auto& [i, v] : values) out[i] = v;
  return out;
}

namespace {

void set_value(std::map<std::size_t, double>& acc, std::size_t i, double v) {
  if (v != 0.0) acc[i] = v;
}

PostVector finish(VectorKind kind, std::size_t dimension,
                  const std::map<std::size_t, double>& acc) {
  PostVector out;
  out.kind = kind;
  out.dimension = dimension;
  out.values.assign(acc.begin(), acc.end());
  return out;
}

/// Symptom block shared by both representations: phrase index -> 1 or -1.
std::map<std::size_t, double> symptom_block(const std::vector<ConceptSpan>& concepts,
                                            const std::vector<Relation>& relations,
                                            const Vocabulary& symptoms) {
  std::set<int> present, negated;
  for (const ConceptSpan& c : concepts) {
    if (c.label != ConceptLabel::SYM) continue;
    int i = symptoms.index_of(to_lower(c.text));
    if (i >= 0) present.insert(i);
  }
  for (const Relation& r : relations) {
    if (r.kind != RelationKind::SYM_NEGATION) continue;
    int i = symptoms.index_of(to_lower(r.symptom.text));
    if (i >= 0) negated.insert(i);
  }
  std::map<std::size_t, double> acc;
  for (int i : present) acc[static_cast<std::size_t>(i)] = 1.0;
  for (int i : negated) acc[static_cast<std::size_t>(i)] = -1.0;  // negation dominates
  return acc;
}

}  // namespace

PostVector symptom_only_vector(const std::vector<ConceptSpan>& concepts,
                               const std::vector<Relation>& relations,
                               const Vocabulary& symptoms) {
  return finish(VectorKind::SymptomOnly, symptoms.size(),
                symptom_block(concepts, relations, symptoms));
}

PostVector symptom_modifier_vector(const std::vector<ConceptSpan>& concepts,
                                   const std::vector<Relation>& relations,
                                   const Vocabularies& vocabs) {
  const std::size_t ns = vocabs.symptoms.size();
  const std::size_t nb = vocabs.body_parts.size();
  const std::size_t dim = ns + nb + 2 * ns;

  std::map<std::size_t, double> acc = symptom_block(concepts, relations, vocabs.symptoms);

  for (const Relation& r : relations) {
    int si = vocabs.symptoms.index_of(to_lower(r.symptom.text));
    switch (r.kind) {
      case RelationKind::SYM_BPOC: {
        int bi = vocabs.body_parts.index_of(to_lower(r.modifier->text));
        if (bi >= 0) set_value(acc, ns + static_cast<std::size_t>(bi), 1.0);
        break;
      }
      case RelationKind::SYM_DURATION: {
        if (si < 0 || !r.value) break;
        std::size_t slot = ns + nb + static_cast<std::size_t>(si);
        auto it = acc.find(slot);
        double prev = it == acc.end() ? 0.0 : it->second;
        set_value(acc, slot, std::max(prev, *r.value));  // maximum dominates
        break;
      }
      case RelationKind::SYM_SEVERITY: {
        if (si < 0 || !r.value) break;
        std::size_t slot = ns + nb + ns + static_cast<std::size_t>(si);
        auto it = acc.find(slot);
        double prev = it == acc.end() ? 0.0 : it->second;
        if (r.negated || prev < 0.0) {
          set_value(acc, slot, -1.0);  // negated severity dominates
        } else {
          set_value(acc, slot, std::max(prev, *r.value));
        }
        break;
      }
      default:
        break;
    }
  }
  return finish(VectorKind::SymptomModifier, dim, acc);
}

PostVector make_vector(const AnnotatedPost& post, const Vocabularies& vocabs, VectorKind kind,
                       Regime regime) {
  const std::vector<ConceptSpan>* concepts = &post.gold_concepts;
  const std::vector<Relation>* relations = &post.gold_relations;
  if (regime == Regime::Predicted) {
    if (!post.predicted_concepts || !post.predicted_relations) {
      throw Error("post '" + post.post.id + "' carries no predicted annotations");
    }
    concepts = &*post.predicted_concepts;
    relations = &*post.predicted_relations;
  }
  if (kind == VectorKind::SymptomOnly) {
    return symptom_only_vector(*concepts, *relations, vocabs.symptoms);
  }
  return symptom_modifier_vector(*concepts, *relations, vocabs);
}

std::string to_sparse_row(const PostVector& v) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  bool first = true;
  for (const auto& [i, val] : v.values) {
    if (!first) out << ' ';
    out << i << ':' << val;
    first = false;
  }
  return out.str();
}

}  // namespace covtriage
