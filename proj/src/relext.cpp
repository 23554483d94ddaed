#include "covtriage/relext.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "covtriage/log.hpp"

namespace covtriage {

int span_distance(const Sentence& sentence, const ConceptSpan& a, const ConceptSpan& b,
                  const RelationConfig& config) {
  std::size_t lo, hi;
  if (a.token_range.end <= b.token_range.begin) {
    lo = a.token_range.end;
    hi = b.token_range.begin;
  } else if (b.token_range.end <= a.token_range.begin) {
    lo = b.token_range.end;
    hi = a.token_range.begin;
  } else {
    return 0;  // overlapping spans
  }
  int d = 0;
  for (std::size_t t = lo; t < hi; ++t) {
    if (config.skip_stop_words &&
        config.stop_words.contains(to_lower(sentence.tokens[t].surface))) {
      continue;
    }
    ++d;
  }
  return d;
}

namespace {

bool is_punct_token(const std::string& surface) {
  if (surface.empty()) return false;
  for (unsigned char ch : surface) {
    if (std::isalnum(ch) != 0 || ch >= 0x80 || ch == '\'') return false;
  }
  return true;
}

}  // namespace

bool pair_blocked(const Sentence& sentence, const ConceptSpan& a, const ConceptSpan& b) {
  std::size_t lo, hi;
  if (a.token_range.end <= b.token_range.begin) {
    lo = a.token_range.end;
    hi = b.token_range.begin;
  } else if (b.token_range.end <= a.token_range.begin) {
    lo = b.token_range.end;
    hi = a.token_range.begin;
  } else {
    return false;
  }
  for (std::size_t t = lo; t < hi; ++t) {
    if (is_punct_token(sentence.tokens[t].surface)) return true;
  }
  return false;
}

namespace {

/// Closest eligible candidate of one label for a symptom; ties prefer
/// preceding modifiers, then the leftmost.
const ConceptSpan* closest_modifier(const Sentence& sentence, const ConceptSpan& symptom,
                                    const std::vector<const ConceptSpan*>& candidates,
                                    const RelationConfig& config, int* out_distance) {
  const ConceptSpan* best = nullptr;
  int best_d = 0;
  bool best_precedes = false;
  for (const ConceptSpan* cand : candidates) {
    int d = span_distance(sentence, symptom, *cand, config);
    if (d > config.max_distance) continue;
    if (pair_blocked(sentence, symptom, *cand)) continue;
    bool precedes = cand->token_range.end <= symptom.token_range.begin;
    bool better = false;
    if (!best) {
      better = true;
    } else if (d != best_d) {
      better = d < best_d;
    } else if (precedes != best_precedes) {
      better = precedes;
    } else {
      better = cand->token_range.begin < best->token_range.begin;
    }
    if (better) {
      best = cand;
      best_d = d;
      best_precedes = precedes;
    }
  }
  if (best && out_distance) *out_distance = best_d;
  return best;
}

}  // namespace

double normalize_severity(const ConceptSpan& span, const Lexicon& severity_lexicon,
                          bool intensified) {
  std::string phrase = to_lower(span.text);
  double value = 3.0;
  auto it = severity_lexicon.values.find(phrase);
  if (it != severity_lexicon.values.end()) {
    value = it->second;
  } else {
    log_warn("unknown severity phrase '" + phrase + "', defaulting to 3 (moderate)");
  }
  if (intensified) value = std::min(5.0, value + 1.0);
  return value;
}

namespace {

const std::map<std::string, double>& number_words() {
  static const std::map<std::string, double> words = {
      {"a", 1},     {"an", 1},     {"one", 1},    {"two", 2},    {"three", 3}, {"four", 4},
      {"five", 5},  {"six", 6},    {"seven", 7},  {"eight", 8},  {"nine", 9},  {"ten", 10},
      {"eleven", 11}, {"twelve", 12}, {"twenty", 20}, {"thirty", 30}, {"couple", 2},
      {"few", 3},   {"several", 3}};
  return words;
}

/// Unit length as a fraction of a week, kept as numerator/denominator so
/// "count * num / den" divides exactly whenever it should (7 days == 1.00).
struct UnitFraction {
  double num;
  double den;
};

std::optional<UnitFraction> unit_in_weeks(const std::string& w) {
  if (w == "day" || w == "days") return UnitFraction{1.0, 7.0};
  if (w == "week" || w == "weeks" || w == "wk" || w == "wks") return UnitFraction{1.0, 1.0};
  if (w == "fortnight" || w == "fortnights") return UnitFraction{2.0, 1.0};
  if (w == "month" || w == "months") return UnitFraction{30.0, 7.0};
  if (w == "year" || w == "years") return UnitFraction{365.0, 7.0};
  return std::nullopt;
}

std::optional<double> parse_count(const std::string& w) {
  if (!w.empty() && (std::isdigit(static_cast<unsigned char>(w[0])) != 0)) {
    try {
      std::size_t used = 0;
      double v = std::stod(w, &used);
      if (used == w.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
  }
  auto it = number_words().find(w);
  if (it != number_words().end()) return it->second;
  return std::nullopt;
}

}  // namespace

bool try_normalize_duration(const std::string& text, double& weeks_out) {
  std::istringstream in(to_lower(text));
  std::vector<std::string> words;
  std::string w;
  while (in >> w) words.push_back(w);

  for (std::size_t i = 0; i < words.size(); ++i) {
    std::optional<UnitFraction> unit = unit_in_weeks(words[i]);
    if (!unit) continue;
    // nearest count word before the unit; "a week" and "couple of days" both
    // resolve through the number-word table
    for (std::size_t back = i; back-- > 0;) {
      std::optional<double> count = parse_count(words[back]);
      if (count) {
        double weeks = *count * unit->num / unit->den;
        weeks_out = std::floor(weeks * 100.0) / 100.0;  // truncate toward zero
        return weeks_out > 0.0;
      }
    }
    return false;
  }
  return false;
}

double normalize_duration(const ConceptSpan& span) {
  double weeks = 0.0;
  if (!try_normalize_duration(span.text, weeks)) {
    throw ParseError("cannot normalize duration phrase '" + span.text + "'");
  }
  return weeks;
}

std::vector<Relation> extract_relations(const Sentence& sentence,
                                        const std::vector<ConceptSpan>& concepts,
                                        const RelationConfig& config,
                                        const Lexicon& severity_lexicon) {
  if (config.max_distance < 1) throw Error("max_distance must be >= 1");

  std::vector<const ConceptSpan*> symptoms;
  std::map<ConceptLabel, std::vector<const ConceptSpan*>> modifiers;
  for (const ConceptSpan& c : concepts) {
    if (c.label == ConceptLabel::SYM) {
      symptoms.push_back(&c);
    } else {
      modifiers[c.label].push_back(&c);
    }
  }
  // Durations that cannot be normalized are not usable as modifiers.
  auto& durations = modifiers[ConceptLabel::DURATION];
  durations.erase(std::remove_if(durations.begin(), durations.end(),
                                 [](const ConceptSpan* d) {
                                   double weeks;
                                   return !try_normalize_duration(d->text, weeks);
                                 }),
                  durations.end());

  std::vector<Relation> out;
  for (const ConceptSpan* sym : symptoms) {
    std::vector<Relation> typed;

    const ConceptSpan* severity =
        closest_modifier(sentence, *sym, modifiers[ConceptLabel::SEVERITY], config, nullptr);
    if (severity) {
      bool intensified = false;
      for (const ConceptSpan* intens : modifiers[ConceptLabel::INTENSIFIER]) {
        if (span_distance(sentence, *severity, *intens, config) <= 1 &&
            !pair_blocked(sentence, *severity, *intens)) {
          intensified = true;
          break;
        }
      }
      Relation r;
      r.kind = RelationKind::SYM_SEVERITY;
      r.symptom = *sym;
      r.modifier = *severity;
      r.value = normalize_severity(*severity, severity_lexicon, intensified);
      typed.push_back(std::move(r));
    }

    const ConceptSpan* duration =
        closest_modifier(sentence, *sym, modifiers[ConceptLabel::DURATION], config, nullptr);
    if (duration) {
      Relation r;
      r.kind = RelationKind::SYM_DURATION;
      r.symptom = *sym;
      r.modifier = *duration;
      r.value = normalize_duration(*duration);
      typed.push_back(std::move(r));
    }

    const ConceptSpan* body =
        closest_modifier(sentence, *sym, modifiers[ConceptLabel::BPOC], config, nullptr);
    if (body) {
      Relation r;
      r.kind = RelationKind::SYM_BPOC;
      r.symptom = *sym;
      r.modifier = *body;
      typed.push_back(std::move(r));
    }

    const ConceptSpan* negation =
        closest_modifier(sentence, *sym, modifiers[ConceptLabel::NEGATION], config, nullptr);
    if (negation) {
      // A negation sitting closer to the linked severity than to the symptom
      // itself negates the severity ("not severe cough": the cough is
      // present, its severity is denied).
      bool negates_severity = false;
      if (severity && !pair_blocked(sentence, *negation, *severity)) {
        int d_sev = span_distance(sentence, *negation, *severity, config);
        int d_sym = span_distance(sentence, *negation, *sym, config);
        negates_severity = d_sev < d_sym;
      }
      if (negates_severity) {
        for (Relation& r : typed) {
          if (r.kind == RelationKind::SYM_SEVERITY) r.negated = true;
        }
      } else {
        Relation r;
        r.kind = RelationKind::SYM_NEGATION;
        r.symptom = *sym;
        r.modifier = *negation;
        typed.push_back(std::move(r));
      }
    }

    if (typed.empty()) {
      Relation r;
      r.kind = RelationKind::SYM_UNRESOLVED;
      r.symptom = *sym;
      out.push_back(std::move(r));
    } else {
      for (Relation& r : typed) out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Relation> extract_relations(const Post& post,
                                        const std::vector<ConceptSpan>& concepts,
                                        const RelationConfig& config,
                                        const Lexicon& severity_lexicon) {
  std::vector<Relation> out;
  for (std::size_t si = 0; si < post.sentences.size(); ++si) {
    std::vector<ConceptSpan> here;
    for (const ConceptSpan& c : concepts) {
      if (c.sentence_index == si) here.push_back(c);
    }
    if (here.empty()) continue;
    auto rels = extract_relations(post.sentences[si], here, config, severity_lexicon);
    for (Relation& r : rels) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace covtriage
