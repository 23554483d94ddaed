#include "covtriage/synth.hpp"

#include <algorithm>
#include <cmath>

#include <sstream>

#include "covtriage/preprocess.hpp"
#include "covtriage/relext.hpp"
#include "covtriage/rng.hpp"

namespace covtriage {

namespace {

// Symptom pools. The first eight entries are fixed signal carriers: four
// COVID-typical phrases keyed to the rating and four triage markers keyed to
// the class. The remainder fills the pool up to the configured size.
const std::vector<std::string> kTypicalSymptoms = {"dry cough", "fever", "anosmia", "ageusia"};
const std::vector<std::string> kGpMarkers = {"wheeze", "palpitations"};
const std::vector<std::string> kHospitalMarkers = {"breathlessness", "chest tightness"};

const std::vector<std::string> kFillerSymptoms = {
    "headache",  "rash",      "soreness",  "cramps",   "runny nose", "nausea",
    "dizziness", "chills",    "fatigue",   "congestion", "hoarseness", "sneezing",
    "earache",   "itchiness", "sweats",    "shivering", "stiffness",  "bloating",
    "heartburn", "insomnia",  "drowsiness", "tremors",  "numbness",   "tingling",
    "weakness",  "queasiness", "backache", "sore throat", "muscle ache", "lightheadedness",
    // colloquial complaints deliberately absent from the seed lexicons: the
    // tagger has to carry them on context and word identity alone
    "twinges",   "gripes",    "throbs",    "prickles", "achiness",   "clamminess",
    "puffiness", "scratchiness", "wooziness", "tightness"};

const std::vector<std::string> kExpansionAdjectives = {
    "persistent", "dull",      "sharp",    "throbbing", "burning",  "nagging",
    "stabbing",   "pounding",  "splitting", "recurring", "constant", "occasional",
    "lingering",  "spreading", "shifting", "pulsing",   "gnawing",  "piercing",
    "grinding",   "fluttering", "prickling", "stinging", "cramping", "wrenching",
    "searing",    "shooting",  "radiating", "twitching", "drumming", "flaring",
    "tender",     "relentless", "creeping"};

const std::vector<std::string> kBodyParts = {"chest",   "throat",  "head",    "lungs",
                                             "back",    "stomach", "muscles", "sinuses"};

const std::vector<std::string> kIntensifiers = {"very", "really", "extremely"};

// severity words by triage class: low, medium, high
const std::vector<std::vector<std::string>> kSeverityByClass = {
    {"slight", "mild"}, {"moderate", "noticeable"}, {"severe", "terrible"}};

const std::vector<std::string> kDurationUnitsSingular = {"day", "week", "month"};
const std::vector<std::string> kDurationUnitsPlural = {"days", "weeks", "months"};
const std::vector<std::string> kNumberWords = {"",    "one", "two",   "three", "four", "five",
                                               "six", "seven", "eight", "nine", "ten"};

const std::vector<std::vector<std::string>> kDistractorSentences = {
    {"The", "weather", "stayed", "lovely", "today"},
    {"My", "neighbour", "waved", "from", "the", "garden", "this", "morning"},
    {"The", "street", "outside", "was", "quiet", "all", "afternoon"},
    {"I", "listened", "to", "the", "radio", "with", "the", "windows", "open"},
    {"The", "kettle", "has", "been", "busy", "since", "sunrise"}};

const std::vector<std::string> kDistractorWords = {"honestly", "frankly", "overall",
                                                   "lately",   "somehow", "apparently"};

double severity_value(const std::string& word) {
  for (const auto& [w, v] : generator_severity_scale()) {
    if (w == word) return v;
  }
  throw Error("generator severity word '" + word + "' missing from scale");
}

/// Assembles one post as space-separated words while recording char ranges
/// of annotations; spans are resolved against the real tokenizer afterwards.
class PostBuilder {
 public:
  struct PlannedConcept {
    ConceptLabel label;
    std::size_t start, end;
  };
  struct PlannedRelation {
    RelationKind kind;
    int symptom, modifier;  // indices into planned concepts; modifier -1 if none
    std::optional<double> value;
    bool negated = false;
  };

  std::size_t word(const std::string& w) {
    if (!text_.empty()) text_ += ' ';
    std::size_t start = text_.size();
    text_ += w;
    return start;
  }

  Span phrase(const std::string& p) {
    std::istringstream in(p);
    std::string w;
    Span span{text_.size() + (text_.empty() ? 0 : 1), 0};
    while (in >> w) span.end = word(w) + w.size();
    return span;
  }

  int mark(ConceptLabel label, const Span& span) {
    concepts_.push_back({label, span.begin, span.end});
    return static_cast<int>(concepts_.size()) - 1;
  }

  int mark_phrase(ConceptLabel label, const std::string& p) {
    return mark(label, phrase(p));
  }

  void relation(RelationKind kind, int symptom, int modifier, std::optional<double> value,
                bool negated = false) {
    relations_.push_back({kind, symptom, modifier, value, negated});
  }

  void end_sentence() { word("."); }

  AnnotatedPost finish(std::string id) const {
    AnnotatedPost ap;
    ap.post.id = std::move(id);
    ap.post.text = text_;
    ap.post.sentences = split_and_tokenize(text_);
    std::vector<ConceptSpan> spans;
    spans.reserve(concepts_.size());
    for (const PlannedConcept& pc : concepts_) {
      spans.push_back(resolve_concept(ap.post, pc.label, pc.start, pc.end));
    }
    for (const PlannedRelation& pr : relations_) {
      Relation r;
      r.kind = pr.kind;
      r.symptom = spans[pr.symptom];
      if (pr.modifier >= 0) r.modifier = spans[pr.modifier];
      r.value = pr.value;
      r.negated = pr.negated;
      ap.gold_relations.push_back(std::move(r));
    }
    ap.gold_concepts = std::move(spans);
    return ap;
  }

 private:
  std::string text_;
  std::vector<PlannedConcept> concepts_;
  std::vector<PlannedRelation> relations_;
};

/// One planted symptom mention, rendered to a full sentence by the builder.
struct Mention {
  enum class Shape {
    Full,
    SeverityOnly,
    Postpositive,
    Far,
    DurationOnly,
    Plain,
    Negated,
    NegatedSeverity,
    Ambient  // shares its sentence frame with pseudo-word distractor lines
  };
  Shape shape = Shape::Plain;
  std::string symptom;
  std::string severity;
  bool intensified = false;
  std::string intensifier;
  std::string duration_text;
  double duration_weeks = 0.0;
  std::string body_part;
};

std::string pick(const std::vector<std::string>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng.uniform(v.size()))];
}

/// A pronounceable nonsense word, practically never seen twice: the tagger
/// cannot memorize it and has to fall back to context and shape.
std::string pseudo_word(Rng& rng) {
  static const std::string consonants = "zvwkqxjfg";
  static const std::string vowels = "aeiou";
  std::size_t len = 6 + rng.uniform(4);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) {
    const std::string& bank = i % 2 == 0 ? consonants : vowels;
    w += bank[static_cast<std::size_t>(rng.uniform(bank.size()))];
  }
  return w;
}

/// Misspells the last word of a phrase (one substituted letter), producing a
/// symptom surface the training fold has never seen.
std::string typo_phrase(Rng& rng, const std::string& phrase) {
  std::string out = phrase;
  std::size_t start = out.rfind(' ');
  start = start == std::string::npos ? 0 : start + 1;
  if (out.size() - start < 3) return out;
  std::size_t pos = start + 1 + rng.uniform(out.size() - start - 2);
  char replacement = static_cast<char>('a' + rng.uniform(26));
  if (replacement == out[pos]) replacement = replacement == 'z' ? 'a' : replacement + 1;
  out[pos] = replacement;
  return out;
}

Mention::Shape pick_modifier_shape(Rng& rng) {
  double r = rng.uniform_real();
  if (r < 0.45) return Mention::Shape::Full;
  if (r < 0.70) return Mention::Shape::SeverityOnly;
  if (r < 0.85) return Mention::Shape::Postpositive;
  return Mention::Shape::Far;
}

void make_duration(Rng& rng, Mention& m) {
  int unit = static_cast<int>(rng.uniform(3));
  int count = 1 + static_cast<int>(rng.uniform(unit == 0 ? 12 : 6));
  bool as_word = count <= 10 && rng.bernoulli(0.3);
  std::string unit_word = count == 1 ? kDurationUnitsSingular[unit] : kDurationUnitsPlural[unit];
  if (as_word) {
    if (count == 1) {
      m.duration_text = "a " + unit_word;
    } else if (count == 2 && rng.bernoulli(0.4)) {
      m.duration_text = "couple of " + unit_word;
    } else {
      m.duration_text = kNumberWords[static_cast<std::size_t>(count)] + " " + unit_word;
    }
  } else {
    m.duration_text = std::to_string(count) + " " + unit_word;
  }
  if (!try_normalize_duration(m.duration_text, m.duration_weeks)) {
    throw Error("generator produced unparseable duration '" + m.duration_text + "'");
  }
}

void fill_modifiers(Rng& rng, int severity_class, Mention& m) {
  m.severity = pick(kSeverityByClass[static_cast<std::size_t>(severity_class)], rng);
  m.intensified = rng.bernoulli(0.3);
  if (m.intensified) m.intensifier = pick(kIntensifiers, rng);
  if (m.shape == Mention::Shape::Full || m.shape == Mention::Shape::Far) {
    make_duration(rng, m);
    m.body_part = pick(kBodyParts, rng);
  }
}

/// Renders one mention as a sentence, recording concepts and the relations
/// the extraction rule is defined to find.
void render(PostBuilder& b, const Mention& m, Rng& rng, double noise_rate) {
  auto maybe_noise_words = [&](int max_words) {
    if (noise_rate <= 0.0 || !rng.bernoulli(noise_rate)) return;
    int n = 1 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(max_words)));
    for (int i = 0; i < n; ++i) b.word(pick(kDistractorWords, rng));
  };
  int sym = -1, sev = -1, dur = -1, bpoc = -1, neg = -1;
  // Only the Full and SeverityOnly shapes place the intensifier token.
  const bool intensifier_rendered =
      m.intensified &&
      (m.shape == Mention::Shape::Full || m.shape == Mention::Shape::SeverityOnly);
  double sev_value = m.severity.empty() ? 0.0 : severity_value(m.severity);
  if (intensifier_rendered) sev_value = std::min(5.0, sev_value + 1.0);

  switch (m.shape) {
    case Mention::Shape::Full:
      b.word("I");
      b.word("have");
      b.word("had");
      b.word("a");
      if (intensifier_rendered) b.mark_phrase(ConceptLabel::INTENSIFIER, m.intensifier);
      sev = b.mark_phrase(ConceptLabel::SEVERITY, m.severity);
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("for");
      dur = b.mark_phrase(ConceptLabel::DURATION, m.duration_text);
      b.word("in");
      b.word("my");
      bpoc = b.mark_phrase(ConceptLabel::BPOC, m.body_part);
      break;
    case Mention::Shape::SeverityOnly:
      b.word("I");
      b.word("have");
      b.word("a");
      if (intensifier_rendered) b.mark_phrase(ConceptLabel::INTENSIFIER, m.intensifier);
      sev = b.mark_phrase(ConceptLabel::SEVERITY, m.severity);
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      break;
    case Mention::Shape::Postpositive:
      b.word("My");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("has");
      b.word("been");
      b.word("quite");
      sev = b.mark_phrase(ConceptLabel::SEVERITY, m.severity);
      b.word("lately");
      break;
    case Mention::Shape::Far:
      b.word("The");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("turned");
      sev = b.mark_phrase(ConceptLabel::SEVERITY, m.severity);
      b.word("and");
      b.word("honestly");
      b.word("it");
      b.word("lasted");
      dur = b.mark_phrase(ConceptLabel::DURATION, m.duration_text);
      b.word("overall");
      break;
    case Mention::Shape::DurationOnly:
      b.word("I");
      b.word("have");
      b.word("had");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("for");
      dur = b.mark_phrase(ConceptLabel::DURATION, m.duration_text);
      b.word("now");
      break;
    case Mention::Shape::Plain:
      b.word("I");
      if (rng.bernoulli(0.5)) b.word("also");
      b.word("have");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      break;
    case Mention::Shape::Negated:
      b.word("There");
      b.word("is");
      neg = b.mark_phrase(ConceptLabel::NEGATION, "no");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      break;
    case Mention::Shape::NegatedSeverity:
      b.word("It");
      b.word("is");
      neg = b.mark_phrase(ConceptLabel::NEGATION, "not");
      sev = b.mark_phrase(ConceptLabel::SEVERITY, m.severity);
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("anymore");
      break;
    case Mention::Shape::Ambient:
      // same frame as the pseudo-word distractor line: only the slot word
      // tells a symptom apart from nonsense
      b.word("Lately");
      sym = b.mark_phrase(ConceptLabel::SYM, m.symptom);
      b.word("keeps");
      b.word("coming");
      b.word("back");
      break;
  }
  maybe_noise_words(3);
  b.end_sentence();

  // Relations exactly as the closest-modifier rule resolves this sentence.
  bool typed = false;
  if (sev >= 0) {
    bool negated_severity = m.shape == Mention::Shape::NegatedSeverity;
    b.relation(RelationKind::SYM_SEVERITY, sym, sev, sev_value, negated_severity);
    typed = true;
  }
  if (dur >= 0) {
    b.relation(RelationKind::SYM_DURATION, sym, dur, m.duration_weeks);
    typed = true;
  }
  if (bpoc >= 0) {
    b.relation(RelationKind::SYM_BPOC, sym, bpoc, std::nullopt);
    typed = true;
  }
  if (neg >= 0 && m.shape == Mention::Shape::Negated) {
    b.relation(RelationKind::SYM_NEGATION, sym, neg, std::nullopt);
    typed = true;
  }
  if (!typed) {
    b.relation(RelationKind::SYM_UNRESOLVED, sym, -1, std::nullopt);
  }
}

int perturb(Rng& rng, int value, int lo, int hi, double rate, double down_bias) {
  if (!rng.bernoulli(rate)) return value;
  int delta = rng.bernoulli(down_bias) ? -1 : 1;
  return std::clamp(value + delta, lo, hi);
}

std::vector<int> quota_labels(const double* fractions, int k, int n, Rng& rng) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < k; ++c) {
    int count = static_cast<int>(std::lround(fractions[c] * n));
    for (int i = 0; i < count && static_cast<int>(labels.size()) < n; ++i) {
      labels.push_back(c + 1);
    }
  }
  // rounding slack: pad with the most frequent class
  int top = static_cast<int>(std::max_element(fractions, fractions + k) - fractions) + 1;
  while (static_cast<int>(labels.size()) < n) labels.push_back(top);
  rng.shuffle(labels);
  return labels;
}

}  // namespace

const std::vector<std::pair<std::string, double>>& generator_severity_scale() {
  static const std::vector<std::pair<std::string, double>> scale = {
      {"slight", 1}, {"mild", 2}, {"moderate", 3}, {"noticeable", 3},
      {"severe", 4}, {"terrible", 5}};
  return scale;
}

std::vector<AnnotatedPost> generate_corpus(const GeneratorConfig& config) {
  if (config.num_posts < 1) throw Error("num_posts must be >= 1");
  auto check_fractions = [](const double* f, int k, const char* what) {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      if (f[i] < 0.0 || f[i] > 1.0) throw Error(std::string(what) + " fractions must lie in [0,1]");
      sum += f[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(std::string(what) + " fractions must sum to 1");
  };
  check_fractions(config.triage_fractions.data(), 3, "triage");
  check_fractions(config.rating_fractions.data(), 5, "rating");

  // Symptom pool: 8 fixed signal phrases, then fillers, then adjective-noun
  // combinations for very large pools.
  std::vector<std::string> pool;
  for (const auto& s : kTypicalSymptoms) pool.push_back(s);
  for (const auto& s : kGpMarkers) pool.push_back(s);
  for (const auto& s : kHospitalMarkers) pool.push_back(s);
  for (const auto& s : kFillerSymptoms) {
    if (static_cast<int>(pool.size()) >= config.symptom_pool_size) break;
    pool.push_back(s);
  }
  for (const auto& adj : kExpansionAdjectives) {
    for (const auto& noun : kFillerSymptoms) {
      if (static_cast<int>(pool.size()) >= config.symptom_pool_size) break;
      if (noun.find(' ') != std::string::npos) continue;
      pool.push_back(adj + " " + noun);
    }
  }
  if (static_cast<int>(pool.size()) < config.symptom_pool_size) {
    throw Error("symptom pool size " + std::to_string(config.symptom_pool_size) +
                " exceeds the generator inventory of " + std::to_string(pool.size()));
  }
  if (config.symptom_pool_size < 9) {
    throw Error("symptom pool must keep at least one filler beyond the 8 signal phrases");
  }
  const std::size_t n_fillers = pool.size() - 8;

  Rng corpus_rng(config.seed);
  std::vector<int> triage = quota_labels(config.triage_fractions.data(), 3, config.num_posts,
                                         corpus_rng);
  std::vector<int> rating = quota_labels(config.rating_fractions.data(), 5, config.num_posts,
                                         corpus_rng);
  int max_triage = 3;
  while (max_triage > 1 && config.triage_fractions[max_triage - 1] == 0.0) --max_triage;

  std::vector<AnnotatedPost> posts;
  posts.reserve(static_cast<std::size_t>(config.num_posts));
  std::size_t filler_cursor = 0;  // round-robin so every pool entry appears

  for (int p = 0; p < config.num_posts; ++p) {
    Rng rng(config.seed ^ (0x100000001B3ULL * static_cast<std::uint64_t>(p + 1)));
    int t = triage[static_cast<std::size_t>(p)];
    int r = rating[static_cast<std::size_t>(p)];

    std::vector<Mention> mentions;
    // COVID-typical mentions scale with the rating; severities scale with
    // the triage class.
    int typical_count = r - 1;
    for (int i = 0; i < typical_count; ++i) {
      Mention m;
      m.shape = pick_modifier_shape(rng);
      m.symptom = kTypicalSymptoms[static_cast<std::size_t>(i)];
      fill_modifiers(rng, t - 1, m);
      mentions.push_back(std::move(m));
    }
    // Low ratings explicitly deny the remaining typical symptoms.
    int denials = r == 1 ? 2 : (r == 2 ? 1 : 0);
    for (int i = 0; i < denials; ++i) {
      Mention m;
      m.shape = Mention::Shape::Negated;
      m.symptom = kTypicalSymptoms[static_cast<std::size_t>(typical_count + i)];
      mentions.push_back(std::move(m));
    }
    // Triage markers.
    if (t == 2) {
      Mention m;
      m.shape = Mention::Shape::SeverityOnly;
      m.symptom = pick(kGpMarkers, rng);
      fill_modifiers(rng, t - 1, m);
      mentions.push_back(std::move(m));
    } else if (t == 3) {
      for (const std::string& s : kHospitalMarkers) {
        Mention m;
        m.shape = rng.bernoulli(0.5) ? Mention::Shape::Full : Mention::Shape::SeverityOnly;
        m.symptom = s;
        fill_modifiers(rng, t - 1, m);
        mentions.push_back(std::move(m));
      }
    }
    // Fillers: enough round-robin picks that the whole pool is visited over
    // the corpus, plus an optional random extra.
    int round_robin = std::max(
        1, static_cast<int>((n_fillers + static_cast<std::size_t>(config.num_posts) - 1) /
                            static_cast<std::size_t>(config.num_posts)));
    int extra = rng.bernoulli(0.5) ? 1 : 0;
    for (int i = 0; i < round_robin + extra; ++i) {
      Mention m;
      std::string symptom;
      if (i < round_robin) {
        symptom = pool[8 + (filler_cursor++ % n_fillers)];
      } else {
        symptom = pool[8 + rng.uniform(n_fillers)];
      }
      double shape_draw = rng.uniform_real();
      if (config.noise_rate > 0.0 && rng.bernoulli(config.noise_rate)) {
        m.shape = Mention::Shape::Ambient;
        // misspellings land where only word identity disambiguates
        if (rng.bernoulli(0.6)) symptom = typo_phrase(rng, symptom);
      } else if (shape_draw < 0.45) {
        m.shape = Mention::Shape::Plain;
      } else if (shape_draw < 0.65) {
        m.shape = Mention::Shape::DurationOnly;
        make_duration(rng, m);
      } else if (shape_draw < 0.85) {
        m.shape = Mention::Shape::Negated;
      } else {
        m.shape = Mention::Shape::NegatedSeverity;
        m.severity = pick(kSeverityByClass[static_cast<std::size_t>(t - 1)], rng);
      }
      m.symptom = std::move(symptom);
      mentions.push_back(std::move(m));
    }
    rng.shuffle(mentions);

    PostBuilder b;
    for (const Mention& m : mentions) render(b, m, rng, config.noise_rate);
    if (config.noise_rate > 0.0 && rng.bernoulli(config.noise_rate)) {
      for (const std::string& w :
           kDistractorSentences[static_cast<std::size_t>(rng.uniform(kDistractorSentences.size()))]) {
        b.word(w);
      }
      b.end_sentence();
    }
    // A nonsense word in the same frame as the Ambient symptom template:
    // held-out posts then contain genuinely ambiguous slots.
    if (config.noise_rate > 0.0 && rng.bernoulli(config.noise_rate)) {
      b.word("Lately");
      b.word(pseudo_word(rng));
      b.word("keeps");
      b.word("coming");
      b.word("back");
      b.end_sentence();
    }

    std::ostringstream id;
    id << "post-" << p;
    AnnotatedPost ap = b.finish(id.str());

    DoctorAnswers base{t, r, true};
    auto answers_for = [&](double rate_t, double rate_r, double down_bias) {
      DoctorAnswers a;
      a.triage = perturb(rng, base.triage, 1, max_triage, rate_t, down_bias);
      a.rating = perturb(rng, base.rating, 1, 5, rate_r, down_bias);
      a.sufficient = rng.bernoulli(0.85);
      return a;
    };
    ap.answers[DoctorId::A] = base;
    ap.answers[DoctorId::B] = answers_for(0.30, 0.35, 0.35);
    ap.answers[DoctorId::C] = answers_for(0.30, 0.35, 0.70);

    validate(ap);
    posts.push_back(std::move(ap));
  }
  return posts;
}

}  // namespace covtriage
