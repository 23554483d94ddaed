#include "covtriage/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "covtriage/preprocess.hpp"

#include <json.hpp>

namespace covtriage {

using json = nlohmann::ordered_json;

namespace {

const std::array<std::string, 7> kConceptNames = {"SYM",      "SEVERITY",    "BPOC",    "DURATION",
                                                  "INTENSIFIER", "NEGATION", "OTHER"};

const std::array<std::string, 5> kRelationNames = {"SYM_SEVERITY", "SYM_DURATION", "SYM_BPOC",
                                                   "SYM_NEGATION", "SYM_UNRESOLVED"};

const std::array<std::string, 3> kDoctorNames = {"A", "B", "C"};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

const std::string& to_string(ConceptLabel label) {
  return kConceptNames[static_cast<int>(label)];
}

ConceptLabel concept_label_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kConceptNames.size(); ++i) {
    if (kConceptNames[i] == s) return static_cast<ConceptLabel>(i);
  }
  throw ParseError("unknown concept label '" + s + "'");
}

const std::string& to_string(RelationKind kind) {
  return kRelationNames[static_cast<int>(kind)];
}

RelationKind relation_kind_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == s) return static_cast<RelationKind>(i);
  }
  throw ParseError("unknown relation kind '" + s + "'");
}

ConceptLabel modifier_label(RelationKind kind) {
  switch (kind) {
    case RelationKind::SYM_SEVERITY: return ConceptLabel::SEVERITY;
    case RelationKind::SYM_DURATION: return ConceptLabel::DURATION;
    case RelationKind::SYM_BPOC: return ConceptLabel::BPOC;
    case RelationKind::SYM_NEGATION: return ConceptLabel::NEGATION;
    case RelationKind::SYM_UNRESOLVED: break;
  }
  throw Error("SYM_UNRESOLVED has no modifier label");
}

const std::string& to_string(DoctorId id) { return kDoctorNames[static_cast<int>(id)]; }

bool operator==(const Token& a, const Token& b) {
  return a.char_range == b.char_range && a.surface == b.surface;
}

bool operator==(const Sentence& a, const Sentence& b) {
  return a.char_range == b.char_range && a.tokens == b.tokens;
}

bool operator==(const Post& a, const Post& b) {
  return a.id == b.id && a.text == b.text && a.sentences == b.sentences;
}

bool operator==(const AnnotatedPost& a, const AnnotatedPost& b) {
  return a.post == b.post && a.gold_concepts == b.gold_concepts &&
         a.gold_relations == b.gold_relations && a.answers == b.answers &&
         a.predicted_concepts == b.predicted_concepts &&
         a.predicted_relations == b.predicted_relations;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void validate_post(const Post& post) {
  if (post.id.empty()) throw ValidationError("post id must be nonempty");
  std::size_t prev_end = 0;
  bool first = true;
  for (const Sentence& s : post.sentences) {
    if (s.char_range.empty()) throw ValidationError("sentence range must be nonempty");
    if (!first && s.char_range.begin < prev_end) {
      throw ValidationError("sentence ranges must be disjoint and ascending");
    }
    if (s.char_range.end > post.text.size()) {
      throw ValidationError("sentence range exceeds text bounds");
    }
    std::size_t tok_prev = s.char_range.begin;
    bool tok_first = true;
    for (const Token& t : s.tokens) {
      if (t.surface.empty()) throw ValidationError("token surface must be nonempty");
      if (!s.char_range.contains(t.char_range)) {
        throw ValidationError("token range must lie within its sentence");
      }
      if (!tok_first && t.char_range.begin < tok_prev) {
        throw ValidationError("token ranges must be disjoint and ascending");
      }
      if (post.text.compare(t.char_range.begin, t.char_range.size(), t.surface) != 0) {
        throw ValidationError("token surface must equal the text slice of its range");
      }
      tok_prev = t.char_range.end;
      tok_first = false;
    }
    prev_end = s.char_range.end;
    first = false;
  }
}

void validate_concepts(const AnnotatedPost& ap, const std::vector<ConceptSpan>& concepts) {
  const Post& post = ap.post;
  for (const ConceptSpan& c : concepts) {
    if (c.label == ConceptLabel::OTHER) {
      throw ValidationError("concept span label must not be OTHER");
    }
    if (c.token_range.empty()) throw ValidationError("concept token range must be nonempty");
    if (c.sentence_index >= post.sentences.size()) {
      throw ValidationError("concept sentence index out of range");
    }
    const Sentence& s = post.sentences[c.sentence_index];
    if (c.token_range.end > s.tokens.size()) {
      throw ValidationError("concept token range exceeds sentence length");
    }
    Span expect{s.tokens[c.token_range.begin].char_range.begin,
                s.tokens[c.token_range.end - 1].char_range.end};
    if (expect != c.char_range) {
      throw ValidationError("concept char range must align with token boundaries");
    }
    if (post.text.compare(c.char_range.begin, c.char_range.size(), c.text) != 0) {
      throw ValidationError("concept text must equal the text slice of its range");
    }
  }
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    for (std::size_t j = i + 1; j < concepts.size(); ++j) {
      if (concepts[i].label == concepts[j].label &&
          concepts[i].char_range.overlaps(concepts[j].char_range)) {
        throw ValidationError("same-label concept spans must not overlap");
      }
    }
  }
}

void validate_relations(const std::vector<ConceptSpan>& concepts,
                        const std::vector<Relation>& relations) {
  auto known = [&](const ConceptSpan& span) {
    return std::find(concepts.begin(), concepts.end(), span) != concepts.end();
  };
  for (const Relation& r : relations) {
    if (r.symptom.label != ConceptLabel::SYM) {
      throw ValidationError("relation symptom must carry label SYM");
    }
    if (!known(r.symptom)) throw ValidationError("relation symptom must be a known concept span");
    if (r.kind == RelationKind::SYM_UNRESOLVED) {
      if (r.modifier || r.value) {
        throw ValidationError("SYM_UNRESOLVED must carry no modifier or value");
      }
      continue;
    }
    if (!r.modifier) throw ValidationError("typed relation must carry a modifier");
    if (r.modifier->label != modifier_label(r.kind)) {
      throw ValidationError("relation modifier label must match the relation kind");
    }
    if (!known(*r.modifier)) {
      throw ValidationError("relation modifier must be a known concept span");
    }
    if (r.modifier->sentence_index != r.symptom.sentence_index) {
      throw ValidationError("relation symptom and modifier must lie in the same sentence");
    }
    switch (r.kind) {
      case RelationKind::SYM_SEVERITY:
        if (!r.value || *r.value < 1.0 || *r.value > 5.0) {
          throw ValidationError("severity relation value must lie in [1,5]");
        }
        break;
      case RelationKind::SYM_DURATION:
        if (!r.value || *r.value <= 0.0) {
          throw ValidationError("duration relation value must be positive");
        }
        break;
      default:
        if (r.value) throw ValidationError("only severity/duration relations carry a value");
        break;
    }
  }
}

void validate_answers(const std::map<DoctorId, DoctorAnswers>& answers) {
  if (answers.empty()) return;  // unlabeled post
  for (DoctorId d : {DoctorId::A, DoctorId::B, DoctorId::C}) {
    auto it = answers.find(d);
    if (it == answers.end()) {
      throw ValidationError("labeled post must carry answers for all three doctors");
    }
    if (it->second.triage < 1 || it->second.triage > 3) {
      throw ValidationError("triage answer must lie in {1,2,3}");
    }
    if (it->second.rating < 1 || it->second.rating > 5) {
      throw ValidationError("rating answer must lie in {1,...,5}");
    }
  }
}

}  // namespace

void validate(const AnnotatedPost& ap) {
  validate_post(ap.post);
  validate_concepts(ap, ap.gold_concepts);
  validate_relations(ap.gold_concepts, ap.gold_relations);
  if (ap.predicted_concepts) {
    validate_concepts(ap, *ap.predicted_concepts);
    if (ap.predicted_relations) {
      validate_relations(*ap.predicted_concepts, *ap.predicted_relations);
    }
  } else if (ap.predicted_relations) {
    throw ValidationError("predicted relations require predicted concepts");
  }
  validate_answers(ap.answers);
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace {

json concept_to_json(const ConceptSpan& c) {
  return json{{"label", to_string(c.label)},
              {"start_char", c.char_range.begin},
              {"end_char", c.char_range.end}};
}

json relation_to_json(const Relation& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["sym_start"] = r.symptom.char_range.begin;
  j["sym_end"] = r.symptom.char_range.end;
  if (r.modifier) {
    j["mod_start"] = r.modifier->char_range.begin;
    j["mod_end"] = r.modifier->char_range.end;
  }
  if (r.value) j["value"] = *r.value;
  if (r.negated) j["negated"] = true;
  return j;
}

json concepts_to_json(const std::vector<ConceptSpan>& concepts) {
  json arr = json::array();
  for (const ConceptSpan& c : concepts) arr.push_back(concept_to_json(c));
  return arr;
}

json relations_to_json(const std::vector<Relation>& relations) {
  json arr = json::array();
  for (const Relation& r : relations) arr.push_back(relation_to_json(r));
  return arr;
}

}  // namespace

ConceptSpan resolve_concept(const Post& post, ConceptLabel label, std::size_t start,
                            std::size_t end) {
  if (start >= end || end > post.text.size()) {
    throw ValidationError("concept char range out of bounds");
  }
  for (std::size_t si = 0; si < post.sentences.size(); ++si) {
    const Sentence& s = post.sentences[si];
    if (!(s.char_range.begin <= start && end <= s.char_range.end)) continue;
    std::size_t first = s.tokens.size(), last = s.tokens.size();
    for (std::size_t ti = 0; ti < s.tokens.size(); ++ti) {
      if (s.tokens[ti].char_range.begin == start) first = ti;
      if (s.tokens[ti].char_range.end == end) last = ti;
    }
    if (first == s.tokens.size() || last == s.tokens.size() || last < first) {
      throw ValidationError("concept char range must align with token boundaries");
    }
    ConceptSpan c;
    c.label = label;
    c.sentence_index = si;
    c.token_range = {first, last + 1};
    c.char_range = {start, end};
    c.text = post.text.substr(start, end - start);
    return c;
  }
  throw ValidationError("concept span must lie within a single sentence");
}

namespace {

ConceptSpan resolve_span(const Post& post, ConceptLabel label, std::size_t start, std::size_t end,
                         std::size_t line_no) {
  try {
    return resolve_concept(post, label, start, end);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
  }
}

const ConceptSpan* find_span(const std::vector<ConceptSpan>& concepts, ConceptLabel label,
                             std::size_t start, std::size_t end) {
  for (const ConceptSpan& c : concepts) {
    if (c.label == label && c.char_range.begin == start && c.char_range.end == end) return &c;
  }
  return nullptr;
}

std::vector<ConceptSpan> concepts_from_json(const Post& post, const json& arr,
                                            std::size_t line_no) {
  std::vector<ConceptSpan> out;
  for (const json& jc : arr) {
    if (!jc.contains("label") || !jc.contains("start_char") || !jc.contains("end_char")) {
      throw ParseError("concept record requires label/start_char/end_char", line_no);
    }
    out.push_back(resolve_span(post, concept_label_from_string(jc["label"].get<std::string>()),
                               jc["start_char"].get<std::size_t>(),
                               jc["end_char"].get<std::size_t>(), line_no));
  }
  return out;
}

std::vector<Relation> relations_from_json(const std::vector<ConceptSpan>& concepts,
                                          const json& arr, std::size_t line_no) {
  std::vector<Relation> out;
  for (const json& jr : arr) {
    if (!jr.contains("kind") || !jr.contains("sym_start") || !jr.contains("sym_end")) {
      throw ParseError("relation record requires kind/sym_start/sym_end", line_no);
    }
    Relation r;
    r.kind = relation_kind_from_string(jr["kind"].get<std::string>());
    const ConceptSpan* sym = find_span(concepts, ConceptLabel::SYM,
                                       jr["sym_start"].get<std::size_t>(),
                                       jr["sym_end"].get<std::size_t>());
    if (!sym) throw ParseError("relation symptom does not match any SYM concept", line_no);
    r.symptom = *sym;
    if (r.kind != RelationKind::SYM_UNRESOLVED) {
      if (!jr.contains("mod_start") || !jr.contains("mod_end")) {
        throw ParseError("typed relation requires mod_start/mod_end", line_no);
      }
      const ConceptSpan* mod = find_span(concepts, modifier_label(r.kind),
                                         jr["mod_start"].get<std::size_t>(),
                                         jr["mod_end"].get<std::size_t>());
      if (!mod) throw ParseError("relation modifier does not match any concept", line_no);
      r.modifier = *mod;
    }
    if (jr.contains("value")) r.value = jr["value"].get<double>();
    if (jr.contains("negated")) r.negated = jr["negated"].get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::string to_json_line(const AnnotatedPost& ap) {
  json j;
  j["id"] = ap.post.id;
  j["text"] = ap.post.text;
  j["concepts"] = concepts_to_json(ap.gold_concepts);
  j["relations"] = relations_to_json(ap.gold_relations);
  if (!ap.answers.empty()) {
    json ans;
    for (const auto& [doctor, a] : ap.answers) {
      ans[to_string(doctor)] =
          json{{"triage", a.triage}, {"rating", a.rating}, {"sufficient", a.sufficient}};
    }
    j["answers"] = ans;
  }
  if (ap.predicted_concepts) {
    j["predicted_concepts"] = concepts_to_json(*ap.predicted_concepts);
    if (ap.predicted_relations) {
      j["predicted_relations"] = relations_to_json(*ap.predicted_relations);
    }
  }
  return j.dump();
}

AnnotatedPost from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON record: ") + e.what(), line_no);
  }
  for (const char* field : {"id", "text", "concepts", "relations"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string("missing required field '") + field + "'", line_no);
    }
  }
  AnnotatedPost ap;
  ap.post.id = j["id"].get<std::string>();
  ap.post.text = j["text"].get<std::string>();
  ap.post.sentences = split_and_tokenize(ap.post.text);
  ap.gold_concepts = concepts_from_json(ap.post, j["concepts"], line_no);
  ap.gold_relations = relations_from_json(ap.gold_concepts, j["relations"], line_no);
  if (j.contains("answers")) {
    for (DoctorId d : {DoctorId::A, DoctorId::B, DoctorId::C}) {
      const std::string& name = to_string(d);
      if (!j["answers"].contains(name)) {
        throw ParseError("answers must cover doctors A, B and C", line_no);
      }
      const json& ja = j["answers"][name];
      DoctorAnswers a;
      if (!ja.contains("triage") || !ja.contains("rating") || !ja.contains("sufficient")) {
        throw ParseError("doctor answers require triage/rating/sufficient", line_no);
      }
      a.triage = ja["triage"].get<int>();
      a.rating = ja["rating"].get<int>();
      a.sufficient = ja["sufficient"].get<bool>();
      ap.answers[d] = a;
    }
  }
  if (j.contains("predicted_relations") && !j.contains("predicted_concepts")) {
    throw ParseError("predicted_relations require predicted_concepts", line_no);
  }
  if (j.contains("predicted_concepts")) {
    ap.predicted_concepts = concepts_from_json(ap.post, j["predicted_concepts"], line_no);
    std::vector<Relation> rels;
    if (j.contains("predicted_relations")) {
      rels = relations_from_json(*ap.predicted_concepts, j["predicted_relations"], line_no);
    }
    ap.predicted_relations = std::move(rels);
  }
  validate(ap);
  return ap;
}

std::vector<AnnotatedPost> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path + "'");
  std::vector<AnnotatedPost> posts;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    AnnotatedPost ap = from_json_line(line, line_no);
    if (!seen_ids.insert(ap.post.id).second) {
      throw ValidationError("post id '" + ap.post.id + "' duplicated (line " +
                            std::to_string(line_no) + ")");
    }
    posts.push_back(std::move(ap));
  }
  return posts;
}

void save_corpus(const std::vector<AnnotatedPost>& posts, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    for (const AnnotatedPost& ap : posts) {
      validate(ap);
      out << to_json_line(ap) << "\n";
    }
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// Lexicons
// ---------------------------------------------------------------------------

Lexicon load_lexicon(const std::string& path, const std::string& category) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file '" + path + "'");
  Lexicon lex;
  lex.category = category;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::string phrase = t;
    std::optional<double> value;
    std::size_t tab = t.find('\t');
    if (tab != std::string::npos) {
      phrase = trim(t.substr(0, tab));
      std::string vs = trim(t.substr(tab + 1));
      try {
        std::size_t used = 0;
        value = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(vs);
      } catch (const std::exception&) {
        throw ParseError("non-numeric lexicon value '" + vs + "'", line_no);
      }
    }
    phrase = to_lower(phrase);
    if (phrase.empty()) throw ParseError("empty lexicon phrase", line_no);
    lex.entries.insert(phrase);
    if (value) {
      if (*value < 1.0 || *value > 5.0 || *value != std::floor(*value)) {
        throw ParseError("severity value must lie in {1,...,5}", line_no);
      }
      lex.values[phrase] = *value;
    }
  }
  return lex;
}

Lexicon make_lexicon(const std::string& category,
                     const std::vector<std::pair<std::string, std::optional<double>>>& items) {
  Lexicon lex;
  lex.category = category;
  for (const auto& [phrase, value] : items) {
    std::string p = to_lower(trim(phrase));
    lex.entries.insert(p);
    if (value) lex.values[p] = *value;
  }
  return lex;
}

LexiconSet load_lexicon_set(const std::string& directory) {
  auto path = [&](const char* name) { return directory + "/" + name; };
  LexiconSet set;
  set.symptom = load_lexicon(path("symptoms.txt"), lexcat::kSymptom);
  set.severity = load_lexicon(path("severity.txt"), lexcat::kSeverity);
  set.duration = load_lexicon(path("durations.txt"), lexcat::kDuration);
  set.intensifier = load_lexicon(path("intensifiers.txt"), lexcat::kIntensifier);
  set.negation = load_lexicon(path("negations.txt"), lexcat::kNegation);
  set.stop_words = load_lexicon(path("stop_words.txt"), lexcat::kStopWord);
  set.sem_sign_or_symptom = load_lexicon(path("sem_sign_or_symptom.txt"), lexcat::kSemSignOrSymptom);
  set.sem_disease_or_syndrome =
      load_lexicon(path("sem_disease_or_syndrome.txt"), lexcat::kSemDiseaseOrSyndrome);
  set.sem_body_part = load_lexicon(path("sem_body_part.txt"), lexcat::kSemBodyPart);
  return set;
}

}  // namespace covtriage
