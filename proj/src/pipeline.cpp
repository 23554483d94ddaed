#include "covtriage/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "covtriage/log.hpp"

namespace covtriage {

namespace {

const std::array<std::string, 2> kVectorKindNames = {"symptom-only", "symptom-modifier"};
const std::array<std::string, 2> kRegimeNames = {"gold", "predicted"};

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

const std::string& to_string(VectorKind kind) {
  return kVectorKindNames[kind == VectorKind::SymptomOnly ? 0 : 1];
}

const std::string& to_string(Regime regime) {
  return kRegimeNames[regime == Regime::GroundTruth ? 0 : 1];
}

RelationConfig make_relation_config(const PipelineConfig& config, const LexiconSet& lexicons) {
  RelationConfig rc;
  rc.max_distance = config.max_distance;
  rc.skip_stop_words = config.skip_stop_words;
  rc.stop_words = lexicons.stop_words;
  return rc;
}

void predict_annotations(std::vector<AnnotatedPost>& posts, const CrfModel& model,
                         const LexiconSet& lexicons, const RelationConfig& relation_config,
                         const Lexicon& severity_lexicon, int window) {
  for (AnnotatedPost& ap : posts) {
    ap.predicted_concepts = predict_concepts(model, ap.post, lexicons, window);
    ap.predicted_relations =
        extract_relations(ap.post, *ap.predicted_concepts, relation_config, severity_lexicon);
  }
}

ConfusionTable token_confusion(const std::vector<AnnotatedPost>& posts, const CrfModel& model,
                               const LexiconSet& lexicons, int window) {
  std::vector<std::string> classes;
  for (int i = 0; i < kNumConceptLabels; ++i) {
    classes.push_back(to_string(static_cast<ConceptLabel>(i)));
  }
  ConfusionTable table(std::move(classes));
  auto label_of_tag = [](int tag) {
    return tag == 0 ? static_cast<int>(ConceptLabel::OTHER) : (tag - 1) / 2;
  };
  for (const AnnotatedPost& ap : posts) {
    std::vector<ConceptSpan> predicted = predict_concepts(model, ap.post, lexicons, window);
    for (std::size_t si = 0; si < ap.post.sentences.size(); ++si) {
      const std::size_t n = ap.post.sentences[si].tokens.size();
      std::vector<ConceptSpan> gold_here, pred_here;
      for (const ConceptSpan& c : ap.gold_concepts) {
        if (c.sentence_index == si) gold_here.push_back(c);
      }
      for (const ConceptSpan& c : predicted) {
        if (c.sentence_index == si) pred_here.push_back(c);
      }
      std::vector<int> gold_tags = encode_bio(gold_here, n);
      std::vector<int> pred_tags = encode_bio(pred_here, n);
      for (std::size_t t = 0; t < n; ++t) {
        table.add_index(static_cast<std::size_t>(label_of_tag(gold_tags[t])),
                        static_cast<std::size_t>(label_of_tag(pred_tags[t])));
      }
    }
  }
  return table;
}

namespace {

/// Identity of a typed relation for scoring purposes.
using RelationKey = std::tuple<RelationKind, std::size_t, std::size_t, std::size_t, std::size_t, bool>;

std::set<RelationKey> typed_keys(const std::vector<Relation>& relations) {
  std::set<RelationKey> keys;
  for (const Relation& r : relations) {
    if (r.kind == RelationKind::SYM_UNRESOLVED) continue;
    keys.insert({r.kind, r.symptom.char_range.begin, r.symptom.char_range.end,
                 r.modifier->char_range.begin, r.modifier->char_range.end, r.negated});
  }
  return keys;
}

}  // namespace

RelationScore score_relations(const std::vector<Relation>& gold,
                              const std::vector<Relation>& predicted) {
  std::set<RelationKey> g = typed_keys(gold);
  std::set<RelationKey> p = typed_keys(predicted);
  RelationScore s;
  s.gold = static_cast<long>(g.size());
  s.predicted = static_cast<long>(p.size());
  for (const RelationKey& k : p) {
    if (g.count(k)) ++s.matched;
  }
  s.precision = s.predicted == 0 ? 0.0 : static_cast<double>(s.matched) / s.predicted;
  s.recall = s.gold == 0 ? 0.0 : static_cast<double>(s.matched) / s.gold;
  s.f1 = (s.precision + s.recall) == 0.0
             ? 0.0
             : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

RelationScore relext_score(const std::vector<AnnotatedPost>& posts,
                           const RelationConfig& relation_config,
                           const Lexicon& severity_lexicon) {
  std::vector<Relation> gold, predicted;
  for (const AnnotatedPost& ap : posts) {
    for (const Relation& r : ap.gold_relations) gold.push_back(r);
    auto rels = extract_relations(ap.post, ap.gold_concepts, relation_config, severity_lexicon);
    for (Relation& r : rels) predicted.push_back(std::move(r));
  }
  return score_relations(gold, predicted);
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

namespace {

StageMetrics stage_metrics(const ConfusionTable& table) {
  StageMetrics m;
  for (std::size_t c = 0; c < table.num_classes(); ++c) {
    Prf p = prf(table, c);
    m.precision += p.precision;
    m.recall += p.recall;
    m.f1 += p.f1;
  }
  m.precision /= static_cast<double>(table.num_classes());
  m.recall /= static_cast<double>(table.num_classes());
  m.f1 /= static_cast<double>(table.num_classes());
  return m;
}

struct SplitVectors {
  std::vector<PostVector> train_gold, train_pred, test_gold;
};

int frequency_of(const std::vector<AnnotatedPost>& posts, const std::string& phrase) {
  int count = 0;
  for (const AnnotatedPost& ap : posts) {
    for (const ConceptSpan& c : ap.gold_concepts) {
      if (c.label == ConceptLabel::SYM && to_lower(c.text) == phrase) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace

std::vector<AgreementRow> agreement_rows(const std::vector<AnnotatedPost>& posts) {
  using Pair = std::pair<DoctorId, DoctorId>;
  const std::vector<Pair> pairs = {{DoctorId::A, DoctorId::B},
                                   {DoctorId::B, DoctorId::C},
                                   {DoctorId::A, DoctorId::C}};
  std::vector<AgreementRow> rows;
  for (int question = 1; question <= 2; ++question) {
    std::vector<std::string> cats;
    if (question == 1) {
      cats = {"1", "2", "3"};
    } else {
      cats = {"1", "2", "3", "4", "5"};
    }
    for (const auto& [d1, d2] : pairs) {
      AgreementTable table(cats);
      for (const AnnotatedPost& ap : posts) {
        if (!ap.labeled()) continue;
        const DoctorAnswers& a1 = ap.answers.at(d1);
        const DoctorAnswers& a2 = ap.answers.at(d2);
        int v1 = question == 1 ? a1.triage : a1.rating;
        int v2 = question == 1 ? a2.triage : a2.rating;
        table.add(std::to_string(v1), std::to_string(v2));
      }
      AgreementRow row;
      row.question = "Q" + std::to_string(question);
      row.pair = to_string(d1) + to_string(d2);
      row.po = observed_agreement(table);
      row.kappa = cohens_kappa(table);
      row.ac1 = gwet_ac1(table);
      rows.push_back(row);
    }
  }
  return rows;
}

ExperimentResult run_experiment(const std::vector<AnnotatedPost>& posts,
                                const LexiconSet& lexicons, const PipelineConfig& config) {
  for (const AnnotatedPost& ap : posts) {
    if (!ap.labeled()) throw Error("the experiment requires a fully labeled corpus");
  }
  const RelationConfig relation_config = make_relation_config(config, lexicons);

  auto folds = kfold(posts.size(), config.folds, config.seed);
  const auto& [train_idx, test_idx] = folds[0];

  std::vector<AnnotatedPost> train, test;
  for (std::size_t i : train_idx) train.push_back(posts[i]);
  for (std::size_t i : test_idx) test.push_back(posts[i]);

  // CRF trained on the training fold scores the held-out fold; training-side
  // predictions come from two half-models so no post is tagged by a model
  // that saw it.
  CrfModel crf = train_crf(build_crf_training_data(train, lexicons, config.feature_window),
                           config.crf);
  ExperimentResult result;
  {
    ConfusionTable tokens = token_confusion(test, crf, lexicons, config.feature_window);
    result.crf_token_macro_f1 = macro_f1(tokens);
    result.relext_on_gold = relext_score(test, relation_config, lexicons.severity);
  }
  {
    auto halves = kfold(train.size(), 2, config.seed + 1);
    for (int h = 0; h < 2; ++h) {
      const auto& [fit_idx, apply_idx] = halves[static_cast<std::size_t>(h)];
      std::vector<AnnotatedPost> fit;
      for (std::size_t i : fit_idx) fit.push_back(train[i]);
      CrfModel half = train_crf(build_crf_training_data(fit, lexicons, config.feature_window),
                                config.crf);
      for (std::size_t i : apply_idx) {
        train[i].predicted_concepts =
            predict_concepts(half, train[i].post, lexicons, config.feature_window);
        train[i].predicted_relations = extract_relations(
            train[i].post, *train[i].predicted_concepts, relation_config, lexicons.severity);
      }
    }
  }

  Vocabularies vocabs = build_vocabularies(train);
  log_info("experiment: " + std::to_string(train.size()) + " train / " +
           std::to_string(test.size()) + " test posts, |symptoms|=" +
           std::to_string(vocabs.symptoms.size()) + ", |body parts|=" +
           std::to_string(vocabs.body_parts.size()));

  for (VectorKind kind : {VectorKind::SymptomModifier, VectorKind::SymptomOnly}) {
    SplitVectors vectors;
    for (const AnnotatedPost& ap : train) {
      vectors.train_gold.push_back(make_vector(ap, vocabs, kind, Regime::GroundTruth));
      vectors.train_pred.push_back(make_vector(ap, vocabs, kind, Regime::Predicted));
    }
    for (const AnnotatedPost& ap : test) {
      vectors.test_gold.push_back(make_vector(ap, vocabs, kind, Regime::GroundTruth));
    }

    // ----- triage: eleven specs, two regimes -----
    for (const ModelSpec& spec : all_triage_specs()) {
      std::vector<TriageClass> train_labels, test_labels;
      for (const AnnotatedPost& ap : train) train_labels.push_back(aggregate_triage(ap.answers, spec));
      for (const AnnotatedPost& ap : test) test_labels.push_back(aggregate_triage(ap.answers, spec));

      for (Regime regime : {Regime::GroundTruth, Regime::Predicted}) {
        const std::vector<PostVector>& X =
            regime == Regime::GroundTruth ? vectors.train_gold : vectors.train_pred;
        TriageOutcome outcome;
        outcome.spec = spec.name();
        outcome.kind = kind;
        outcome.regime = regime;
        for (TriageClass c : test_labels) {
          ++outcome.test_support[static_cast<std::size_t>(static_cast<int>(c) - 1)];
        }
        bool has_stay = false, has_send = false;
        for (TriageClass c : train_labels) {
          (c == TriageClass::StayHome ? has_stay : has_send) = true;
        }
        if (!has_stay || !has_send) {
          outcome.trainable = false;
          result.triage.push_back(std::move(outcome));
          continue;
        }
        outcome.trainable = true;
        HierarchicalTriageModel model = train_triage(X, train_labels, config.svm);
        outcome.degenerate = model.degenerate;

        ConfusionTable stage1({"StayHome", "Send"});
        ConfusionTable stage2({"SendToGP", "SendToHospital"});
        ConfusionTable full({"StayHome", "SendToGP", "SendToHospital"});
        bool stage2_seen = false;
        for (std::size_t i = 0; i < test.size(); ++i) {
          TriageClass truth = test_labels[i];
          TriageClass pred = predict_triage(model, vectors.test_gold[i]);
          full.add(to_string(truth), to_string(pred));
          stage1.add(truth == TriageClass::StayHome ? "StayHome" : "Send",
                     predict(model.classifier1, vectors.test_gold[i]) < 0.0 ? "StayHome" : "Send");
          if (model.classifier2 && truth != TriageClass::StayHome) {
            stage2_seen = true;
            stage2.add(to_string(truth),
                       predict(*model.classifier2, vectors.test_gold[i]) >= 0.0
                           ? "SendToHospital"
                           : "SendToGP");
          }
        }
        outcome.stage1 = stage_metrics(stage1);
        if (model.classifier2 && stage2_seen) outcome.stage2 = stage_metrics(stage2);
        outcome.macro_f1 = macro_f1(full);
        for (std::size_t cls = 0; cls < 3; ++cls) outcome.per_class[cls] = prf(full, cls);
        result.triage.push_back(std::move(outcome));
      }
    }

    // ----- diagnosis: seven combos, three decision functions, two regimes -----
    for (const std::vector<DoctorId>& combo : all_diagnosis_combos()) {
      std::vector<double> train_gtp, test_gtp;
      for (const AnnotatedPost& ap : train) train_gtp.push_back(combine_gtp(ap.answers, combo));
      for (const AnnotatedPost& ap : test) test_gtp.push_back(combine_gtp(ap.answers, combo));

      for (Regime regime : {Regime::GroundTruth, Regime::Predicted}) {
        const std::vector<PostVector>& X =
            regime == Regime::GroundTruth ? vectors.train_gold : vectors.train_pred;
        SvrModel model = train_regressor(X, train_gtp, config.svm);
        for (DecisionFunction fn :
             {DecisionFunction::LE, DecisionFunction::LT, DecisionFunction::NEQ}) {
          DiagnosisOutcome outcome;
          outcome.combo = combo_name(combo);
          outcome.kind = kind;
          outcome.regime = regime;
          outcome.fn = fn;
          long correct = 0;
          for (std::size_t i = 0; i < test.size(); ++i) {
            Diagnosis truth = decide(test_gtp[i], fn);
            if (truth == Diagnosis::EXCLUDED) {
              ++outcome.excluded;
              continue;
            }
            Diagnosis pred = diagnose(model, vectors.test_gold[i], fn);
            ++outcome.evaluated;
            if (pred == truth) ++correct;
          }
          // single-label binary task: micro-F1 equals accuracy
          outcome.micro_f1 = outcome.evaluated == 0
                                 ? 0.0
                                 : static_cast<double>(correct) / outcome.evaluated;
          result.diagnosis.push_back(std::move(outcome));
        }
      }
    }
  }

  result.agreement = agreement_rows(posts);

  {
    SvmConfig linear = config.svm;
    linear.kernel_spec.kind = KernelSpec::Kind::Linear;
    std::vector<FeatureImportance> ranked = feature_importance(train, vocabs.symptoms, linear);
    // frequency ranks over the training gold annotations
    std::vector<std::pair<std::string, int>> freq;
    for (std::size_t i = 0; i < vocabs.symptoms.size(); ++i) {
      freq.emplace_back(vocabs.symptoms.phrase(i), frequency_of(train, vocabs.symptoms.phrase(i)));
    }
    std::stable_sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::map<std::string, int> rank_of;
    for (std::size_t i = 0; i < freq.size(); ++i) {
      rank_of[freq[i].first] = static_cast<int>(i) + 1;
    }
    for (const FeatureImportance& fi : ranked) {
      result.importance.push_back({fi.symptom, fi.weight, rank_of[fi.symptom]});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

ExperimentResult write_report(const std::vector<AnnotatedPost>& posts,
                              const LexiconSet& lexicons, const PipelineConfig& config) {
  ExperimentResult result = run_experiment(posts, lexicons, config);
  std::filesystem::create_directories(config.output_dir);
  const std::string header = "# seed=" + std::to_string(config.seed) +
                             " folds=" + std::to_string(config.folds) +
                             " max_distance=" + std::to_string(config.max_distance) +
                             " skip_stop_words=" + (config.skip_stop_words ? "true" : "false") +
                             " C=" + fmt(config.svm.C, 2) +
                             " gamma=" + fmt(config.svm.kernel_spec.gamma, 4) +
                             " epsilon=" + fmt(config.svm.epsilon, 2) + "\n";

  {
    std::ostringstream out;
    out << header;
    out << "# crf_token_macro_f1=" << fmt(result.crf_token_macro_f1) << " relext_f1="
        << fmt(result.relext_on_gold.f1) << "\n";
    out << "model,vector,regime,trainable,degenerate,stage1_p,stage1_r,stage1_f1,"
           "stage2_p,stage2_r,stage2_f1,macro_f1,support_stayhome,support_gp,support_hospital\n";
    for (const TriageOutcome& t : result.triage) {
      out << t.spec << ',' << to_string(t.kind) << ',' << to_string(t.regime) << ','
          << (t.trainable ? "yes" : "no") << ',' << (t.degenerate ? "yes" : "no") << ',';
      if (t.trainable) {
        out << fmt(t.stage1.precision) << ',' << fmt(t.stage1.recall) << ',' << fmt(t.stage1.f1)
            << ',';
      } else {
        out << ",,,";
      }
      if (t.stage2) {
        out << fmt(t.stage2->precision) << ',' << fmt(t.stage2->recall) << ','
            << fmt(t.stage2->f1) << ',';
      } else {
        out << ",,,";  // mirrors the dashes for missing hospital support
      }
      if (t.trainable) {
        out << fmt(t.macro_f1);
      }
      out << ',' << t.test_support[0] << ',' << t.test_support[1] << ',' << t.test_support[2]
          << "\n";
    }
    atomic_write(config.output_dir + "/triage.csv", out.str());
  }
  {
    // per-class detail rows for the end-to-end three-class task
    std::ostringstream out;
    out << header;
    out << "model,vector,regime,class,precision,recall,f1,support\n";
    const std::array<const char*, 3> class_names = {"StayHome", "SendToGP", "SendToHospital"};
    for (const TriageOutcome& t : result.triage) {
      if (!t.trainable) continue;
      for (std::size_t cls = 0; cls < 3; ++cls) {
        out << t.spec << ',' << to_string(t.kind) << ',' << to_string(t.regime) << ','
            << class_names[cls] << ',' << fmt(t.per_class[cls].precision) << ','
            << fmt(t.per_class[cls].recall) << ',' << fmt(t.per_class[cls].f1) << ','
            << t.test_support[cls] << "\n";
      }
    }
    atomic_write(config.output_dir + "/triage_classes.csv", out.str());
  }
  {
    std::ostringstream out;
    out << header;
    out << "model,vector,regime,decision,micro_f1,evaluated,excluded\n";
    for (const DiagnosisOutcome& d : result.diagnosis) {
      out << d.combo << ',' << to_string(d.kind) << ',' << to_string(d.regime) << ','
          << to_string(d.fn) << ',' << fmt(d.micro_f1) << ',' << d.evaluated << ',' << d.excluded
          << "\n";
    }
    atomic_write(config.output_dir + "/diagnosis.csv", out.str());
  }
  {
    std::ostringstream out;
    out << header;
    out << "question,pair,po,kappa,ac1\n";
    for (const AgreementRow& a : result.agreement) {
      out << a.question << ',' << a.pair << ',' << fmt(a.po) << ',' << fmt(a.kappa) << ','
          << fmt(a.ac1) << "\n";
    }
    atomic_write(config.output_dir + "/agreement.csv", out.str());
  }
  {
    std::ostringstream out;
    out << header;
    out << "symptom,weight,frequency_rank\n";
    for (const ImportanceRow& row : result.importance) {
      out << row.symptom << ',' << fmt(row.weight, 6) << ',' << row.frequency_rank << "\n";
    }
    atomic_write(config.output_dir + "/importance.csv", out.str());
  }
  return result;
}

EvaluateResult run_evaluate(const std::vector<AnnotatedPost>& posts, const LexiconSet& lexicons,
                            const PipelineConfig& config) {
  EvaluateResult result;

  // pooled token confusion across the CV folds
  std::vector<std::string> classes;
  for (int i = 0; i < kNumConceptLabels; ++i) {
    classes.push_back(to_string(static_cast<ConceptLabel>(i)));
  }
  ConfusionTable pooled(classes);
  auto folds = kfold(posts.size(), config.folds, config.seed);
  for (const auto& [train_idx, test_idx] : folds) {
    std::vector<AnnotatedPost> train, test;
    for (std::size_t i : train_idx) train.push_back(posts[i]);
    for (std::size_t i : test_idx) test.push_back(posts[i]);
    CrfModel crf = train_crf(build_crf_training_data(train, lexicons, config.feature_window),
                             config.crf);
    ConfusionTable fold_table = token_confusion(test, crf, lexicons, config.feature_window);
    for (std::size_t a = 0; a < fold_table.num_classes(); ++a) {
      for (std::size_t b = 0; b < fold_table.num_classes(); ++b) {
        pooled.add_index(a, b, fold_table.count(a, b));
      }
    }
  }
  for (std::size_t c = 0; c < pooled.num_classes(); ++c) {
    Prf p = prf(pooled, c);
    result.concept_rows.push_back(
        {pooled.classes()[c], p.precision, p.recall, p.f1, pooled.support(c)});
  }
  double mp = 0.0, mr = 0.0, mf = 0.0;
  for (const ConceptEvalRow& row : result.concept_rows) {
    mp += row.precision;
    mr += row.recall;
    mf += row.f1;
  }
  const double k = static_cast<double>(result.concept_rows.size());
  result.concept_rows.push_back({"Macro-average", mp / k, mr / k, mf / k, pooled.total()});

  for (bool skip : {false, true}) {
    for (int d = 2; d <= 7; ++d) {
      PipelineConfig sweep = config;
      sweep.max_distance = d;
      sweep.skip_stop_words = skip;
      RelationConfig rc = make_relation_config(sweep, lexicons);
      result.relation_rows.push_back({d, skip, relext_score(posts, rc, lexicons.severity)});
    }
  }
  return result;
}

}  // namespace covtriage
