#ifndef COVTRIAGE_PIPELINE_HPP
#define COVTRIAGE_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covtriage/clinic.hpp"
#include "covtriage/corpus.hpp"
#include "covtriage/crf.hpp"
#include "covtriage/eval.hpp"
#include "covtriage/relext.hpp"
#include "covtriage/svm.hpp"
#include "covtriage/vectorize.hpp"

namespace covtriage {

/// The pipeline runs the regressor with a tighter tube than SvmConfig's
/// 0.5 default: a +-0.5 tube around 0.5 contains every
/// probability target, so the dual optimum degenerates to a constant
/// predictor and NEQ would exclude every prediction.
inline SvmConfig pipeline_svm_defaults() {
  SvmConfig config;
  config.epsilon = 0.1;
  return config;
}

struct PipelineConfig {
  std::string corpus_path;
  std::string lexicon_dir;
  std::string output_dir;
  CrfTrainConfig crf;
  int max_distance = 5;
  bool skip_stop_words = true;
  SvmConfig svm = pipeline_svm_defaults();
  int folds = 3;
  std::uint64_t seed = 7;
  VectorKind vector_kind = VectorKind::SymptomModifier;
  Regime regime = Regime::GroundTruth;
  int feature_window = kDefaultFeatureWindow;
};

RelationConfig make_relation_config(const PipelineConfig& config, const LexiconSet& lexicons);

/// Fills predicted_concepts / predicted_relations on every post using a
/// trained CRF and the relation rule.
void predict_annotations(std::vector<AnnotatedPost>& posts, const CrfModel& model,
                         const LexiconSet& lexicons, const RelationConfig& relation_config,
                         const Lexicon& severity_lexicon, int window = kDefaultFeatureWindow);

/// Token-level concept metrics over the seven labels (six concepts + OTHER).
ConfusionTable token_confusion(const std::vector<AnnotatedPost>& posts, const CrfModel& model,
                               const LexiconSet& lexicons, int window = kDefaultFeatureWindow);

struct RelationScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold = 0;
  long predicted = 0;
  long matched = 0;
};

/// Micro-averaged scoring of typed relation instances (kind + spans +
/// severity-negation flag); SYM_UNRESOLVED links are not scored.
RelationScore score_relations(const std::vector<Relation>& gold,
                              const std::vector<Relation>& predicted);

/// Rule output on gold concepts vs gold relations over a whole corpus.
RelationScore relext_score(const std::vector<AnnotatedPost>& posts,
                           const RelationConfig& relation_config,
                           const Lexicon& severity_lexicon);

// ---------------------------------------------------------------------------
// The report experiment: one train/test split, both vector kinds, both
// training regimes, triage + diagnosis + agreement + feature importance.
// ---------------------------------------------------------------------------

struct StageMetrics {
  double precision = 0.0;  // macro over the stage's two classes
  double recall = 0.0;
  double f1 = 0.0;
};

struct TriageOutcome {
  std::string spec;
  VectorKind kind = VectorKind::SymptomModifier;
  Regime regime = Regime::GroundTruth;
  bool trainable = false;
  bool degenerate = false;  // classifier2 omitted
  StageMetrics stage1;
  std::optional<StageMetrics> stage2;
  double macro_f1 = 0.0;               // end-to-end over the three triage classes
  std::array<Prf, 3> per_class = {};   // end-to-end per-class metrics
  std::array<long, 3> test_support = {0, 0, 0};
};

struct DiagnosisOutcome {
  std::string combo;
  VectorKind kind = VectorKind::SymptomModifier;
  Regime regime = Regime::GroundTruth;
  DecisionFunction fn = DecisionFunction::LE;
  double micro_f1 = 0.0;
  long evaluated = 0;
  long excluded = 0;  // test posts dropped by NEQ
};

struct AgreementRow {
  std::string question;  // "Q1" or "Q2"
  std::string pair;      // "AB", "BC", "AC"
  double po = 0.0;
  double kappa = 0.0;
  double ac1 = 0.0;
};

struct ImportanceRow {
  std::string symptom;
  double weight = 0.0;
  int frequency_rank = 0;
};

struct ExperimentResult {
  std::vector<TriageOutcome> triage;
  std::vector<DiagnosisOutcome> diagnosis;
  std::vector<AgreementRow> agreement;
  std::vector<ImportanceRow> importance;
  double crf_token_macro_f1 = 0.0;  // on the held-out fold
  RelationScore relext_on_gold;     // rule vs gold relations on the test fold
};

/// Runs the full experiment on a labeled corpus. Models always evaluate
/// against ground-truth test vectors and labels; the Predicted regime only
/// changes the training-side annotations (out-of-fold CRF + rule output).
ExperimentResult run_experiment(const std::vector<AnnotatedPost>& posts,
                                const LexiconSet& lexicons, const PipelineConfig& config);

/// Runs the experiment and writes triage.csv, diagnosis.csv, agreement.csv
/// and importance.csv into config.output_dir (atomically).
ExperimentResult write_report(const std::vector<AnnotatedPost>& posts,
                              const LexiconSet& lexicons, const PipelineConfig& config);

std::vector<AgreementRow> agreement_rows(const std::vector<AnnotatedPost>& posts);

/// CRF cross-validated token metrics and the relation distance sweep
/// (the `evaluate` subcommand).
struct ConceptEvalRow {
  std::string label;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  long support = 0;
};
struct RelationSweepRow {
  int distance = 0;
  bool skip_stop_words = false;
  RelationScore score;
};
struct EvaluateResult {
  std::vector<ConceptEvalRow> concept_rows;  // per label + Macro-average
  std::vector<RelationSweepRow> relation_rows;
};
EvaluateResult run_evaluate(const std::vector<AnnotatedPost>& posts, const LexiconSet& lexicons,
                            const PipelineConfig& config);

/// Writes a file atomically (temp + rename).
void atomic_write(const std::string& path, const std::string& content);

const std::string& to_string(VectorKind kind);
const std::string& to_string(Regime regime);

}  // namespace covtriage

#endif
