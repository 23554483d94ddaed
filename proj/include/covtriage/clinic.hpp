#ifndef COVTRIAGE_CLINIC_HPP
#define COVTRIAGE_CLINIC_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covtriage/corpus.hpp"
#include "covtriage/svm.hpp"
#include "covtriage/vectorize.hpp"

namespace covtriage {

enum class TriageClass { StayHome = 1, SendToGP = 2, SendToHospital = 3 };

const std::string& to_string(TriageClass c);
TriageClass triage_from_int(int v);

enum class RiskMode { Averse, Tolerant };

/// A doctor combination plus risk attitude. Singletons ignore the risk mode.
struct ModelSpec {
  std::vector<DoctorId> doctors;
  RiskMode risk = RiskMode::Averse;

  std::string name() const;  // "A", "AB(R-a)", "ABC(R-t)", ...
};

/// The full enumeration of the eleven triage configurations.
std::vector<ModelSpec> all_triage_specs();

/// The seven doctor combinations used for diagnosis (no risk mode).
std::vector<std::vector<DoctorId>> all_diagnosis_combos();

std::string combo_name(const std::vector<DoctorId>& doctors);

/// Mean of the ordinal answers over the spec's doctors, rounded up
/// (risk-averse) or down (risk-tolerant). Exact integer arithmetic.
TriageClass aggregate_triage(const std::map<DoctorId, DoctorAnswers>& answers,
                             const ModelSpec& spec);

enum class DecisionFunction { LE, LT, NEQ };

const std::string& to_string(DecisionFunction fn);

enum class Diagnosis { COVID, NO_COVID, EXCLUDED };

const std::string& to_string(Diagnosis d);

/// Ground truth probability of COVID for a 1..5 rating: (r - 1) / 4.
double gtp(int rating);

/// Mean of the individual GTPs over a doctor subset.
double combine_gtp(const std::map<DoctorId, DoctorAnswers>& answers,
                   const std::vector<DoctorId>& doctors);

/// Threshold-0.5 decision; NEQ excludes the exact boundary.
Diagnosis decide(double prob, DecisionFunction fn);

/// Two-stage triage: classifier1 separates StayHome from Send; classifier2
/// separates GP from hospital among Send. classifier2 is omitted (and the
/// degenerate flag set) when stage-2 training data lacks a second class.
struct HierarchicalTriageModel {
  SvmModel classifier1;  // negative: StayHome, positive: Send
  std::optional<SvmModel> classifier2;  // negative: SendToGP, positive: SendToHospital
  bool degenerate = false;
};

HierarchicalTriageModel train_triage(const std::vector<PostVector>& X,
                                     const std::vector<TriageClass>& labels,
                                     const SvmConfig& config);

/// Stage-1 ties (decision value exactly 0) resolve to Send; a degenerate
/// model maps every Send to SendToGP.
TriageClass predict_triage(const HierarchicalTriageModel& model, const PostVector& x);

/// SVR prediction clamped to [0,1], then thresholded by the decision
/// function.
Diagnosis diagnose(const SvrModel& model, const PostVector& x, DecisionFunction fn);

struct FeatureImportance {
  std::string symptom;
  double weight = 0.0;  // normalized so all weights sum to 1
};

/// Trains the seven diagnosis SVR models with a linear kernel on
/// symptom-only ground-truth vectors, sums |weight| per symptom slot and
/// returns the descending ranking. Throws when the config requests RBF.
std::vector<FeatureImportance> feature_importance(const std::vector<AnnotatedPost>& posts,
                                                  const Vocabulary& symptoms,
                                                  const SvmConfig& config);

}  // namespace covtriage

#endif
