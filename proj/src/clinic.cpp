#include "covtriage/clinic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace covtriage {

namespace {

const std::array<std::string, 3> kTriageNames = {"StayHome", "SendToGP", "SendToHospital"};
const std::array<std::string, 3> kDecisionNames = {"LE", "LT", "NEQ"};
const std::array<std::string, 3> kDiagnosisNames = {"COVID", "NO_COVID", "EXCLUDED"};

}  // namespace

const std::string& to_string(TriageClass c) { return kTriageNames[static_cast<int>(c) - 1]; }

TriageClass triage_from_int(int v) {
  if (v < 1 || v > 3) throw Error("triage value must lie in {1,2,3}");
  return static_cast<TriageClass>(v);
}

const std::string& to_string(DecisionFunction fn) { return kDecisionNames[static_cast<int>(fn)]; }

const std::string& to_string(Diagnosis d) { return kDiagnosisNames[static_cast<int>(d)]; }

std::string combo_name(const std::vector<DoctorId>& doctors) {
  std::string s;
  for (DoctorId d : doctors) s += to_string(d);
  return s;
}

std::string ModelSpec::name() const {
  std::string s = combo_name(doctors);
  if (doctors.size() > 1) {
    s += risk == RiskMode::Averse ? "(R-a)" : "(R-t)";
  }
  return s;
}

std::vector<ModelSpec> all_triage_specs() {
  using enum DoctorId;
  std::vector<ModelSpec> specs;
  for (std::vector<DoctorId> combo : {std::vector<DoctorId>{A}, {B}, {C}}) {
    specs.push_back({combo, RiskMode::Averse});  // singletons: risk mode irrelevant
  }
  for (std::vector<DoctorId> combo : {std::vector<DoctorId>{A, B}, {B, C}, {A, C}, {A, B, C}}) {
    specs.push_back({combo, RiskMode::Averse});
    specs.push_back({combo, RiskMode::Tolerant});
  }
  return specs;
}

std::vector<std::vector<DoctorId>> all_diagnosis_combos() {
  using enum DoctorId;
  return {{A}, {B}, {C}, {A, B}, {B, C}, {A, C}, {A, B, C}};
}

TriageClass aggregate_triage(const std::map<DoctorId, DoctorAnswers>& answers,
                             const ModelSpec& spec) {
  if (spec.doctors.empty()) throw Error("model spec must name at least one doctor");
  long sum = 0;
  for (DoctorId d : spec.doctors) {
    auto it = answers.find(d);
    if (it == answers.end()) throw Error("missing answer from doctor " + to_string(d));
    sum += it->second.triage;
  }
  long n = static_cast<long>(spec.doctors.size());
  long value = spec.risk == RiskMode::Averse ? (sum + n - 1) / n  // ceiling
                                             : sum / n;          // floor
  return triage_from_int(static_cast<int>(value));
}

double gtp(int rating) {
  if (rating < 1 || rating > 5) throw Error("rating must lie in {1,...,5}");
  return static_cast<double>(rating - 1) / 4.0;
}

double combine_gtp(const std::map<DoctorId, DoctorAnswers>& answers,
                   const std::vector<DoctorId>& doctors) {
  if (doctors.empty()) throw Error("doctor subset must be nonempty");
  double sum = 0.0;
  for (DoctorId d : doctors) {
    auto it = answers.find(d);
    if (it == answers.end()) throw Error("missing answer from doctor " + to_string(d));
    sum += gtp(it->second.rating);
  }
  return sum / static_cast<double>(doctors.size());
}

Diagnosis decide(double prob, DecisionFunction fn) {
  switch (fn) {
    case DecisionFunction::LE:
      return prob <= 0.5 ? Diagnosis::NO_COVID : Diagnosis::COVID;
    case DecisionFunction::LT:
      return prob < 0.5 ? Diagnosis::NO_COVID : Diagnosis::COVID;
    case DecisionFunction::NEQ:
      if (prob < 0.5) return Diagnosis::NO_COVID;
      if (prob > 0.5) return Diagnosis::COVID;
      return Diagnosis::EXCLUDED;
  }
  throw Error("unreachable decision function");
}

HierarchicalTriageModel train_triage(const std::vector<PostVector>& X,
                                     const std::vector<TriageClass>& labels,
                                     const SvmConfig& config) {
  if (X.size() != labels.size() || X.empty()) throw Error("triage training set misaligned");

  std::vector<int> stage1(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    stage1[i] = labels[i] == TriageClass::StayHome ? -1 : 1;
  }
  HierarchicalTriageModel model;
  model.classifier1 = train_classifier(X, stage1, config);
  model.classifier1.negative_class = to_string(TriageClass::StayHome);
  model.classifier1.positive_class = "Send";

  std::vector<PostVector> X2;
  std::vector<int> y2;
  bool has_gp = false, has_hospital = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == TriageClass::StayHome) continue;
    X2.push_back(X[i]);
    int y = labels[i] == TriageClass::SendToHospital ? 1 : -1;
    (y > 0 ? has_hospital : has_gp) = true;
    y2.push_back(y);
  }
  if (has_gp && has_hospital) {
    model.classifier2 = train_classifier(X2, y2, config);
    model.classifier2->negative_class = to_string(TriageClass::SendToGP);
    model.classifier2->positive_class = to_string(TriageClass::SendToHospital);
  } else {
    model.degenerate = true;  // mirrors test sets with no hospital examples
  }
  return model;
}

TriageClass predict_triage(const HierarchicalTriageModel& model, const PostVector& x) {
  double d1 = predict(model.classifier1, x);
  if (d1 < 0.0) return TriageClass::StayHome;  // exact 0 resolves to Send
  if (!model.classifier2) return TriageClass::SendToGP;
  return predict(*model.classifier2, x) >= 0.0 ? TriageClass::SendToHospital
                                               : TriageClass::SendToGP;
}

Diagnosis diagnose(const SvrModel& model, const PostVector& x, DecisionFunction fn) {
  double prob = std::clamp(predict(model, x), 0.0, 1.0);
  return decide(prob, fn);
}

std::vector<FeatureImportance> feature_importance(const std::vector<AnnotatedPost>& posts,
                                                  const Vocabulary& symptoms,
                                                  const SvmConfig& config) {
  if (config.kernel_spec.kind != KernelSpec::Kind::Linear) {
    throw Error("feature importance requires a linear kernel");
  }
  std::vector<const AnnotatedPost*> labeled;
  for (const AnnotatedPost& ap : posts) {
    if (ap.labeled()) labeled.push_back(&ap);
  }
  if (labeled.empty()) throw Error("feature importance requires labeled posts");

  std::vector<PostVector> X;
  X.reserve(labeled.size());
  for (const AnnotatedPost* ap : labeled) {
    X.push_back(symptom_only_vector(ap->gold_concepts, ap->gold_relations, symptoms));
  }

  std::vector<double> summed(symptoms.size(), 0.0);
  for (const std::vector<DoctorId>& combo : all_diagnosis_combos()) {
    std::vector<double> targets;
    targets.reserve(labeled.size());
    for (const AnnotatedPost* ap : labeled) targets.push_back(combine_gtp(ap->answers, combo));
    SvrModel model = train_regressor(X, targets, config);
    std::vector<double> w = linear_weights(model);
    for (std::size_t i = 0; i < w.size() && i < summed.size(); ++i) summed[i] += std::abs(w[i]);
  }

  double total = 0.0;
  for (double v : summed) total += v;
  std::vector<FeatureImportance> out;
  out.reserve(symptoms.size());
  for (std::size_t i = 0; i < symptoms.size(); ++i) {
    out.push_back({symptoms.phrase(i), total > 0.0 ? summed[i] / total : 0.0});
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a,
                                              const FeatureImportance& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.symptom < b.symptom;  // stable lexicographic order on ties
  });
  return out;
}

}  // namespace covtriage
