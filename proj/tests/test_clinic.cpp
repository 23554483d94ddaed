#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "covtriage/clinic.hpp"
#include "covtriage/preprocess.hpp"
#include "covtriage/rng.hpp"
#include "covtriage/synth.hpp"
#include "covtriage/vectorize.hpp"

using namespace covtriage;

namespace {

std::map<DoctorId, DoctorAnswers> answers(int a, int b, int c, int ra = 3, int rb = 3,
                                          int rc = 3) {
  return {{DoctorId::A, {a, ra, true}},
          {DoctorId::B, {b, rb, true}},
          {DoctorId::C, {c, rc, true}}};
}

PostVector vec(std::initializer_list<double> values) {
  PostVector v;
  v.kind = VectorKind::SymptomOnly;
  v.dimension = values.size();
  std::size_t i = 0;
  for (double x : values) {
    if (x != 0.0) v.values.emplace_back(i, x);
    ++i;
  }
  return v;
}

}  // namespace

TEST_CASE("the model spec enumeration matches the eleven table labels") {
  std::vector<std::string> names;
  for (const ModelSpec& spec : all_triage_specs()) names.push_back(spec.name());
  CHECK(names == std::vector<std::string>{"A", "B", "C", "AB(R-a)", "AB(R-t)", "BC(R-a)",
                                          "BC(R-t)", "AC(R-a)", "AC(R-t)", "ABC(R-a)",
                                          "ABC(R-t)"});
}

TEST_CASE("singleton specs ignore the risk mode") {
  auto ans = answers(2, 1, 3);
  ModelSpec averse{{DoctorId::A}, RiskMode::Averse};
  ModelSpec tolerant{{DoctorId::A}, RiskMode::Tolerant};
  CHECK(aggregate_triage(ans, averse) == TriageClass::SendToGP);
  CHECK(aggregate_triage(ans, tolerant) == TriageClass::SendToGP);
}

TEST_CASE("risk-averse takes the ceiling and risk-tolerant the floor") {
  auto ans = answers(1, 2, 3);
  CHECK(aggregate_triage(ans, {{DoctorId::A, DoctorId::B}, RiskMode::Averse}) ==
        TriageClass::SendToGP);  // ceil(1.5) = 2
  CHECK(aggregate_triage(ans, {{DoctorId::A, DoctorId::B}, RiskMode::Tolerant}) ==
        TriageClass::StayHome);  // floor(1.5) = 1
  CHECK(aggregate_triage(ans, {{DoctorId::A, DoctorId::B, DoctorId::C}, RiskMode::Averse}) ==
        TriageClass::SendToGP);  // mean 2.0
  CHECK(aggregate_triage(ans, {{DoctorId::A, DoctorId::B, DoctorId::C}, RiskMode::Tolerant}) ==
        TriageClass::SendToGP);
}

TEST_CASE("aggregation over all 27 answer triples obeys ceil/floor and risk ordering") {
  for (int a = 1; a <= 3; ++a) {
    for (int b = 1; b <= 3; ++b) {
      for (int c = 1; c <= 3; ++c) {
        auto ans = answers(a, b, c);
        for (const ModelSpec& spec : all_triage_specs()) {
          long sum = 0;
          for (DoctorId d : spec.doctors) sum += ans.at(d).triage;
          double mean = static_cast<double>(sum) / spec.doctors.size();
          int got = static_cast<int>(aggregate_triage(ans, spec));
          if (spec.risk == RiskMode::Averse) {
            CHECK(got == static_cast<int>(std::ceil(mean)));
          } else {
            CHECK(got == static_cast<int>(std::floor(mean)));
          }
          ModelSpec other = spec;
          other.risk = spec.risk == RiskMode::Averse ? RiskMode::Tolerant : RiskMode::Averse;
          int averse = static_cast<int>(
              aggregate_triage(ans, spec.risk == RiskMode::Averse ? spec : other));
          int tolerant = static_cast<int>(
              aggregate_triage(ans, spec.risk == RiskMode::Tolerant ? spec : other));
          CHECK(averse >= tolerant);
          bool integer_mean = sum % static_cast<long>(spec.doctors.size()) == 0;
          CHECK((averse == tolerant) == integer_mean);
        }
      }
    }
  }
}

TEST_CASE("missing doctors raise an error") {
  std::map<DoctorId, DoctorAnswers> partial = {{DoctorId::A, {1, 1, true}}};
  CHECK_THROWS_AS(aggregate_triage(partial, {{DoctorId::A, DoctorId::B}, RiskMode::Averse}),
                  Error);
  CHECK_THROWS_AS(combine_gtp(partial, {DoctorId::B}), Error);
}

TEST_CASE("gtp follows (r-1)/4 exactly") {
  CHECK(gtp(1) == 0.0);
  CHECK(gtp(2) == 0.25);
  CHECK(gtp(3) == 0.5);
  CHECK(gtp(4) == 0.75);
  CHECK(gtp(5) == 1.0);
  CHECK_THROWS_AS(gtp(0), Error);
  CHECK_THROWS_AS(gtp(6), Error);
  for (int r = 1; r < 5; ++r) CHECK(gtp(r) < gtp(r + 1));
}

TEST_CASE("combined gtp is the mean of individual gtps") {
  CHECK(combine_gtp(answers(1, 1, 1, 3, 1, 5), {DoctorId::A}) == 0.5);
  CHECK(combine_gtp(answers(1, 1, 1, 1, 5, 3), {DoctorId::A, DoctorId::B}) == 0.5);
  CHECK(combine_gtp(answers(1, 1, 1, 2, 3, 4), {DoctorId::A, DoctorId::B, DoctorId::C}) == 0.5);
}

TEST_CASE("the three decision functions differ only on the boundary") {
  CHECK(decide(0.5, DecisionFunction::LE) == Diagnosis::NO_COVID);
  CHECK(decide(0.5, DecisionFunction::LT) == Diagnosis::COVID);
  CHECK(decide(0.5, DecisionFunction::NEQ) == Diagnosis::EXCLUDED);
  CHECK(decide(0.75, DecisionFunction::LE) == Diagnosis::COVID);
  CHECK(decide(0.75, DecisionFunction::LT) == Diagnosis::COVID);
  CHECK(decide(0.75, DecisionFunction::NEQ) == Diagnosis::COVID);
  CHECK(decide(0.25, DecisionFunction::LE) == Diagnosis::NO_COVID);
  CHECK(decide(0.25, DecisionFunction::LT) == Diagnosis::NO_COVID);
  CHECK(decide(0.25, DecisionFunction::NEQ) == Diagnosis::NO_COVID);
}

TEST_CASE("decision functions agree off the boundary on the 17-point grid") {
  for (int i = 0; i <= 16; ++i) {
    double prob = static_cast<double>(i) / 16.0;
    Diagnosis le = decide(prob, DecisionFunction::LE);
    Diagnosis lt = decide(prob, DecisionFunction::LT);
    Diagnosis neq = decide(prob, DecisionFunction::NEQ);
    if (prob != 0.5) {
      CHECK(le == lt);
      CHECK(neq == le);
    } else {
      CHECK(le == Diagnosis::NO_COVID);
      CHECK(lt == Diagnosis::COVID);
      CHECK(neq == Diagnosis::EXCLUDED);
    }
  }
}

TEST_CASE("all reachable combined GTP boundary cases compare exactly") {
  // every doctor subset and rating combination whose mean GTP is 1/2 must
  // hit the boundary exactly in floating point
  std::vector<std::vector<DoctorId>> combos = all_diagnosis_combos();
  for (const auto& combo : combos) {
    std::vector<int> ratings(combo.size(), 1);
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
      if (i == combo.size()) {
        std::map<DoctorId, DoctorAnswers> ans;
        long sum = 0;
        for (std::size_t d = 0; d < combo.size(); ++d) {
          ans[combo[d]] = {1, ratings[d], true};
          sum += ratings[d];
        }
        double p = combine_gtp(ans, combo);
        bool is_boundary = 2L * (sum - static_cast<long>(combo.size())) ==
                           4L * static_cast<long>(combo.size());
        CHECK((p == 0.5) == is_boundary);
        return;
      }
      for (int r = 1; r <= 5; ++r) {
        ratings[i] = r;
        walk(i + 1);
      }
    };
    walk(0);
  }
}

TEST_CASE("diagnose clamps the SVR output into [0,1]") {
  SvrModel zero;
  zero.kernel_spec.kind = KernelSpec::Kind::Linear;
  zero.bias = 0.8;
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LE) == Diagnosis::COVID);
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LT) == Diagnosis::COVID);
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::NEQ) == Diagnosis::COVID);
  zero.bias = 0.2;
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LE) == Diagnosis::NO_COVID);
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LT) == Diagnosis::NO_COVID);
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::NEQ) == Diagnosis::NO_COVID);
  zero.bias = 1.7;  // clamped to 1
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LE) == Diagnosis::COVID);
  zero.bias = -0.3;  // clamped to 0
  CHECK(diagnose(zero, vec({0.0}), DecisionFunction::LT) == Diagnosis::NO_COVID);
}

TEST_CASE("a full triage hierarchy trains and recovers separable labels") {
  // StayHome at x ~ -1, GP at x ~ 1 (y=0), hospital at x ~ 1 (y=2)
  std::vector<PostVector> X;
  std::vector<TriageClass> labels;
  for (int i = 0; i < 6; ++i) {
    double jitter = 0.05 * i;
    X.push_back(vec({-1.0 - jitter, 0.0}));
    labels.push_back(TriageClass::StayHome);
    X.push_back(vec({1.0 + jitter, 0.0}));
    labels.push_back(TriageClass::SendToGP);
    X.push_back(vec({1.0 + jitter, 2.0}));
    labels.push_back(TriageClass::SendToHospital);
  }
  SvmConfig config;
  config.kernel_spec.kind = KernelSpec::Kind::Linear;
  HierarchicalTriageModel model = train_triage(X, labels, config);
  CHECK(model.classifier2.has_value());
  CHECK_FALSE(model.degenerate);
  for (std::size_t i = 0; i < X.size(); ++i) {
    CHECK(predict_triage(model, X[i]) == labels[i]);
  }
}

TEST_CASE("missing hospital labels omit classifier 2 and set the flag") {
  std::vector<PostVector> X = {vec({-1.0}), vec({-0.9}), vec({1.0}), vec({0.9})};
  std::vector<TriageClass> labels = {TriageClass::StayHome, TriageClass::StayHome,
                                     TriageClass::SendToGP, TriageClass::SendToGP};
  HierarchicalTriageModel model = train_triage(X, labels, {});
  CHECK_FALSE(model.classifier2.has_value());
  CHECK(model.degenerate);
  // any Send-side input resolves to SendToGP, never SendToHospital
  for (double x : {0.5, 1.0, 5.0, -5.0}) {
    CHECK(predict_triage(model, vec({x})) != TriageClass::SendToHospital);
  }
  CHECK(predict_triage(model, vec({1.0})) == TriageClass::SendToGP);
}

TEST_CASE("all-one-class stage 1 raises an error") {
  std::vector<PostVector> X = {vec({1.0}), vec({2.0})};
  std::vector<TriageClass> labels = {TriageClass::SendToGP, TriageClass::SendToHospital};
  CHECK_THROWS_AS(train_triage(X, labels, {}), Error);
}

TEST_CASE("a stage-1 tie resolves to Send") {
  HierarchicalTriageModel model;
  model.classifier1.kernel_spec.kind = KernelSpec::Kind::Linear;
  model.classifier1.bias = 0.0;  // decision value exactly 0 for any input
  model.degenerate = true;
  CHECK(predict_triage(model, vec({3.0})) == TriageClass::SendToGP);
}

TEST_CASE("a separable regression task reaches 95% NEQ agreement") {
  // four target clusters at the reachable GTP values; feature = target + jitter
  std::vector<PostVector> X;
  std::vector<double> targets;
  Rng rng(88);
  for (int i = 0; i < 60; ++i) {
    double t = static_cast<double>(i % 5) / 4.0;
    X.push_back(vec({t, 0.02 * (rng.uniform_real() - 0.5)}));
    targets.push_back(t);
  }
  SvmConfig config;
  config.kernel_spec.kind = KernelSpec::Kind::Linear;
  config.epsilon = 0.05;
  SvrModel model = train_regressor(X, targets, config);
  int agree = 0, evaluated = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    Diagnosis truth = decide(targets[i], DecisionFunction::NEQ);
    if (truth == Diagnosis::EXCLUDED) continue;
    ++evaluated;
    if (diagnose(model, X[i], DecisionFunction::NEQ) == truth) ++agree;
  }
  REQUIRE(evaluated > 0);
  CHECK(static_cast<double>(agree) / evaluated >= 0.95);
}

TEST_CASE("feature importance ranks a planted dominant feature first") {
  // the alpha symptom drives the rating; beta is anticorrelated, gamma unseen
  std::vector<AnnotatedPost> posts;
  Vocabulary symptoms({"alpha", "beta", "gamma"});
  for (int i = 0; i < 40; ++i) {
    AnnotatedPost ap;
    bool has_alpha = i % 2 == 0;
    std::string text = has_alpha ? "alpha today" : "beta today";
    ap.post.id = "imp-" + std::to_string(i);
    ap.post.text = text;
    ap.post.sentences = split_and_tokenize(text);
    std::size_t end = ap.post.sentences[0].tokens[0].char_range.end;
    ap.gold_concepts.push_back(resolve_concept(ap.post, ConceptLabel::SYM, 0, end));
    Relation r;
    r.kind = RelationKind::SYM_UNRESOLVED;
    r.symptom = ap.gold_concepts[0];
    ap.gold_relations.push_back(r);
    int rating = has_alpha ? 5 : 1;
    for (DoctorId d : {DoctorId::A, DoctorId::B, DoctorId::C}) {
      ap.answers[d] = DoctorAnswers{1, rating, true};
    }
    posts.push_back(std::move(ap));
  }
  SvmConfig config;
  config.kernel_spec.kind = KernelSpec::Kind::Linear;
  config.epsilon = 0.1;
  auto ranked = feature_importance(posts, symptoms, config);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].symptom == "alpha");
  double total = 0.0;
  for (const auto& fi : ranked) total += fi.weight;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("feature importance requires a linear kernel") {
  SvmConfig config;  // default RBF
  CHECK_THROWS_AS(feature_importance({}, Vocabulary({"x"}), config), Error);
}

TEST_CASE("all-zero vectors give zero weights in lexicographic order") {
  std::vector<AnnotatedPost> posts;
  for (int i = 0; i < 6; ++i) {
    AnnotatedPost ap;
    ap.post.id = "z" + std::to_string(i);
    ap.post.text = "nothing";
    ap.post.sentences = split_and_tokenize(ap.post.text);
    for (DoctorId d : {DoctorId::A, DoctorId::B, DoctorId::C}) {
      ap.answers[d] = DoctorAnswers{1, 1 + (i % 5), true};
    }
    posts.push_back(std::move(ap));
  }
  SvmConfig config;
  config.kernel_spec.kind = KernelSpec::Kind::Linear;
  Vocabulary symptoms({"zeta", "alpha", "mu"});
  auto ranked = feature_importance(posts, symptoms, config);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].weight == 0.0);
  CHECK(ranked[0].symptom == "alpha");
  CHECK(ranked[1].symptom == "mu");
  CHECK(ranked[2].symptom == "zeta");
}

TEST_CASE("hierarchy consistency holds on generated data") {
  GeneratorConfig config;
  config.seed = 41;
  config.num_posts = 60;
  config.triage_fractions = {0.6, 0.4, 0.0};  // no hospital
  auto posts = generate_corpus(config);
  Vocabularies vocabs = build_vocabularies(posts);
  std::vector<PostVector> X;
  std::vector<TriageClass> labels;
  ModelSpec spec{{DoctorId::A}, RiskMode::Averse};
  for (const AnnotatedPost& ap : posts) {
    X.push_back(make_vector(ap, vocabs, VectorKind::SymptomModifier, Regime::GroundTruth));
    labels.push_back(aggregate_triage(ap.answers, spec));
  }
  HierarchicalTriageModel model = train_triage(X, labels, {});
  CHECK(model.degenerate);
  for (const PostVector& x : X) {
    CHECK(predict_triage(model, x) != TriageClass::SendToHospital);
  }
}
