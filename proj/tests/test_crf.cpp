#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "covtriage/crf.hpp"
#include "covtriage/rng.hpp"
#include "oracles.hpp"

using namespace covtriage;

namespace {

/// Small model with random weights and per-token singleton features.
struct RandomInstance {
  CrfModel model;
  std::vector<std::vector<int>> features;
  std::vector<int> tags;
};

RandomInstance random_instance(Rng& rng, int T, int K, int F, double weight_scale) {
  RandomInstance inst;
  for (int k = 0; k < K; ++k) inst.model.labels.push_back("t" + std::to_string(k));
  for (int f = 0; f < F; ++f) {
    std::string name = "f" + std::to_string(f);
    inst.model.feature_index.emplace(name, f);
    inst.model.feature_names.push_back(name);
  }
  inst.model.emission_weights.resize(static_cast<std::size_t>(F) * K);
  inst.model.transition_weights.resize(static_cast<std::size_t>(K) * K);
  for (double& w : inst.model.emission_weights) {
    w = (rng.uniform_real() * 2.0 - 1.0) * weight_scale;
  }
  for (double& w : inst.model.transition_weights) {
    w = (rng.uniform_real() * 2.0 - 1.0) * weight_scale;
  }
  inst.model.regularization = 0.0;
  inst.features.resize(static_cast<std::size_t>(T));
  inst.tags.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    int nf = 1 + static_cast<int>(rng.uniform(3));
    for (int i = 0; i < nf; ++i) {
      inst.features[static_cast<std::size_t>(t)].push_back(static_cast<int>(rng.uniform(F)));
    }
    inst.tags[static_cast<std::size_t>(t)] = static_cast<int>(rng.uniform(K));
  }
  return inst;
}

CrfModel zero_model(int K, int F) {
  CrfModel m;
  for (int k = 0; k < K; ++k) m.labels.push_back("t" + std::to_string(k));
  for (int f = 0; f < F; ++f) {
    std::string name = "f" + std::to_string(f);
    m.feature_index.emplace(name, f);
    m.feature_names.push_back(name);
  }
  m.emission_weights.assign(static_cast<std::size_t>(F) * K, 0.0);
  m.transition_weights.assign(static_cast<std::size_t>(K) * K, 0.0);
  m.regularization = 0.0;
  return m;
}

}  // namespace

TEST_CASE("bio tag set covers six labels plus O") {
  auto tags = bio_tag_set();
  REQUIRE(tags.size() == kNumTags);
  CHECK(tags[0] == "O");
  CHECK(tags[1] == "B-SYM");
  CHECK(tags[2] == "I-SYM");
  CHECK(tags[12] == "I-NEGATION");
}

TEST_CASE("zero model on T=3 gives uniform marginals and logZ = 3 ln K") {
  const int K = 4;
  CrfModel m = zero_model(K, 2);
  std::vector<std::vector<int>> features = {{0}, {1}, {0}};
  Marginals mg = log_partition_and_marginals(m, features);
  CHECK(mg.log_z == doctest::Approx(3.0 * std::log(K)).epsilon(1e-12));
  for (double u : mg.unary) CHECK(u == doctest::Approx(1.0 / K).epsilon(1e-12));
}

TEST_CASE("single-token chain degenerates to log-sum-exp of emissions") {
  CrfModel m = zero_model(3, 1);
  m.emission_weights = {1.0, 2.0, 3.0};
  std::vector<std::vector<int>> features = {{0}};
  Marginals mg = log_partition_and_marginals(m, features);
  double expect = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(mg.log_z == doctest::Approx(expect).epsilon(1e-12));
  CHECK(mg.pairwise.empty());
}

TEST_CASE("logZ matches exhaustive enumeration on 100+ random instances") {
  Rng rng(42);
  for (int it = 0; it < 120; ++it) {
    int T = 1 + static_cast<int>(rng.uniform(6));
    int K = 2 + static_cast<int>(rng.uniform(3));
    RandomInstance inst = random_instance(rng, T, K, 5, 2.0);
    Marginals mg = log_partition_and_marginals(inst.model, inst.features);
    double expect = oracles::enumerate_log_z(inst.model, inst.features);
    CHECK(std::abs(mg.log_z - expect) < 1e-9);
  }
}

TEST_CASE("unary marginals sum to 1 and pairwise marginals are consistent") {
  Rng rng(7);
  for (int it = 0; it < 50; ++it) {
    int T = 2 + static_cast<int>(rng.uniform(18));
    int K = 2 + static_cast<int>(rng.uniform(4));
    RandomInstance inst = random_instance(rng, T, K, 8, 5.0);
    Marginals mg = log_partition_and_marginals(inst.model, inst.features);
    for (int t = 0; t < T; ++t) {
      double row = 0.0;
      for (int k = 0; k < K; ++k) row += mg.unary[static_cast<std::size_t>(t) * K + k];
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
    for (int t = 0; t + 1 < T; ++t) {
      for (int j = 0; j < K; ++j) {
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
          sum += mg.pairwise[(static_cast<std::size_t>(t) * K + j) * K + k];
        }
        CHECK(std::abs(sum - mg.unary[static_cast<std::size_t>(t) * K + j]) < 1e-9);
      }
    }
  }
}

TEST_CASE("log-space inference survives large weights and long chains") {
  Rng rng(13);
  RandomInstance inst = random_instance(rng, 1000, 3, 4, 50.0);
  Marginals mg = log_partition_and_marginals(inst.model, inst.features);
  CHECK(std::isfinite(mg.log_z));
  for (double u : mg.unary) CHECK(std::isfinite(u));
}

TEST_CASE("viterbi ties break to the lowest tag index") {
  CrfModel m = zero_model(3, 1);
  std::vector<std::vector<int>> features = {{0}, {0}, {0}};
  CHECK(viterbi(m, features) == std::vector<int>{0, 0, 0});
}

TEST_CASE("forced emissions produce the forced path") {
  CrfModel m = zero_model(3, 3);
  // feature f strongly prefers tag f
  for (int f = 0; f < 3; ++f) {
    for (int k = 0; k < 3; ++k) {
      m.emission_weights[static_cast<std::size_t>(f) * 3 + k] = f == k ? 10.0 : 0.0;
    }
  }
  std::vector<std::vector<int>> features = {{2}, {0}, {1}};
  CHECK(viterbi(m, features) == std::vector<int>{2, 0, 1});
}

TEST_CASE("viterbi path attains the enumerated maximum on random instances") {
  Rng rng(4242);
  for (int it = 0; it < 120; ++it) {
    int T = 1 + static_cast<int>(rng.uniform(5));
    int K = 2 + static_cast<int>(rng.uniform(3));
    RandomInstance inst = random_instance(rng, T, K, 5, 2.0);
    std::vector<int> path = viterbi(inst.model, inst.features);
    double got = oracles::path_score(inst.model, inst.features, path);
    double best = oracles::enumerate_best_score(inst.model, inst.features);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(17);
  int checked = 0;
  for (int it = 0; it < 25; ++it) {
    int T = 1 + static_cast<int>(rng.uniform(5));
    int K = 2 + static_cast<int>(rng.uniform(3));
    int F = 4;
    RandomInstance inst = random_instance(rng, T, K, F, 1.5);
    inst.model.regularization = it % 2 == 0 ? 0.0 : 0.5;
    TaggedSequence seq{inst.features, inst.tags};
    LossGrad lg = nll_and_gradient(inst.model, {seq});

    const double h = 1e-5;
    std::size_t n_emit = inst.model.emission_weights.size();
    std::size_t n_all = n_emit + inst.model.transition_weights.size();
    for (std::size_t i = 0; i < n_all; ++i) {
      double* slot = i < n_emit ? &inst.model.emission_weights[i]
                                : &inst.model.transition_weights[i - n_emit];
      double saved = *slot;
      *slot = saved + h;
      double up = nll_and_gradient(inst.model, {seq}).loss;
      *slot = saved - h;
      double down = nll_and_gradient(inst.model, {seq}).loss;
      *slot = saved;
      double fd = (up - down) / (2.0 * h);
      double rel = std::abs(lg.gradient[i] - fd) / std::max(1.0, std::abs(fd));
      CHECK(rel < 1e-4);
    }
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("gradient equals lambda*w when empirical matches expected counts") {
  // two single-token sequences with the same feature and both tags as gold:
  // at w = 0 the model expectation (1/2, 1/2) equals the empirical rate
  CrfModel m = zero_model(2, 1);
  m.regularization = 0.7;
  TaggedSequence a{{{0}}, {0}};
  TaggedSequence b{{{0}}, {1}};
  LossGrad lg = nll_and_gradient(m, {a, b});
  for (double g : lg.gradient) CHECK(g == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("training a symmetric 1-token problem reaches a stationary point") {
  std::vector<TokenFeatures> f1 = {{0, {"only"}}};
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  data.emplace_back(f1, std::vector<int>{0});
  CrfTrainConfig config;
  config.lambda = 0.1;
  config.tolerance = 1e-7;
  CrfTrainReport report;
  train_crf(data, config, &report);
  CHECK(report.converged);
  CHECK(report.final_grad_inf_norm < 1e-6);
}

TEST_CASE("all-O training data predicts O everywhere") {
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  for (int i = 0; i < 4; ++i) {
    std::vector<TokenFeatures> fs = {{0, {"w0=x"}}, {1, {"w0=y"}}};
    data.emplace_back(fs, std::vector<int>{0, 0});
  }
  CrfModel m = train_crf(data, {});
  auto ids = lookup_features(m, {{0, {"w0=x"}}, {1, {"w0=y"}}});
  CHECK(viterbi(m, ids) == std::vector<int>{0, 0});
}

TEST_CASE("a separable toy dataset is fit to 100% training accuracy") {
  // each tag keyed by a unique feature
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    int T = 2 + static_cast<int>(rng.uniform(4));
    std::vector<TokenFeatures> fs;
    std::vector<int> tags;
    for (int t = 0; t < T; ++t) {
      int tag = static_cast<int>(rng.uniform(4));  // O, B-SYM, I-SYM, B-SEVERITY
      if (tag == 2 && (tags.empty() || (tags.back() != 1 && tags.back() != 2))) tag = 1;
      fs.push_back({t, {"key=" + std::to_string(tag)}});
      tags.push_back(tag);
    }
    data.emplace_back(fs, tags);
  }
  CrfTrainConfig config;
  config.lambda = 0.01;
  CrfModel m = train_crf(data, config);
  for (const auto& [fs, tags] : data) {
    CrfModel& mm = m;
    auto ids = lookup_features(mm, fs);
    CHECK(viterbi(m, ids) == tags);
  }
}

TEST_CASE("training is deterministic") {
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    int T = 1 + static_cast<int>(rng.uniform(5));
    std::vector<TokenFeatures> fs;
    std::vector<int> tags;
    for (int t = 0; t < T; ++t) {
      fs.push_back({t, {"w=" + std::to_string(rng.uniform(6))}});
      tags.push_back(static_cast<int>(rng.uniform(2)) == 0 ? 0 : 1);
    }
    data.emplace_back(fs, tags);
  }
  CrfModel a = train_crf(data, {});
  CrfModel b = train_crf(data, {});
  REQUIRE(a.emission_weights.size() == b.emission_weights.size());
  for (std::size_t i = 0; i < a.emission_weights.size(); ++i) {
    CHECK(a.emission_weights[i] == b.emission_weights[i]);
  }
  for (std::size_t i = 0; i < a.transition_weights.size(); ++i) {
    CHECK(a.transition_weights[i] == b.transition_weights[i]);
  }
}

TEST_CASE("loss never increases across accepted optimizer steps") {
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  Rng rng(33);
  for (int i = 0; i < 12; ++i) {
    int T = 2 + static_cast<int>(rng.uniform(4));
    std::vector<TokenFeatures> fs;
    std::vector<int> tags;
    for (int t = 0; t < T; ++t) {
      fs.push_back({t, {"w=" + std::to_string(rng.uniform(5)), "s=" + std::to_string(t % 2)}});
      tags.push_back(static_cast<int>(rng.uniform(3)));
    }
    // repair invalid I-after-nothing sequences for tag 2 (I-SYM)
    for (std::size_t t = 0; t < tags.size(); ++t) {
      if (tags[t] == 2 && (t == 0 || (tags[t - 1] != 1 && tags[t - 1] != 2))) tags[t] = 1;
    }
    data.emplace_back(fs, tags);
  }
  CrfTrainReport report;
  train_crf(data, {}, &report);
  for (std::size_t i = 1; i < report.loss_trace.size(); ++i) {
    CHECK(report.loss_trace[i] <= report.loss_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("bio round-trip is the identity for valid span lists") {
  Rng rng(55);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.uniform(12);
    // random non-overlapping spans
    std::vector<ConceptSpan> spans;
    std::size_t t = 0;
    while (t < n) {
      if (rng.bernoulli(0.4)) {
        std::size_t len = 1 + rng.uniform(3);
        len = std::min(len, n - t);
        ConceptSpan c;
        c.label = static_cast<ConceptLabel>(rng.uniform(6));
        c.token_range = {t, t + len};
        spans.push_back(c);
        t += len;
      } else {
        ++t;
      }
    }
    std::vector<int> tags = encode_bio(spans, n);
    auto decoded = decode_bio(tags);
    REQUIRE(decoded.size() == spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
      CHECK(decoded[i].label == spans[i].label);
      CHECK(decoded[i].token_range == spans[i].token_range);
    }
  }
}

TEST_CASE("orphan I-X is promoted to B-X") {
  // I-SYM with no opener: tag 2 at position 0
  auto spans = decode_bio({2, 2, 0});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].label == ConceptLabel::SYM);
  CHECK(spans[0].token_range == Span{0, 2});
  // adjacent spans of the same label stay separate through B tags
  auto two = decode_bio({1, 1, 0});
  REQUIRE(two.size() == 2);
}

TEST_CASE("model serialization reproduces predictions exactly") {
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  Rng rng(77);
  for (int i = 0; i < 8; ++i) {
    std::vector<TokenFeatures> fs;
    std::vector<int> tags;
    for (int t = 0; t < 4; ++t) {
      fs.push_back({t, {"w=" + std::to_string(rng.uniform(5))}});
      tags.push_back(rng.bernoulli(0.5) ? 0 : 1);
    }
    data.emplace_back(fs, tags);
  }
  CrfModel m = train_crf(data, {});
  save_crf(m, "crf_roundtrip.model");
  CrfModel loaded = load_crf("crf_roundtrip.model");
  REQUIRE(loaded.feature_names.size() == m.feature_names.size());
  for (const auto& [fs, tags] : data) {
    auto ids_a = lookup_features(m, fs);
    auto ids_b = lookup_features(loaded, fs);
    CHECK(viterbi(m, ids_a) == viterbi(loaded, ids_b));
    Marginals ma = log_partition_and_marginals(m, ids_a);
    Marginals mb = log_partition_and_marginals(loaded, ids_b);
    CHECK(ma.log_z == mb.log_z);
  }
  std::remove("crf_roundtrip.model");
}

TEST_CASE("unknown test-time features are ignored") {
  CrfModel m = zero_model(2, 1);
  auto ids = lookup_features(m, {{0, {"f0", "never-seen"}}});
  REQUIRE(ids.size() == 1);
  CHECK(ids[0].size() == 1);
}

TEST_CASE("tag/feature length mismatch raises an error") {
  CrfModel m = zero_model(2, 1);
  TaggedSequence bad{{{0}, {0}}, {0}};
  CHECK_THROWS_AS(nll_and_gradient(m, {bad}), Error);
}
