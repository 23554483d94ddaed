#include "covtriage/crf.hpp"

#include "covtriage/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace covtriage {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, int n) {
  double m = kNegInf;
  for (int i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

std::vector<std::string> bio_tag_set() {
  std::vector<std::string> tags = {"O"};
  for (int i = 0; i < kNumConceptLabels - 1; ++i) {
    const std::string& name = to_string(static_cast<ConceptLabel>(i));
    tags.push_back("B-" + name);
    tags.push_back("I-" + name);
  }
  return tags;
}

int bio_tag_index(const std::string& tag) {
  static const std::vector<std::string> tags = bio_tag_set();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == tag) return static_cast<int>(i);
  }
  throw Error("unknown BIO tag '" + tag + "'");
}

std::vector<int> encode_bio(const std::vector<ConceptSpan>& sentence_spans,
                            std::size_t num_tokens) {
  std::vector<int> tags(num_tokens, 0);
  for (const ConceptSpan& c : sentence_spans) {
    if (c.token_range.end > num_tokens) throw Error("concept span exceeds sentence length");
    int base = 1 + 2 * static_cast<int>(c.label);
    for (std::size_t t = c.token_range.begin; t < c.token_range.end; ++t) {
      tags[t] = t == c.token_range.begin ? base : base + 1;
    }
  }
  return tags;
}

std::vector<DecodedSpan> decode_bio(const std::vector<int>& tags) {
  std::vector<DecodedSpan> spans;
  std::size_t t = 0;
  while (t < tags.size()) {
    if (tags[t] == 0) {
      ++t;
      continue;
    }
    // B-X opens a span; an orphan I-X is promoted to B-X.
    int label_id = (tags[t] - 1) / 2;
    std::size_t start = t;
    ++t;
    while (t < tags.size() && tags[t] == 2 + 2 * label_id) ++t;  // I-X of the same label
    spans.push_back({static_cast<ConceptLabel>(label_id), {start, t}});
  }
  return spans;
}

std::vector<std::vector<int>> index_features(CrfModel& model,
                                             const std::vector<TokenFeatures>& features,
                                             bool grow) {
  std::vector<std::vector<int>> out(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (const std::string& f : features[t].features) {
      auto it = model.feature_index.find(f);
      if (it == model.feature_index.end()) {
        if (!grow) continue;  // unknown test-time features are ignored
        int id = static_cast<int>(model.feature_names.size());
        model.feature_index.emplace(f, id);
        model.feature_names.push_back(f);
        out[t].push_back(id);
      } else {
        out[t].push_back(it->second);
      }
    }
  }
  return out;
}

std::vector<std::vector<int>> lookup_features(const CrfModel& model,
                                              const std::vector<TokenFeatures>& features) {
  std::vector<std::vector<int>> out(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (const std::string& f : features[t].features) {
      auto it = model.feature_index.find(f);
      if (it != model.feature_index.end()) out[t].push_back(it->second);
    }
  }
  return out;
}

namespace {

/// Emission score matrix [T x K] for one sequence.
std::vector<double> emission_scores(const CrfModel& model,
                                    const std::vector<std::vector<int>>& features) {
  const int K = model.num_tags();
  const int T = static_cast<int>(features.size());
  std::vector<double> scores(static_cast<std::size_t>(T) * K, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int f : features[t]) {
      const double* row = &model.emission_weights[static_cast<std::size_t>(f) * K];
      double* dst = &scores[static_cast<std::size_t>(t) * K];
      for (int k = 0; k < K; ++k) dst[k] += row[k];
    }
  }
  return scores;
}

}  // namespace

Marginals log_partition_and_marginals(const CrfModel& model,
                                      const std::vector<std::vector<int>>& features) {
  const int K = model.num_tags();
  const int T = static_cast<int>(features.size());
  if (T < 1) throw Error("sequence must have length >= 1");
  const std::vector<double> s = emission_scores(model, features);
  const std::vector<double>& trans = model.transition_weights;

  std::vector<double> alpha(static_cast<std::size_t>(T) * K);
  std::vector<double> beta(static_cast<std::size_t>(T) * K);
  std::vector<double> tmp(K);
  for (int k = 0; k < K; ++k) alpha[k] = s[k];
  for (int t = 1; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < K; ++j) {
        tmp[j] = alpha[(t - 1) * static_cast<std::size_t>(K) + j] + trans[j * K + k];
      }
      alpha[t * static_cast<std::size_t>(K) + k] = s[t * static_cast<std::size_t>(K) + k] +
                                                   log_sum_exp(tmp.data(), K);
    }
  }
  for (int k = 0; k < K; ++k) beta[(T - 1) * static_cast<std::size_t>(K) + k] = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int j = 0; j < K; ++j) {
      for (int k = 0; k < K; ++k) {
        tmp[k] = trans[j * K + k] + s[(t + 1) * static_cast<std::size_t>(K) + k] +
                 beta[(t + 1) * static_cast<std::size_t>(K) + k];
      }
      beta[t * static_cast<std::size_t>(K) + j] = log_sum_exp(tmp.data(), K);
    }
  }

  Marginals m;
  m.log_z = log_sum_exp(&alpha[(T - 1) * static_cast<std::size_t>(K)], K);
  m.unary.resize(static_cast<std::size_t>(T) * K);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      std::size_t i = t * static_cast<std::size_t>(K) + k;
      m.unary[i] = std::exp(alpha[i] + beta[i] - m.log_z);
    }
  }
  if (T > 1) {
    m.pairwise.resize(static_cast<std::size_t>(T - 1) * K * K);
    for (int t = 0; t + 1 < T; ++t) {
      for (int j = 0; j < K; ++j) {
        for (int k = 0; k < K; ++k) {
          double lp = alpha[t * static_cast<std::size_t>(K) + j] + trans[j * K + k] +
                      s[(t + 1) * static_cast<std::size_t>(K) + k] +
                      beta[(t + 1) * static_cast<std::size_t>(K) + k] - m.log_z;
          m.pairwise[(static_cast<std::size_t>(t) * K + j) * K + k] = std::exp(lp);
        }
      }
    }
  }
  return m;
}

std::vector<int> viterbi(const CrfModel& model, const std::vector<std::vector<int>>& features) {
  const int K = model.num_tags();
  const int T = static_cast<int>(features.size());
  if (T < 1) throw Error("sequence must have length >= 1");
  const std::vector<double> s = emission_scores(model, features);
  const std::vector<double>& trans = model.transition_weights;

  std::vector<double> delta(static_cast<std::size_t>(T) * K);
  std::vector<int> back(static_cast<std::size_t>(T) * K, 0);
  for (int k = 0; k < K; ++k) delta[k] = s[k];
  for (int t = 1; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      double best = kNegInf;
      int arg = 0;
      for (int j = 0; j < K; ++j) {
        double v = delta[(t - 1) * static_cast<std::size_t>(K) + j] + trans[j * K + k];
        if (v > best) {  // strict: ties keep the lowest j
          best = v;
          arg = j;
        }
      }
      delta[t * static_cast<std::size_t>(K) + k] = best + s[t * static_cast<std::size_t>(K) + k];
      back[t * static_cast<std::size_t>(K) + k] = arg;
    }
  }
  double best = kNegInf;
  int arg = 0;
  for (int k = 0; k < K; ++k) {
    double v = delta[(T - 1) * static_cast<std::size_t>(K) + k];
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  std::vector<int> path(T);
  path[T - 1] = arg;
  for (int t = T - 1; t > 0; --t) {
    path[t - 1] = back[t * static_cast<std::size_t>(K) + path[t]];
  }
  return path;
}

LossGrad nll_and_gradient(const CrfModel& model, const std::vector<TaggedSequence>& batch) {
  if (batch.empty()) throw Error("training batch must be nonempty");
  const int K = model.num_tags();
  const std::size_t F = model.feature_names.size();
  const std::size_t n_params = F * K + static_cast<std::size_t>(K) * K;

  LossGrad out;
  out.gradient.assign(n_params, 0.0);
  double* g_emit = out.gradient.data();
  double* g_trans = out.gradient.data() + F * K;

  for (const TaggedSequence& seq : batch) {
    const int T = static_cast<int>(seq.features.size());
    if (seq.tags.size() != seq.features.size()) {
      throw Error("tag/feature length mismatch in training instance");
    }
    Marginals m = log_partition_and_marginals(model, seq.features);

    // gold path score
    double gold = 0.0;
    for (int t = 0; t < T; ++t) {
      int y = seq.tags[t];
      if (y < 0 || y >= K) throw Error("tag index out of range");
      for (int f : seq.features[t]) gold += model.emission(f, y);
      if (t > 0) gold += model.transition(seq.tags[t - 1], y);
    }
    out.loss += m.log_z - gold;

    // expected minus empirical feature counts
    for (int t = 0; t < T; ++t) {
      const double* u = &m.unary[static_cast<std::size_t>(t) * K];
      for (int f : seq.features[t]) {
        double* row = g_emit + static_cast<std::size_t>(f) * K;
        for (int k = 0; k < K; ++k) row[k] += u[k];
        row[seq.tags[t]] -= 1.0;
      }
    }
    for (int t = 0; t + 1 < T; ++t) {
      const double* p = &m.pairwise[static_cast<std::size_t>(t) * K * K];
      for (int jk = 0; jk < K * K; ++jk) g_trans[jk] += p[jk];
      g_trans[seq.tags[t] * K + seq.tags[t + 1]] -= 1.0;
    }
  }

  const double lambda = model.regularization;
  if (lambda > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < F * K; ++i) {
      sq += model.emission_weights[i] * model.emission_weights[i];
      out.gradient[i] += lambda * model.emission_weights[i];
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(K) * K; ++i) {
      sq += model.transition_weights[i] * model.transition_weights[i];
      out.gradient[F * K + i] += lambda * model.transition_weights[i];
    }
    out.loss += 0.5 * lambda * sq;
  }
  return out;
}

namespace {

void unpack_params(const std::vector<double>& w, CrfModel& model) {
  const std::size_t ek = model.feature_names.size() * model.labels.size();
  std::copy(w.begin(), w.begin() + ek, model.emission_weights.begin());
  std::copy(w.begin() + ek, w.end(), model.transition_weights.begin());
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Strong-Wolfe line search (bracket + zoom with bisection). Returns the
/// accepted step; fills f/g at the new point.
class LineSearch {
 public:
  LineSearch(const std::function<double(const std::vector<double>&, std::vector<double>&)>& eval)
      : eval_(eval) {}

  // On entry: x0, f0, g0, descent direction d with g0.d < 0.
  bool search(const std::vector<double>& x0, double f0, const std::vector<double>& g0,
              const std::vector<double>& d, std::vector<double>& x_out, double& f_out,
              std::vector<double>& g_out) {
    const double c1 = 1e-4, c2 = 0.9;
    const double d0 = dot(g0, d);
    if (d0 >= 0.0) return false;
    double alpha_prev = 0.0, f_prev = f0, d_prev = d0;
    double alpha = 1.0;
    std::vector<double> x(x0.size()), g(x0.size());
    auto phi = [&](double a, double& df) {
      for (std::size_t i = 0; i < x0.size(); ++i) x[i] = x0[i] + a * d[i];
      double f = eval_(x, g);
      df = dot(g, d);
      return f;
    };
    for (int iter = 0; iter < 30; ++iter) {
      double df;
      double f = phi(alpha, df);
      if (f > f0 + c1 * alpha * d0 || (iter > 0 && f >= f_prev)) {
        return zoom(alpha_prev, f_prev, d_prev, alpha, f, f0, d0, c1, c2, phi, x_out, f_out,
                    g_out, x, g);
      }
      if (std::abs(df) <= -c2 * d0) {
        x_out = x;
        f_out = f;
        g_out = g;
        return true;
      }
      if (df >= 0.0) {
        return zoom(alpha, f, df, alpha_prev, f_prev, f0, d0, c1, c2, phi, x_out, f_out, g_out,
                    x, g);
      }
      alpha_prev = alpha;
      f_prev = f;
      d_prev = df;
      alpha *= 2.0;
    }
    return false;
  }

 private:
  template <typename Phi>
  bool zoom(double lo, double f_lo, double d_lo, double hi, double f_hi, double f0, double d0,
            double c1, double c2, Phi&& phi, std::vector<double>& x_out, double& f_out,
            std::vector<double>& g_out, std::vector<double>& x, std::vector<double>& g) {
    (void)d_lo;
    (void)f_hi;
    for (int iter = 0; iter < 50; ++iter) {
      // cubic-ish: fall back to bisection for robustness
      double alpha = 0.5 * (lo + hi);
      double df;
      double f = phi(alpha, df);
      if (f > f0 + c1 * alpha * d0 || f >= f_lo) {
        hi = alpha;
        f_hi = f;
      } else {
        if (std::abs(df) <= -c2 * d0) {
          x_out = x;
          f_out = f;
          g_out = g;
          return true;
        }
        if (df * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = alpha;
        f_lo = f;
        d_lo = df;
      }
      if (std::abs(hi - lo) < 1e-16) break;
    }
    // Accept the best sufficient-decrease point even if curvature failed;
    // the objective still strictly decreased.
    double df;
    double f = phi(lo, df);
    if (lo > 0.0 && f < f0) {
      x_out = x;
      f_out = f;
      g_out = g;
      return true;
    }
    return false;
  }

  std::function<double(const std::vector<double>&, std::vector<double>&)> eval_;
};

}  // namespace

CrfModel train_crf(const std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>>& data,
                   const CrfTrainConfig& config, CrfTrainReport* report) {
  if (data.empty()) throw Error("training data must be nonempty");

  CrfModel model;
  model.labels = bio_tag_set();
  model.regularization = config.lambda;

  std::vector<TaggedSequence> batch;
  batch.reserve(data.size());
  for (const auto& [features, tags] : data) {
    TaggedSequence seq;
    seq.features = index_features(model, features, /*grow=*/true);
    seq.tags = tags;
    if (seq.tags.size() != seq.features.size()) {
      throw Error("tag/feature length mismatch in training instance");
    }
    batch.push_back(std::move(seq));
  }

  const int K = model.num_tags();
  const std::size_t F = model.feature_names.size();
  const std::size_t n = F * K + static_cast<std::size_t>(K) * K;
  model.emission_weights.assign(F * K, 0.0);
  model.transition_weights.assign(static_cast<std::size_t>(K) * K, 0.0);

  auto eval = [&](const std::vector<double>& w, std::vector<double>& grad) {
    unpack_params(w, model);
    LossGrad lg = nll_and_gradient(model, batch);
    grad = std::move(lg.gradient);
    return lg.loss;
  };

  std::vector<double> x(n, 0.0), g(n);
  double f = eval(x, g);
  if (!std::isfinite(f)) throw Error("non-finite loss at iteration 0");

  CrfTrainReport local;
  CrfTrainReport& rep = report ? *report : local;
  rep.loss_trace.push_back(f);

  // L-BFGS two-loop recursion with history m.
  const int m = config.lbfgs_memory;
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;
  LineSearch ls(eval);

  int iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    rep.final_grad_inf_norm = inf_norm(g);
    if (rep.final_grad_inf_norm < config.tolerance) {
      rep.converged = true;
      break;
    }
    // direction = -H g
    std::vector<double> q = g;
    const int h = static_cast<int>(s_hist.size());
    std::vector<double> alpha_coef(h);
    for (int i = h - 1; i >= 0; --i) {
      alpha_coef[i] = rho_hist[i] * dot(s_hist[i], q);
      for (std::size_t k = 0; k < n; ++k) q[k] -= alpha_coef[i] * y_hist[i][k];
    }
    if (h > 0) {
      double gamma = dot(s_hist[h - 1], y_hist[h - 1]) / dot(y_hist[h - 1], y_hist[h - 1]);
      for (double& v : q) v *= gamma;
    }
    for (int i = 0; i < h; ++i) {
      double beta = rho_hist[i] * dot(y_hist[i], q);
      for (std::size_t k = 0; k < n; ++k) q[k] += (alpha_coef[i] - beta) * s_hist[i][k];
    }
    for (double& v : q) v = -v;

    std::vector<double> x_new, g_new;
    double f_new;
    if (!ls.search(x, f, g, q, x_new, f_new, g_new)) {
      // try steepest descent once before giving up
      std::vector<double> sd(n);
      for (std::size_t k = 0; k < n; ++k) sd[k] = -g[k];
      if (!ls.search(x, f, g, sd, x_new, f_new, g_new)) break;
    }
    if (!std::isfinite(f_new)) {
      throw Error("non-finite loss at iteration " + std::to_string(iter + 1));
    }
    std::vector<double> s_vec(n), y_vec(n);
    for (std::size_t k = 0; k < n; ++k) {
      s_vec[k] = x_new[k] - x[k];
      y_vec[k] = g_new[k] - g[k];
    }
    double sy = dot(s_vec, y_vec);
    if (sy > 1e-12) {
      if (static_cast<int>(s_hist.size()) == m) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
    }
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    rep.loss_trace.push_back(f);
  }
  rep.iterations = iter;
  rep.final_loss = f;
  rep.final_grad_inf_norm = inf_norm(g);
  if (rep.final_grad_inf_norm < config.tolerance) rep.converged = true;
  unpack_params(x, model);
  log_info("crf training: " + std::to_string(batch.size()) + " sequences, " +
           std::to_string(model.feature_names.size()) + " features, " +
           std::to_string(rep.iterations) + " iterations" +
           (rep.converged ? " (converged)" : ""));
  return model;
}

std::vector<ConceptSpan> predict_concepts(const CrfModel& model, const Post& post,
                                          const LexiconSet& lexicons, int window) {
  std::vector<ConceptSpan> out;
  for (std::size_t si = 0; si < post.sentences.size(); ++si) {
    const Sentence& sentence = post.sentences[si];
    auto flags = token_flags(sentence, lexicons);
    auto features = featurize(sentence, flags, window);
    auto ids = lookup_features(model, features);
    std::vector<int> tags = viterbi(model, ids);
    for (const DecodedSpan& d : decode_bio(tags)) {
      ConceptSpan c;
      c.label = d.label;
      c.sentence_index = si;
      c.token_range = d.token_range;
      c.char_range = {sentence.tokens[d.token_range.begin].char_range.begin,
                      sentence.tokens[d.token_range.end - 1].char_range.end};
      c.text = post.text.substr(c.char_range.begin, c.char_range.size());
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> build_crf_training_data(
    const std::vector<AnnotatedPost>& posts, const LexiconSet& lexicons, int window) {
  std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> data;
  for (const AnnotatedPost& ap : posts) {
    for (std::size_t si = 0; si < ap.post.sentences.size(); ++si) {
      const Sentence& sentence = ap.post.sentences[si];
      if (sentence.tokens.empty()) continue;
      std::vector<ConceptSpan> here;
      for (const ConceptSpan& c : ap.gold_concepts) {
        if (c.sentence_index == si) here.push_back(c);
      }
      auto flags = token_flags(sentence, lexicons);
      data.emplace_back(featurize(sentence, flags, window),
                        encode_bio(here, sentence.tokens.size()));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void save_crf(const CrfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "crfmodel v1\n";
  out << "lambda " << model.regularization << "\n";
  out << "labels " << model.labels.size() << "\n";
  for (const std::string& l : model.labels) out << l << "\n";
  out << "features " << model.feature_names.size() << "\n";
  for (const std::string& f : model.feature_names) out << f << "\n";
  out << "emission\n";
  const int K = model.num_tags();
  for (std::size_t f = 0; f < model.feature_names.size(); ++f) {
    for (int k = 0; k < K; ++k) {
      out << model.emission_weights[f * K + k] << (k + 1 < K ? ' ' : '\n');
    }
  }
  out << "transition\n";
  for (int j = 0; j < K; ++j) {
    for (int k = 0; k < K; ++k) {
      out << model.transition_weights[static_cast<std::size_t>(j) * K + k]
          << (k + 1 < K ? ' ' : '\n');
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

CrfModel load_crf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open crf model '" + path + "'");
  std::string word;
  std::string version;
  in >> word >> version;
  if (word != "crfmodel" || version != "v1") throw ParseError("unrecognized crf model header");
  CrfModel model;
  std::size_t n = 0;
  in >> word >> model.regularization;
  if (word != "lambda") throw ParseError("expected lambda");
  in >> word >> n;
  if (word != "labels") throw ParseError("expected labels");
  in.ignore();
  model.labels.resize(n);
  for (std::string& l : model.labels) std::getline(in, l);
  in >> word >> n;
  if (word != "features") throw ParseError("expected features");
  in.ignore();
  model.feature_names.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, model.feature_names[i]);
    model.feature_index.emplace(model.feature_names[i], static_cast<int>(i));
  }
  in >> word;
  if (word != "emission") throw ParseError("expected emission block");
  const int K = model.num_tags();
  model.emission_weights.resize(n * K);
  for (double& v : model.emission_weights) in >> v;
  in >> word;
  if (word != "transition") throw ParseError("expected transition block");
  model.transition_weights.resize(static_cast<std::size_t>(K) * K);
  for (double& v : model.transition_weights) in >> v;
  if (!in) throw ParseError("truncated crf model file");
  return model;
}

}  // namespace covtriage
