// Brute-force reference implementations used by the test suites. These stay
// independent of the library's inference/solver code paths: enumeration for
// chain models, fine-grid search for SVM duals, pair scans for relations.
#ifndef COVTRIAGE_TESTS_ORACLES_HPP
#define COVTRIAGE_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "covtriage/crf.hpp"
#include "covtriage/relext.hpp"
#include "covtriage/svm.hpp"

namespace oracles {

/// Sums exp(path score) over all K^T paths in log space.
inline double enumerate_log_z(const covtriage::CrfModel& model,
                              const std::vector<std::vector<int>>& features) {
  const int K = model.num_tags();
  const int T = static_cast<int>(features.size());
  std::vector<int> path(T, 0);
  double max_score = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  std::function<void(int)> walk = [&](int t) {
    if (t == T) {
      double s = 0.0;
      for (int i = 0; i < T; ++i) {
        for (int f : features[i]) s += model.emission(f, path[i]);
        if (i > 0) s += model.transition(path[i - 1], path[i]);
      }
      scores.push_back(s);
      max_score = std::max(max_score, s);
      return;
    }
    for (int k = 0; k < K; ++k) {
      path[t] = k;
      walk(t + 1);
    }
  };
  walk(0);
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - max_score);
  return max_score + std::log(sum);
}

/// Best path score over all K^T paths.
inline double enumerate_best_score(const covtriage::CrfModel& model,
                                   const std::vector<std::vector<int>>& features) {
  const int K = model.num_tags();
  const int T = static_cast<int>(features.size());
  std::vector<int> path(T, 0);
  double best = -std::numeric_limits<double>::infinity();
  std::function<void(int)> walk = [&](int t) {
    if (t == T) {
      double s = 0.0;
      for (int i = 0; i < T; ++i) {
        for (int f : features[i]) s += model.emission(f, path[i]);
        if (i > 0) s += model.transition(path[i - 1], path[i]);
      }
      best = std::max(best, s);
      return;
    }
    for (int k = 0; k < K; ++k) {
      path[t] = k;
      walk(t + 1);
    }
  };
  walk(0);
  return best;
}

inline double path_score(const covtriage::CrfModel& model,
                         const std::vector<std::vector<int>>& features,
                         const std::vector<int>& path) {
  double s = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int f : features[i]) s += model.emission(f, path[i]);
    if (i > 0) s += model.transition(path[i - 1], path[i]);
  }
  return s;
}

/// Minimized C-SVC dual objective by two-stage grid search over the feasible
/// set (the last alpha is eliminated through the equality constraint).
inline double grid_svc_dual(const std::vector<std::vector<double>>& K,
                            const std::vector<int>& y, double C, int steps = 100) {
  const int n = static_cast<int>(y.size());
  auto objective = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) s += a[i] * a[j] * y[i] * y[j] * K[i][j];
    }
    double lin = 0.0;
    for (int i = 0; i < n; ++i) lin += a[i];
    return 0.5 * s - lin;
  };
  std::vector<double> lo(n - 1, 0.0), hi(n - 1, C);
  double best = std::numeric_limits<double>::infinity();
  for (int stage = 0; stage < 3; ++stage) {
    std::vector<double> best_free(n - 1, 0.0);
    std::vector<double> a(n, 0.0);
    std::vector<int> idx(n - 1, 0);
    bool done = false;
    while (!done) {
      double partial = 0.0;
      for (int i = 0; i < n - 1; ++i) {
        a[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / steps;
        partial += y[i] * a[i];
      }
      double last = -partial * y[n - 1];
      if (last >= -1e-12 && last <= C + 1e-12) {
        a[n - 1] = std::min(std::max(last, 0.0), C);
        double v = objective(a);
        if (v < best) {
          best = v;
          for (int i = 0; i < n - 1; ++i) best_free[i] = a[i];
        }
      }
      for (int i = 0;; ++i) {
        if (i == n - 1) {
          done = true;
          break;
        }
        if (++idx[i] <= steps) break;
        idx[i] = 0;
      }
    }
    // refine around the incumbent
    for (int i = 0; i < n - 1; ++i) {
      double width = (hi[i] - lo[i]) / steps;
      lo[i] = std::max(0.0, best_free[i] - 2.0 * width);
      hi[i] = std::min(C, best_free[i] + 2.0 * width);
    }
  }
  return best;
}

/// Minimized epsilon-SVR dual objective via beta = alpha - alpha* in
/// [-C, C]^n with sum(beta) = 0; exploits alpha_i * alpha_i* = 0 at optima.
inline double grid_svr_dual(const std::vector<std::vector<double>>& K,
                            const std::vector<double>& t, double C, double epsilon,
                            int steps = 100) {
  const int n = static_cast<int>(t.size());
  auto objective = [&](const std::vector<double>& b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) s += b[i] * b[j] * K[i][j];
    }
    double lin = 0.0;
    for (int i = 0; i < n; ++i) lin += epsilon * std::abs(b[i]) - t[i] * b[i];
    return 0.5 * s + lin;
  };
  std::vector<double> lo(n - 1, -C), hi(n - 1, C);
  double best = std::numeric_limits<double>::infinity();
  for (int stage = 0; stage < 3; ++stage) {
    std::vector<double> best_free(n - 1, 0.0);
    std::vector<double> b(n, 0.0);
    std::vector<int> idx(n - 1, 0);
    bool done = false;
    while (!done) {
      double partial = 0.0;
      for (int i = 0; i < n - 1; ++i) {
        b[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / steps;
        partial += b[i];
      }
      double last = -partial;
      if (last >= -C - 1e-12 && last <= C + 1e-12) {
        b[n - 1] = std::min(std::max(last, -C), C);
        double v = objective(b);
        if (v < best) {
          best = v;
          for (int i = 0; i < n - 1; ++i) best_free[i] = b[i];
        }
      }
      for (int i = 0;; ++i) {
        if (i == n - 1) {
          done = true;
          break;
        }
        if (++idx[i] <= steps) break;
        idx[i] = 0;
      }
    }
    for (int i = 0; i < n - 1; ++i) {
      double width = (hi[i] - lo[i]) / steps;
      lo[i] = std::max(-C, best_free[i] - 2.0 * width);
      hi[i] = std::min(C, best_free[i] + 2.0 * width);
    }
  }
  return best;
}

/// Independent token distance between two spans: counts non-stop tokens
/// strictly between the nearest edges by direct scan. Returns -1 when a
/// punctuation token blocks the pair.
inline int scan_distance(const covtriage::Sentence& sentence, const covtriage::ConceptSpan& a,
                         const covtriage::ConceptSpan& b, const covtriage::Lexicon& stop_words,
                         bool skip_stop_words) {
  std::size_t lo, hi;
  if (a.token_range.end <= b.token_range.begin) {
    lo = a.token_range.end;
    hi = b.token_range.begin;
  } else if (b.token_range.end <= a.token_range.begin) {
    lo = b.token_range.end;
    hi = a.token_range.begin;
  } else {
    return 0;
  }
  int d = 0;
  for (std::size_t i = lo; i < hi; ++i) {
    const std::string& surface = sentence.tokens[i].surface;
    bool word = false;
    for (unsigned char ch : surface) {
      if (std::isalnum(ch) != 0 || ch >= 0x80 || ch == '\'') word = true;
    }
    if (!word) return -1;  // punctuation ends the attachment scope
    std::string w = covtriage::to_lower(surface);
    if (skip_stop_words && stop_words.contains(w)) continue;
    ++d;
  }
  return d;
}

}  // namespace oracles

#endif
