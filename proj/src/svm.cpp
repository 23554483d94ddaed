#include "covtriage/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "covtriage/eval.hpp"

namespace covtriage {

namespace {

double dot_sparse(const PostVector& a, const PostVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.values.size() && j < b.values.size()) {
    if (a.values[i].first < b.values[j].first) {
      ++i;
    } else if (a.values[i].first > b.values[j].first) {
      ++j;
    } else {
      s += a.values[i].second * b.values[j].second;
      ++i;
      ++j;
    }
  }
  return s;
}

double dist2_sparse(const PostVector& a, const PostVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.values.size() || j < b.values.size()) {
    if (j >= b.values.size() ||
        (i < a.values.size() && a.values[i].first < b.values[j].first)) {
      s += a.values[i].second * a.values[i].second;
      ++i;
    } else if (i >= a.values.size() || b.values[j].first < a.values[i].first) {
      s += b.values[j].second * b.values[j].second;
      ++j;
    } else {
      double d = a.values[i].second - b.values[j].second;
      s += d * d;
      ++i;
      ++j;
    }
  }
  return s;
}

}  // namespace

double kernel(const PostVector& x, const PostVector& y, const KernelSpec& spec) {
  if (x.dimension != y.dimension) {
    throw Error("kernel dimension mismatch: " + std::to_string(x.dimension) + " vs " +
                std::to_string(y.dimension));
  }
  if (spec.kind == KernelSpec::Kind::Linear) return dot_sparse(x, y);
  return std::exp(-spec.gamma * dist2_sparse(x, y));
}

namespace {

/// Generic box-constrained QP with one equality constraint:
///   min 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_i <= C,  y_i in {-1,+1}.
/// Solved by repeatedly optimizing the maximal violating pair. The classifier
/// and the regressor both reduce to this form.
struct QpResult {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;
  double kkt_gap = 0.0;
  long iterations = 0;
};

class PairwiseQpSolver {
 public:
  PairwiseQpSolver(const std::vector<double>& p, const std::vector<signed char>& y, double C,
                   const std::vector<double>& Q)
      : n_(static_cast<int>(p.size())), p_(p), y_(y), C_(C), Q_(Q) {}

  QpResult solve(double tolerance, long max_iterations) {
    std::vector<double> a(n_, 0.0);
    std::vector<double> grad(p_);  // gradient of the dual at alpha = 0

    QpResult result;
    long iter = 0;
    for (; iter < max_iterations; ++iter) {
      // maximal violating pair (Keerthi et al. working-set selection)
      double g_max = -std::numeric_limits<double>::infinity();
      double g_min = std::numeric_limits<double>::infinity();
      int i = -1, j = -1;
      for (int t = 0; t < n_; ++t) {
        double v = -y_[t] * grad[t];
        bool in_up = (y_[t] > 0 && a[t] < C_) || (y_[t] < 0 && a[t] > 0.0);
        bool in_low = (y_[t] > 0 && a[t] > 0.0) || (y_[t] < 0 && a[t] < C_);
        if (in_up && v > g_max) {
          g_max = v;
          i = t;
        }
        if (in_low && v < g_min) {
          g_min = v;
          j = t;
        }
      }
      result.kkt_gap = g_max - g_min;
      if (i < 0 || j < 0 || result.kkt_gap < tolerance) break;

      // Two-variable subproblem along the feasible direction
      // a_i += y_i t,  a_j -= y_j t.
      double g_dir = y_[i] * grad[i] - y_[j] * grad[j];
      double quad = q(i, i) + q(j, j) - 2.0 * y_[i] * y_[j] * q(i, j);
      if (quad <= 0.0) quad = 1e-12;
      double t = -g_dir / quad;
      // clip to the box of both coordinates
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      if (y_[i] > 0) {
        lo = std::max(lo, -a[i]);
        hi = std::min(hi, C_ - a[i]);
      } else {
        lo = std::max(lo, a[i] - C_);
        hi = std::min(hi, a[i]);
      }
      if (y_[j] > 0) {
        lo = std::max(lo, a[j] - C_);
        hi = std::min(hi, a[j]);
      } else {
        lo = std::max(lo, -a[j]);
        hi = std::min(hi, C_ - a[j]);
      }
      t = std::clamp(t, lo, hi);
      if (t == 0.0) break;  // numerically stuck; gap is already tiny

      double delta_i = y_[i] * t;
      double delta_j = -y_[j] * t;
      a[i] += delta_i;
      a[j] += delta_j;
      for (int k = 0; k < n_; ++k) {
        grad[k] += q(k, i) * delta_i + q(k, j) * delta_j;
      }
    }

    result.iterations = iter;
    result.alpha = std::move(a);
    result.objective = objective(result.alpha, grad);
    result.rho = calculate_rho(result.alpha, grad);
    return result;
  }

 private:
  double q(int i, int j) const { return Q_[static_cast<std::size_t>(i) * n_ + j]; }

  double objective(const std::vector<double>& a, const std::vector<double>& grad) const {
    // 1/2 a'Qa + p'a  ==  1/2 (grad + p)'a  since grad = Qa + p
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += (grad[i] + p_[i]) * a[i];
    return 0.5 * s;
  }

  double calculate_rho(const std::vector<double>& a, const std::vector<double>& grad) const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int nr_free = 0;
    for (int i = 0; i < n_; ++i) {
      double yg = y_[i] * grad[i];
      if (a[i] >= C_) {
        if (y_[i] < 0) {
          ub = std::min(ub, yg);
        } else {
          lb = std::max(lb, yg);
        }
      } else if (a[i] <= 0.0) {
        if (y_[i] > 0) {
          ub = std::min(ub, yg);
        } else {
          lb = std::max(lb, yg);
        }
      } else {
        ++nr_free;
        sum_free += yg;
      }
    }
    if (nr_free > 0) return sum_free / nr_free;
    return (ub + lb) / 2.0;
  }

  int n_;
  std::vector<double> p_;
  std::vector<signed char> y_;
  double C_;
  const std::vector<double>& Q_;
};

std::vector<double> kernel_matrix(const std::vector<PostVector>& X, const KernelSpec& spec) {
  const std::size_t n = X.size();
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = kernel(X[i], X[j], spec);
      K[i * n + j] = v;
      K[j * n + i] = v;
    }
  }
  return K;
}

}  // namespace

SvmModel train_classifier(const std::vector<PostVector>& X, const std::vector<int>& y,
                          const SvmConfig& config) {
  if (X.empty() || X.size() != y.size()) throw Error("training set is empty or misaligned");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v > 0) has_pos = true;
    if (v < 0) has_neg = true;
    if (v == 0) throw Error("labels must be -1 or +1");
  }
  if (!has_pos || !has_neg) {
    throw Error("single-class input: the caller must handle this degenerate fold");
  }

  const int n = static_cast<int>(X.size());
  std::vector<double> K = kernel_matrix(X, config.kernel_spec);
  std::vector<double> Q(static_cast<std::size_t>(n) * n);
  std::vector<signed char> ys(n);
  for (int i = 0; i < n; ++i) ys[i] = y[i] > 0 ? 1 : -1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Q[static_cast<std::size_t>(i) * n + j] = ys[i] * ys[j] * K[static_cast<std::size_t>(i) * n + j];
    }
  }
  std::vector<double> p(n, -1.0);

  PairwiseQpSolver solver(p, ys, config.C, Q);
  QpResult r = solver.solve(config.tolerance, config.max_passes);

  SvmModel model;
  model.kernel_spec = config.kernel_spec;
  model.bias = -r.rho;
  model.dual_objective = r.objective;
  model.kkt_gap = r.kkt_gap;
  model.iterations = r.iterations;
  for (int i = 0; i < n; ++i) {
    if (r.alpha[i] > 0.0) {
      model.support_vectors.push_back(X[i]);
      model.dual_coefficients.push_back(ys[i] * r.alpha[i]);
    }
  }
  return model;
}

SvrModel train_regressor(const std::vector<PostVector>& X, const std::vector<double>& targets,
                         const SvmConfig& config) {
  if (X.empty()) throw Error("regression training set is empty");
  if (X.size() != targets.size()) throw Error("target vector misaligned with inputs");

  const int n = static_cast<int>(X.size());
  std::vector<double> K = kernel_matrix(X, config.kernel_spec);

  // 2n-variable form over (alpha, alpha*): y is +1 on the first block and -1
  // on the second; Q_ij = y_i y_j K(x_i', x_j').
  const int m = 2 * n;
  std::vector<double> Q(static_cast<std::size_t>(m) * m);
  std::vector<signed char> ys(m);
  std::vector<double> p(m);
  for (int i = 0; i < m; ++i) ys[i] = i < n ? 1 : -1;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      Q[static_cast<std::size_t>(i) * m + j] =
          ys[i] * ys[j] * K[static_cast<std::size_t>(i % n) * n + (j % n)];
    }
  }
  for (int i = 0; i < n; ++i) {
    p[i] = config.epsilon - targets[i];
    p[n + i] = config.epsilon + targets[i];
  }

  PairwiseQpSolver solver(p, ys, config.C, Q);
  QpResult r = solver.solve(config.tolerance, config.max_passes);

  SvrModel model;
  model.kernel_spec = config.kernel_spec;
  model.bias = -r.rho;
  model.dual_objective = r.objective;
  model.kkt_gap = r.kkt_gap;
  model.iterations = r.iterations;
  for (int i = 0; i < n; ++i) {
    double beta = r.alpha[i] - r.alpha[n + i];
    if (beta != 0.0) {
      model.support_vectors.push_back(X[i]);
      model.dual_coefficients.push_back(beta);
    }
  }
  return model;
}

double predict(const SvmModel& model, const PostVector& x) {
  double s = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    s += model.dual_coefficients[i] * kernel(model.support_vectors[i], x, model.kernel_spec);
  }
  return s;
}

std::vector<double> linear_weights(const SvmModel& model) {
  if (model.kernel_spec.kind != KernelSpec::Kind::Linear) {
    throw Error("linear_weights requires a linear-kernel model");
  }
  std::size_t dim = 0;
  for (const PostVector& sv : model.support_vectors) dim = std::max(dim, sv.dimension);
  std::vector<double> w(dim, 0.0);
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    for (const auto& [k, v] : model.support_vectors[i].values) {
      w[k] += model.dual_coefficients[i] * v;
    }
  }
  return w;
}

namespace {

std::vector<SvmConfig> expand_grid(const ParamGrid& grid, const SvmConfig& base) {
  std::vector<SvmConfig> out;
  std::vector<double> cs = grid.C.empty() ? std::vector<double>{base.C} : grid.C;
  std::vector<KernelSpec::Kind> kernels =
      grid.kernels.empty() ? std::vector<KernelSpec::Kind>{base.kernel_spec.kind} : grid.kernels;
  std::vector<double> eps = grid.epsilon.empty() ? std::vector<double>{base.epsilon} : grid.epsilon;
  for (double c : cs) {
    for (KernelSpec::Kind kind : kernels) {
      std::vector<double> gammas =
          kind == KernelSpec::Kind::RBF
              ? (grid.gamma.empty() ? std::vector<double>{base.kernel_spec.gamma} : grid.gamma)
              : std::vector<double>{base.kernel_spec.gamma};
      for (double g : gammas) {
        for (double e : eps) {
          SvmConfig cfg = base;
          cfg.C = c;
          cfg.kernel_spec.kind = kind;
          cfg.kernel_spec.gamma = g;
          cfg.epsilon = e;
          out.push_back(cfg);
        }
      }
    }
  }
  if (out.empty()) throw Error("parameter grid is empty");
  return out;
}

}  // namespace

GridSearchResult grid_search_classifier(const std::vector<PostVector>& X,
                                        const std::vector<int>& y, const ParamGrid& grid,
                                        int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("grid search requires folds >= 2");
  auto assignments = kfold(X.size(), folds, seed);
  SvmConfig base;
  base.seed = seed;
  std::vector<SvmConfig> configs = expand_grid(grid, base);

  GridSearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (const SvmConfig& cfg : configs) {
    double score_sum = 0.0;
    int scored = 0;
    for (const auto& [train_idx, test_idx] : assignments) {
      std::vector<PostVector> Xtr;
      std::vector<int> ytr;
      for (std::size_t i : train_idx) {
        Xtr.push_back(X[i]);
        ytr.push_back(y[i]);
      }
      bool pos = false, neg = false;
      for (int v : ytr) (v > 0 ? pos : neg) = true;
      if (!pos || !neg) {
        ++result.skipped_folds;
        continue;
      }
      SvmModel model = train_classifier(Xtr, ytr, cfg);
      int correct = 0;
      for (std::size_t i : test_idx) {
        int pred = predict(model, X[i]) >= 0.0 ? 1 : -1;
        if (pred == y[i]) ++correct;
      }
      score_sum += test_idx.empty() ? 0.0 : static_cast<double>(correct) / test_idx.size();
      ++scored;
    }
    double mean = scored > 0 ? score_sum / scored : -std::numeric_limits<double>::infinity();
    if (mean > best) {  // strict: ties keep the first config in grid order
      best = mean;
      result.best = cfg;
      result.best_score = mean;
    }
  }
  return result;
}

GridSearchResult grid_search_regressor(const std::vector<PostVector>& X,
                                       const std::vector<double>& targets, const ParamGrid& grid,
                                       int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("grid search requires folds >= 2");
  auto assignments = kfold(X.size(), folds, seed);
  SvmConfig base;
  base.seed = seed;
  std::vector<SvmConfig> configs = expand_grid(grid, base);

  GridSearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (const SvmConfig& cfg : configs) {
    double score_sum = 0.0;
    int scored = 0;
    for (const auto& [train_idx, test_idx] : assignments) {
      std::vector<PostVector> Xtr;
      std::vector<double> ttr;
      for (std::size_t i : train_idx) {
        Xtr.push_back(X[i]);
        ttr.push_back(targets[i]);
      }
      SvrModel model = train_regressor(Xtr, ttr, cfg);
      double mse = 0.0;
      for (std::size_t i : test_idx) {
        double d = predict(model, X[i]) - targets[i];
        mse += d * d;
      }
      if (!test_idx.empty()) mse /= test_idx.size();
      score_sum += -mse;
      ++scored;
    }
    double mean = scored > 0 ? score_sum / scored : -std::numeric_limits<double>::infinity();
    if (mean > best) {
      best = mean;
      result.best = cfg;
      result.best_score = mean;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void save_svm(const SvmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "svmmodel v1\n";
  out << "kernel " << (model.kernel_spec.kind == KernelSpec::Kind::Linear ? "linear" : "rbf")
      << " " << model.kernel_spec.gamma << "\n";
  out << "bias " << model.bias << "\n";
  out << "classes " << model.negative_class << " " << model.positive_class << "\n";
  out << "support_vectors " << model.support_vectors.size() << "\n";
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    const PostVector& sv = model.support_vectors[i];
    out << model.dual_coefficients[i] << " " << sv.dimension << " "
        << (sv.kind == VectorKind::SymptomOnly ? "symptom-only" : "symptom-modifier");
    for (const auto& [k, v] : sv.values) out << " " << k << ":" << v;
    out << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

SvmModel load_svm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open svm model '" + path + "'");
  std::string word, version;
  in >> word >> version;
  if (word != "svmmodel" || version != "v1") throw ParseError("unrecognized svm model header");
  SvmModel model;
  std::string kind;
  in >> word >> kind >> model.kernel_spec.gamma;
  if (word != "kernel") throw ParseError("expected kernel line");
  model.kernel_spec.kind = kind == "linear" ? KernelSpec::Kind::Linear : KernelSpec::Kind::RBF;
  in >> word >> model.bias;
  if (word != "bias") throw ParseError("expected bias line");
  in >> word >> model.negative_class >> model.positive_class;
  if (word != "classes") throw ParseError("expected classes line");
  std::size_t n = 0;
  in >> word >> n;
  if (word != "support_vectors") throw ParseError("expected support_vectors line");
  in.ignore();
  for (std::size_t i = 0; i < n; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("truncated svm model file");
    std::istringstream ls(line);
    double coef;
    PostVector sv;
    std::string kind_word;
    ls >> coef >> sv.dimension >> kind_word;
    sv.kind = kind_word == "symptom-only" ? VectorKind::SymptomOnly : VectorKind::SymptomModifier;
    std::string pair;
    while (ls >> pair) {
      std::size_t colon = pair.find(':');
      if (colon == std::string::npos) throw ParseError("malformed sparse entry '" + pair + "'");
      sv.values.emplace_back(std::stoul(pair.substr(0, colon)),
                             std::stod(pair.substr(colon + 1)));
    }
    model.dual_coefficients.push_back(coef);
    model.support_vectors.push_back(std::move(sv));
  }
  return model;
}

}  // namespace covtriage
