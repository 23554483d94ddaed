#ifndef COVTRIAGE_SVM_HPP
#define COVTRIAGE_SVM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "covtriage/vectorize.hpp"

namespace covtriage {

struct KernelSpec {
  enum class Kind { Linear, RBF };
  Kind kind = Kind::RBF;
  double gamma = 0.01;  // RBF only
};

double kernel(const PostVector& x, const PostVector& y, const KernelSpec& spec);

struct SvmConfig {
  double C = 10.0;
  KernelSpec kernel_spec;   // default RBF, gamma 0.01
  double epsilon = 0.5;     // SVR tube half-width
  double tolerance = 1e-3;  // KKT stopping gap
  long max_passes = 10'000'000;
  std::uint64_t seed = 0;   // fold shuffling; the solve itself is deterministic
};

/// Kernelized dual solution. For classification dual_coefficients hold
/// y_i * alpha_i; for regression they hold alpha_i - alpha_i*.
struct SvmModel {
  std::vector<PostVector> support_vectors;
  std::vector<double> dual_coefficients;
  double bias = 0.0;
  KernelSpec kernel_spec;
  std::string negative_class = "-1";
  std::string positive_class = "+1";

  // solver diagnostics
  double dual_objective = 0.0;  // value of the minimized dual
  double kkt_gap = 0.0;         // max violating pair gap at termination
  long iterations = 0;
};

using SvrModel = SvmModel;

/// Soft-margin C-SVC via a maximal-violating-pair decomposition solver.
/// Throws when the labels contain a single class.
SvmModel train_classifier(const std::vector<PostVector>& X, const std::vector<int>& y,
                          const SvmConfig& config);

/// Epsilon-insensitive SVR over targets in [0,1] (or any reals).
SvrModel train_regressor(const std::vector<PostVector>& X, const std::vector<double>& targets,
                         const SvmConfig& config);

/// Decision value / regression estimate: sum_i coef_i K(sv_i, x) + bias.
double predict(const SvmModel& model, const PostVector& x);

/// Explicit weight vector of a linear-kernel model: w = sum_i coef_i sv_i.
std::vector<double> linear_weights(const SvmModel& model);

struct ParamGrid {
  std::vector<double> C;
  std::vector<double> gamma;    // used only for RBF entries
  std::vector<double> epsilon;  // used only by the SVR search
  std::vector<KernelSpec::Kind> kernels;
};

struct GridSearchResult {
  SvmConfig best;
  double best_score = 0.0;
  int skipped_folds = 0;  // (config, fold) pairs dropped for having one class
};

/// Exhaustive grid evaluation by seeded k-fold cross-validation; ties keep
/// the first configuration in grid order. Classification scores accuracy.
GridSearchResult grid_search_classifier(const std::vector<PostVector>& X,
                                        const std::vector<int>& y, const ParamGrid& grid,
                                        int folds, std::uint64_t seed);

/// SVR variant scoring negative mean squared error.
GridSearchResult grid_search_regressor(const std::vector<PostVector>& X,
                                       const std::vector<double>& targets, const ParamGrid& grid,
                                       int folds, std::uint64_t seed);

void save_svm(const SvmModel& model, const std::string& path);
SvmModel load_svm(const std::string& path);

}  // namespace covtriage

#endif
