#ifndef COVTRIAGE_EVAL_HPP
#define COVTRIAGE_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "covtriage/error.hpp"

namespace covtriage {

/// Square confusion table: counts[true][predicted].
class ConfusionTable {
 public:
  explicit ConfusionTable(std::vector<std::string> classes);

  void add(const std::string& truth, const std::string& predicted, long count = 1);
  void add_index(std::size_t truth, std::size_t predicted, long count = 1);

  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t class_index(const std::string& name) const;
  long count(std::size_t truth, std::size_t predicted) const;
  long total() const;
  long true_positives(std::size_t c) const;
  long false_positives(std::size_t c) const;
  long false_negatives(std::size_t c) const;
  long support(std::size_t c) const;  // row sum: instances whose truth is c

 private:
  std::vector<std::string> classes_;
  std::vector<long> counts_;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class precision/recall/F1 with the 0/0 := 0 convention.
Prf prf(const ConfusionTable& table, const std::string& cls);
Prf prf(const ConfusionTable& table, std::size_t cls);

/// Unweighted mean of per-class F1.
double macro_f1(const ConfusionTable& table);

/// F1 of pooled TP/FP/FN; equals accuracy for single-label tables.
double micro_f1(const ConfusionTable& table);

/// Rater-vs-rater contingency table: counts[rater1][rater2].
using AgreementTable = ConfusionTable;

/// Proportion of observed agreement: trace over total.
double observed_agreement(const AgreementTable& table);

/// Cohen's kappa with product-of-marginals chance agreement. At p_e = 1 the
/// statistic is defined as 1 when p_o = 1 and 0 otherwise (with a warning).
double cohens_kappa(const AgreementTable& table);

/// Gwet's AC1: chance agreement (1/(K-1)) * sum_k pi_k (1 - pi_k) where pi_k
/// averages the two raters' marginal proportions.
double gwet_ac1(const AgreementTable& table);

/// Seeded shuffle, then a contiguous partition into k folds whose sizes
/// differ by at most one. Returns (train, test) index pairs.
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold(
    std::size_t n, int k, std::uint64_t seed);

/// Class frequencies normalized to fractions summing to 1.
std::vector<std::pair<std::string, double>> support_ratio(const std::vector<std::string>& labels);

}  // namespace covtriage

#endif
