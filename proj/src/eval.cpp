#include "covtriage/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "covtriage/log.hpp"
#include "covtriage/rng.hpp"

namespace covtriage {

ConfusionTable::ConfusionTable(std::vector<std::string> classes)
    : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {
  if (classes_.empty()) throw Error("confusion table requires at least one class");
}

std::size_t ConfusionTable::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i] == name) return i;
  }
  throw Error("unknown class '" + name + "'");
}

void ConfusionTable::add(const std::string& truth, const std::string& predicted, long count) {
  add_index(class_index(truth), class_index(predicted), count);
}

void ConfusionTable::add_index(std::size_t truth, std::size_t predicted, long count) {
  if (truth >= classes_.size() || predicted >= classes_.size()) {
    throw Error("class index out of range");
  }
  counts_[truth * classes_.size() + predicted] += count;
}

long ConfusionTable::count(std::size_t truth, std::size_t predicted) const {
  return counts_[truth * classes_.size() + predicted];
}

long ConfusionTable::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0L);
}

long ConfusionTable::true_positives(std::size_t c) const { return count(c, c); }

long ConfusionTable::false_positives(std::size_t c) const {
  long s = 0;
  for (std::size_t t = 0; t < classes_.size(); ++t) {
    if (t != c) s += count(t, c);
  }
  return s;
}

long ConfusionTable::false_negatives(std::size_t c) const {
  long s = 0;
  for (std::size_t p = 0; p < classes_.size(); ++p) {
    if (p != c) s += count(c, p);
  }
  return s;
}

long ConfusionTable::support(std::size_t c) const {
  long s = 0;
  for (std::size_t p = 0; p < classes_.size(); ++p) s += count(c, p);
  return s;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

Prf prf_from_counts(long tp, long fp, long fn) {
  Prf out;
  out.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  out.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  out.f1 = safe_div(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

}  // namespace

Prf prf(const ConfusionTable& table, std::size_t cls) {
  if (cls >= table.num_classes()) throw Error("class index out of range");
  return prf_from_counts(table.true_positives(cls), table.false_positives(cls),
                         table.false_negatives(cls));
}

Prf prf(const ConfusionTable& table, const std::string& cls) {
  return prf(table, table.class_index(cls));
}

double macro_f1(const ConfusionTable& table) {
  if (table.total() == 0) throw Error("cannot average an empty confusion table");
  double s = 0.0;
  for (std::size_t c = 0; c < table.num_classes(); ++c) s += prf(table, c).f1;
  return s / static_cast<double>(table.num_classes());
}

double micro_f1(const ConfusionTable& table) {
  if (table.total() == 0) throw Error("cannot average an empty confusion table");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < table.num_classes(); ++c) {
    tp += table.true_positives(c);
    fp += table.false_positives(c);
    fn += table.false_negatives(c);
  }
  return prf_from_counts(tp, fp, fn).f1;
}

double observed_agreement(const AgreementTable& table) {
  long total = table.total();
  if (total == 0) throw Error("agreement table is empty");
  long trace = 0;
  for (std::size_t c = 0; c < table.num_classes(); ++c) trace += table.count(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double cohens_kappa(const AgreementTable& table) {
  const double total = static_cast<double>(table.total());
  if (total == 0.0) throw Error("agreement table is empty");
  double po = observed_agreement(table);
  double pe = 0.0;
  for (std::size_t c = 0; c < table.num_classes(); ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t k = 0; k < table.num_classes(); ++k) {
      row += static_cast<double>(table.count(c, k));
      col += static_cast<double>(table.count(k, c));
    }
    pe += (row / total) * (col / total);
  }
  if (pe >= 1.0) {
    log_warn("kappa chance agreement is 1; returning " + std::string(po == 1.0 ? "1" : "0"));
    return po == 1.0 ? 1.0 : 0.0;
  }
  return (po - pe) / (1.0 - pe);
}

double gwet_ac1(const AgreementTable& table) {
  const double total = static_cast<double>(table.total());
  if (total == 0.0) throw Error("agreement table is empty");
  const std::size_t k = table.num_classes();
  if (k < 2) throw Error("AC1 requires at least 2 categories");
  double po = observed_agreement(table);
  double p_gamma = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(table.count(c, j));
      col += static_cast<double>(table.count(j, c));
    }
    double pi = 0.5 * (row + col) / total;
    p_gamma += pi * (1.0 - pi);
  }
  p_gamma /= static_cast<double>(k - 1);
  if (p_gamma >= 1.0) throw Error("AC1 chance agreement reached 1");
  return (po - p_gamma) / (1.0 - p_gamma);
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold(
    std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw Error("kfold requires k >= 2");
  if (static_cast<std::size_t>(k) > n) throw Error("kfold requires n >= k");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds;
  std::size_t base = n / static_cast<std::size_t>(k);
  std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t start = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    std::vector<std::size_t> test(order.begin() + start, order.begin() + start + size);
    std::vector<std::size_t> train;
    train.reserve(n - size);
    train.insert(train.end(), order.begin(), order.begin() + start);
    train.insert(train.end(), order.begin() + start + size, order.end());
    folds.emplace_back(std::move(train), std::move(test));
    start += size;
  }
  return folds;
}

std::vector<std::pair<std::string, double>> support_ratio(const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error("support_ratio requires a nonempty label list");
  std::map<std::string, long> counts;
  for (const std::string& l : labels) ++counts[l];
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [cls, c] : counts) {
    out.emplace_back(cls, static_cast<double>(c) / static_cast<double>(labels.size()));
  }
  return out;
}

}  // namespace covtriage
