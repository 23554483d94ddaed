#ifndef COVTRIAGE_CRF_HPP
#define COVTRIAGE_CRF_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "covtriage/corpus.hpp"
#include "covtriage/preprocess.hpp"

namespace covtriage {

/// BIO tag inventory over the six concept labels plus O. Index 0 is O so that
/// an untrained model decodes to the background tag.
std::vector<std::string> bio_tag_set();

constexpr int kNumTags = 13;

int bio_tag_index(const std::string& tag);

/// Encodes concept spans of one sentence as a BIO tag sequence.
std::vector<int> encode_bio(const std::vector<ConceptSpan>& sentence_spans,
                            std::size_t num_tokens);

/// Decodes a BIO tag sequence to spans. Orphan I-X (no preceding B-X/I-X of
/// the same label) is promoted to B-X.
struct DecodedSpan {
  ConceptLabel label;
  Span token_range;
};
std::vector<DecodedSpan> decode_bio(const std::vector<int>& tags);

/// Linear-chain CRF with string-keyed emission features and a dense tag
/// transition matrix.
struct CrfModel {
  std::vector<std::string> labels;                    // tag strings, O first
  std::unordered_map<std::string, int> feature_index; // feature -> row
  std::vector<std::string> feature_names;             // row -> feature
  std::vector<double> emission_weights;               // [num_features x num_tags]
  std::vector<double> transition_weights;             // [num_tags x num_tags]
  double regularization = 1.0;

  int num_tags() const { return static_cast<int>(labels.size()); }
  int num_features() const { return static_cast<int>(feature_names.size()); }
  double emission(int feature, int tag) const {
    return emission_weights[static_cast<std::size_t>(feature) * labels.size() + tag];
  }
  double transition(int from, int to) const {
    return transition_weights[static_cast<std::size_t>(from) * labels.size() + to];
  }
};

/// A training instance: per-token registered feature ids plus gold tags.
struct TaggedSequence {
  std::vector<std::vector<int>> features;  // feature ids per token
  std::vector<int> tags;
};

/// Converts string features to feature ids. When `grow` is set unseen
/// features are registered; otherwise they are dropped (open-vocabulary
/// test-time behavior).
std::vector<std::vector<int>> index_features(CrfModel& model,
                                             const std::vector<TokenFeatures>& features,
                                             bool grow);

/// Lookup-only variant for trained models; unknown features are dropped.
std::vector<std::vector<int>> lookup_features(const CrfModel& model,
                                              const std::vector<TokenFeatures>& features);

struct Marginals {
  double log_z = 0.0;
  std::vector<double> unary;     // [T x K]
  std::vector<double> pairwise;  // [(T-1) x K x K]
};

/// Forward-backward in log space. Unary rows sum to 1 and pairwise marginals
/// are consistent with the unaries.
Marginals log_partition_and_marginals(const CrfModel& model,
                                      const std::vector<std::vector<int>>& features);

/// Max-score decoding; ties resolve to the lowest tag index.
std::vector<int> viterbi(const CrfModel& model, const std::vector<std::vector<int>>& features);

/// Regularized negative log-likelihood and its gradient over a batch. The
/// gradient layout is emissions first (row-major) then transitions.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossGrad nll_and_gradient(const CrfModel& model, const std::vector<TaggedSequence>& batch);

struct CrfTrainConfig {
  double lambda = 1.0;
  int max_iterations = 200;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  int lbfgs_memory = 10;
};

struct CrfTrainReport {
  int iterations = 0;
  double final_loss = 0.0;
  double final_grad_inf_norm = 0.0;
  bool converged = false;
  std::vector<double> loss_trace;  // loss after each accepted step
};

/// Trains by limited-memory quasi-Newton minimization of the regularized NLL
/// with a strong-Wolfe line search. Deterministic for fixed input order.
CrfModel train_crf(const std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>>& data,
                   const CrfTrainConfig& config, CrfTrainReport* report = nullptr);

/// Tags every sentence of a post and decodes the BIO output to concept spans.
std::vector<ConceptSpan> predict_concepts(const CrfModel& model, const Post& post,
                                          const LexiconSet& lexicons,
                                          int window = kDefaultFeatureWindow);

/// Builds (features, gold tags) pairs for every sentence of every post.
std::vector<std::pair<std::vector<TokenFeatures>, std::vector<int>>> build_crf_training_data(
    const std::vector<AnnotatedPost>& posts, const LexiconSet& lexicons,
    int window = kDefaultFeatureWindow);

/// Versioned text serialization; load(save(m)) reproduces predictions exactly.
void save_crf(const CrfModel& model, const std::string& path);
CrfModel load_crf(const std::string& path);

}  // namespace covtriage

#endif
