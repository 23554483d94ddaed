#ifndef COVTRIAGE_SYNTH_HPP
#define COVTRIAGE_SYNTH_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "covtriage/corpus.hpp"

namespace covtriage {

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int num_posts = 500;
  // Large enough that rare symptom phrases land in only one CV fold, so a
  // trained extractor stays good but imperfect on held-out posts.
  int symptom_pool_size = 160;
  // triage classes 1..3 and ratings 1..5; each array sums to 1
  std::array<double, 3> triage_fractions = {0.50, 0.40, 0.10};
  std::array<double, 5> rating_fractions = {0.15, 0.20, 0.30, 0.20, 0.15};
  double noise_rate = 0.1;  // distractor token/sentence rate
};

/// Template-based corpus generator. Posts carry gold concepts and relations
/// recorded exactly as constructed, and doctor answers derived from the
/// planted content by a fixed rule (with per-doctor perturbations emulating
/// disagreement), so downstream learners have learnable signal. Deterministic
/// for a fixed config.
std::vector<AnnotatedPost> generate_corpus(const GeneratorConfig& config);

/// Severity word -> scale value used by the generator; mirrors the shipped
/// severity lexicon (a test keeps the two in sync).
const std::vector<std::pair<std::string, double>>& generator_severity_scale();

}  // namespace covtriage

#endif
