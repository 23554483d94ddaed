// covtriage: an end-to-end pipeline that mines symptom mentions from
// patient-authored posts, links severity/duration/body-part/negation
// modifiers, encodes posts as fixed-length vectors and trains SVM/SVR models
// for triage and COVID diagnosis.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "covtriage/clinic.hpp"
#include "covtriage/corpus.hpp"
#include "covtriage/crf.hpp"
#include "covtriage/eval.hpp"
#include "covtriage/pipeline.hpp"
#include "covtriage/relext.hpp"
#include "covtriage/svm.hpp"
#include "covtriage/synth.hpp"
#include "covtriage/vectorize.hpp"

namespace {

using namespace covtriage;

std::vector<double> parse_fractions(const std::string& csv, std::size_t expected,
                                    const char* what) {
  std::vector<double> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  if (out.size() != expected) {
    throw Error(std::string(what) + " must list " + std::to_string(expected) + " fractions");
  }
  return out;
}

VectorKind parse_vector_kind(const std::string& s) {
  if (s == "symptom-only") return VectorKind::SymptomOnly;
  if (s == "symptom-modifier") return VectorKind::SymptomModifier;
  throw Error("unknown vector kind '" + s + "'");
}

Regime parse_regime(const std::string& s) {
  if (s == "gold") return Regime::GroundTruth;
  if (s == "predicted") return Regime::Predicted;
  throw Error("unknown regime '" + s + "'");
}

KernelSpec::Kind parse_kernel(const std::string& s) {
  if (s == "linear") return KernelSpec::Kind::Linear;
  if (s == "rbf") return KernelSpec::Kind::RBF;
  throw Error("unknown kernel '" + s + "'");
}

struct CommonOpts {
  std::string corpus;
  std::string lexicons = "data/lexicons";
  std::string out;
  std::uint64_t seed = 7;
  int folds = 3;
  std::string vector_kind = "symptom-modifier";
  std::string regime = "gold";
  int max_distance = 5;
  bool skip_stop_words = true;
  std::string kernel = "rbf";
  double C = 10.0;
  double gamma = 0.01;
  double epsilon = 0.1;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool needs_corpus = true) {
  if (needs_corpus) {
    cmd->add_option("--corpus", opts.corpus, "corpus file (one JSON record per line)")
        ->required();
  }
  cmd->add_option("--lexicons", opts.lexicons, "lexicon directory");
  cmd->add_option("--seed", opts.seed, "master random seed");
  cmd->add_option("--folds", opts.folds, "cross-validation folds");
  cmd->add_option("--vector", opts.vector_kind, "symptom-only|symptom-modifier");
  cmd->add_option("--regime", opts.regime, "gold|predicted");
  cmd->add_option("--max-distance", opts.max_distance, "relation window in tokens");
  cmd->add_flag("--skip-stop-words,!--no-skip-stop-words", opts.skip_stop_words,
                "exclude stop words from relation distances");
  cmd->add_option("--kernel", opts.kernel, "linear|rbf");
  cmd->add_option("--C", opts.C, "SVM penalty");
  cmd->add_option("--gamma", opts.gamma, "RBF kernel width");
  cmd->add_option("--epsilon", opts.epsilon, "SVR tube half-width");
}

PipelineConfig to_pipeline_config(const CommonOpts& opts) {
  PipelineConfig config;
  config.corpus_path = opts.corpus;
  config.lexicon_dir = opts.lexicons;
  config.output_dir = opts.out;
  config.seed = opts.seed;
  config.folds = opts.folds;
  config.vector_kind = parse_vector_kind(opts.vector_kind);
  config.regime = parse_regime(opts.regime);
  config.max_distance = opts.max_distance;
  config.skip_stop_words = opts.skip_stop_words;
  config.svm.C = opts.C;
  config.svm.kernel_spec.kind = parse_kernel(opts.kernel);
  config.svm.kernel_spec.gamma = opts.gamma;
  config.svm.epsilon = opts.epsilon;
  config.svm.seed = opts.seed;
  config.crf.seed = opts.seed;
  return config;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int cmd_synth(const CommonOpts& opts, const GeneratorConfig& gen) {
  std::vector<AnnotatedPost> posts = generate_corpus(gen);
  save_corpus(posts, opts.out);
  std::cout << "wrote " << posts.size() << " posts to " << opts.out << "\n";
  return 0;
}

int cmd_train_crf(const CommonOpts& opts, const CrfTrainConfig& crf_config, int window) {
  auto posts = load_corpus(opts.corpus);
  auto lexicons = load_lexicon_set(opts.lexicons);
  CrfTrainReport report;
  CrfModel model = train_crf(build_crf_training_data(posts, lexicons, window), crf_config,
                             &report);
  save_crf(model, opts.out);
  std::cout << "trained crf on " << posts.size() << " posts: " << report.iterations
            << " iterations, final loss " << fmt4(report.final_loss) << ", grad "
            << fmt4(report.final_grad_inf_norm) << (report.converged ? " (converged)" : "")
            << "\n";
  return 0;
}

int cmd_extract(const CommonOpts& opts, const std::string& model_path) {
  auto posts = load_corpus(opts.corpus);
  auto lexicons = load_lexicon_set(opts.lexicons);
  CrfModel model = load_crf(model_path);
  PipelineConfig config = to_pipeline_config(opts);
  predict_annotations(posts, model, lexicons, make_relation_config(config, lexicons),
                      lexicons.severity);
  save_corpus(posts, opts.out);
  std::cout << "annotated " << posts.size() << " posts into " << opts.out << "\n";
  return 0;
}

int cmd_vectorize(const CommonOpts& opts) {
  auto posts = load_corpus(opts.corpus);
  Vocabularies vocabs = build_vocabularies(posts);
  VectorKind kind = parse_vector_kind(opts.vector_kind);
  Regime regime = parse_regime(opts.regime);
  std::ostringstream out;
  for (const AnnotatedPost& ap : posts) {
    PostVector v = make_vector(ap, vocabs, kind, regime);
    out << ap.post.id << '\t' << v.dimension << '\t' << to_sparse_row(v) << "\n";
  }
  atomic_write(opts.out, out.str());
  std::cout << "wrote " << posts.size() << " vectors (|symptoms|=" << vocabs.symptoms.size()
            << ", |body parts|=" << vocabs.body_parts.size() << ") to " << opts.out << "\n";
  return 0;
}

const ModelSpec& find_spec(const std::string& name) {
  static const std::vector<ModelSpec> specs = all_triage_specs();
  for (const ModelSpec& spec : specs) {
    if (spec.name() == name) return spec;
  }
  throw Error("unknown model spec '" + name + "' (use names like A, AB(R-a), ABC(R-t))");
}

int cmd_train_triage(const CommonOpts& opts, const std::string& spec_name) {
  auto posts = load_corpus(opts.corpus);
  const ModelSpec& spec = find_spec(spec_name);
  Vocabularies vocabs = build_vocabularies(posts);
  VectorKind kind = parse_vector_kind(opts.vector_kind);
  Regime regime = parse_regime(opts.regime);
  PipelineConfig config = to_pipeline_config(opts);

  std::vector<PostVector> X;
  std::vector<TriageClass> labels;
  for (const AnnotatedPost& ap : posts) {
    if (!ap.labeled()) continue;
    X.push_back(make_vector(ap, vocabs, kind, regime));
    labels.push_back(aggregate_triage(ap.answers, spec));
  }
  if (X.empty()) throw Error("corpus '" + opts.corpus + "' contains no labeled posts");
  HierarchicalTriageModel model = train_triage(X, labels, config.svm);
  save_svm(model.classifier1, opts.out + ".stage1.svm");
  if (model.classifier2) save_svm(*model.classifier2, opts.out + ".stage2.svm");
  std::cout << "trained triage model " << spec.name() << " on " << X.size() << " posts"
            << (model.degenerate ? " (degenerate: no second stage)" : "") << "\n";
  return 0;
}

int cmd_train_diagnosis(const CommonOpts& opts, const std::string& combo_str) {
  auto posts = load_corpus(opts.corpus);
  std::vector<DoctorId> combo;
  for (char c : combo_str) {
    switch (c) {
      case 'A': combo.push_back(DoctorId::A); break;
      case 'B': combo.push_back(DoctorId::B); break;
      case 'C': combo.push_back(DoctorId::C); break;
      default: throw Error("doctor combination must name only A, B and C");
    }
  }
  Vocabularies vocabs = build_vocabularies(posts);
  VectorKind kind = parse_vector_kind(opts.vector_kind);
  Regime regime = parse_regime(opts.regime);
  PipelineConfig config = to_pipeline_config(opts);

  std::vector<PostVector> X;
  std::vector<double> targets;
  for (const AnnotatedPost& ap : posts) {
    if (!ap.labeled()) continue;
    X.push_back(make_vector(ap, vocabs, kind, regime));
    targets.push_back(combine_gtp(ap.answers, combo));
  }
  if (X.empty()) throw Error("corpus '" + opts.corpus + "' contains no labeled posts");
  SvrModel model = train_regressor(X, targets, config.svm);
  save_svm(model, opts.out);
  std::cout << "trained diagnosis model " << combo_name(combo) << " on " << X.size()
            << " posts\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts) {
  auto posts = load_corpus(opts.corpus);
  auto lexicons = load_lexicon_set(opts.lexicons);
  PipelineConfig config = to_pipeline_config(opts);
  EvaluateResult result = run_evaluate(posts, lexicons, config);
  std::ostringstream out;
  out << "section,label_or_distance,stop_words,precision,recall,f1,support\n";
  for (const ConceptEvalRow& row : result.concept_rows) {
    out << "concepts," << row.label << ",," << fmt4(row.precision) << ',' << fmt4(row.recall)
        << ',' << fmt4(row.f1) << ',' << row.support << "\n";
  }
  for (const RelationSweepRow& row : result.relation_rows) {
    out << "relations," << row.distance << ',' << (row.skip_stop_words ? "without" : "with")
        << ',' << fmt4(row.score.precision) << ',' << fmt4(row.score.recall) << ','
        << fmt4(row.score.f1) << ',' << row.score.gold << "\n";
  }
  if (opts.out.empty()) {
    std::cout << out.str();
  } else {
    atomic_write(opts.out, out.str());
    std::cout << "wrote evaluation to " << opts.out << "\n";
  }
  return 0;
}

int cmd_agreement(const CommonOpts& opts) {
  auto posts = load_corpus(opts.corpus);
  std::ostringstream out;
  out << "question,pair,po,kappa,ac1\n";
  for (const AgreementRow& row : agreement_rows(posts)) {
    out << row.question << ',' << row.pair << ',' << fmt4(row.po) << ',' << fmt4(row.kappa)
        << ',' << fmt4(row.ac1) << "\n";
  }
  if (opts.out.empty()) {
    std::cout << out.str();
  } else {
    atomic_write(opts.out, out.str());
    std::cout << "wrote agreement table to " << opts.out << "\n";
  }
  return 0;
}

int cmd_importance(const CommonOpts& opts) {
  auto posts = load_corpus(opts.corpus);
  Vocabularies vocabs = build_vocabularies(posts);
  PipelineConfig config = to_pipeline_config(opts);
  config.svm.kernel_spec.kind = KernelSpec::Kind::Linear;
  std::vector<FeatureImportance> ranked = feature_importance(posts, vocabs.symptoms, config.svm);
  std::ostringstream out;
  out << "symptom,weight\n";
  for (const FeatureImportance& fi : ranked) {
    out << fi.symptom << ',' << fmt4(fi.weight) << "\n";
  }
  if (opts.out.empty()) {
    std::cout << out.str();
  } else {
    atomic_write(opts.out, out.str());
    std::cout << "wrote feature importance to " << opts.out << "\n";
  }
  return 0;
}

int cmd_report(const CommonOpts& opts) {
  auto posts = load_corpus(opts.corpus);
  auto lexicons = load_lexicon_set(opts.lexicons);
  PipelineConfig config = to_pipeline_config(opts);
  ExperimentResult result = write_report(posts, lexicons, config);
  std::cout << "crf token macro-F1 " << fmt4(result.crf_token_macro_f1) << ", relation F1 "
            << fmt4(result.relext_on_gold.f1) << "\n";
  std::cout << "wrote triage.csv, triage_classes.csv, diagnosis.csv, agreement.csv, "
               "importance.csv to "
            << config.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symptom extraction, triage and diagnosis pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override it");

  CommonOpts opts;
  GeneratorConfig gen;
  CrfTrainConfig crf_config;
  int window = kDefaultFeatureWindow;
  std::string model_path, spec_name, combo;
  std::string triage_fracs, rating_fracs;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("--seed", gen.seed, "generator seed");
  synth->add_option("--num-posts", gen.num_posts, "number of posts");
  synth->add_option("--pool-size", gen.symptom_pool_size, "distinct symptom phrases");
  synth->add_option("--noise-rate", gen.noise_rate, "distractor token rate");
  synth->add_option("--triage-fractions", triage_fracs, "comma list, e.g. 0.5,0.4,0.1");
  synth->add_option("--rating-fractions", rating_fracs, "comma list of five fractions");
  synth->add_option("--out", opts.out, "output corpus file")->required();

  CLI::App* train_crf_cmd = app.add_subcommand("train-crf", "train the concept extractor");
  add_common_flags(train_crf_cmd, opts);
  train_crf_cmd->add_option("--out", opts.out, "model output file")->required();
  train_crf_cmd->add_option("--lambda", crf_config.lambda, "L2 regularization");
  train_crf_cmd->add_option("--max-iterations", crf_config.max_iterations, "optimizer cap");
  train_crf_cmd->add_option("--tolerance", crf_config.tolerance, "gradient stop threshold");
  train_crf_cmd->add_option("--window", window, "feature context window");

  CLI::App* extract = app.add_subcommand("extract", "tag concepts and relations with a model");
  add_common_flags(extract, opts);
  extract->add_option("--model", model_path, "trained crf model")->required();
  extract->add_option("--out", opts.out, "output corpus with predictions")->required();

  CLI::App* vectorize = app.add_subcommand("vectorize", "export post vectors");
  add_common_flags(vectorize, opts);
  vectorize->add_option("--out", opts.out, "output vector file")->required();

  CLI::App* train_triage_cmd = app.add_subcommand("train-triage", "train one hierarchical model");
  add_common_flags(train_triage_cmd, opts);
  train_triage_cmd->add_option("--spec", spec_name, "model spec, e.g. AB(R-a)")->required();
  train_triage_cmd->add_option("--out", opts.out, "output model prefix")->required();

  CLI::App* train_diag = app.add_subcommand("train-diagnosis", "train one SVR model");
  add_common_flags(train_diag, opts);
  train_diag->add_option("--doctors", combo, "doctor combination, e.g. AB")->required();
  train_diag->add_option("--out", opts.out, "output model file")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "CV concept metrics and relation sweep");
  add_common_flags(evaluate, opts);
  evaluate->add_option("--out", opts.out, "output csv (stdout when omitted)");

  CLI::App* agreement = app.add_subcommand("agreement", "inter-annotator agreement table");
  add_common_flags(agreement, opts);
  agreement->add_option("--out", opts.out, "output csv (stdout when omitted)");

  CLI::App* importance = app.add_subcommand("importance", "linear-kernel feature importance");
  add_common_flags(importance, opts);
  importance->add_option("--out", opts.out, "output csv (stdout when omitted)");

  CLI::App* report = app.add_subcommand("report", "full two-regime experiment with CSV reports");
  add_common_flags(report, opts);
  report->add_option("--out", opts.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (*synth) {
      if (!triage_fracs.empty()) {
        auto f = parse_fractions(triage_fracs, 3, "--triage-fractions");
        std::copy(f.begin(), f.end(), gen.triage_fractions.begin());
      }
      if (!rating_fracs.empty()) {
        auto f = parse_fractions(rating_fracs, 5, "--rating-fractions");
        std::copy(f.begin(), f.end(), gen.rating_fractions.begin());
      }
      return cmd_synth(opts, gen);
    }
    if (*train_crf_cmd) return cmd_train_crf(opts, crf_config, window);
    if (*extract) return cmd_extract(opts, model_path);
    if (*vectorize) return cmd_vectorize(opts);
    if (*train_triage_cmd) return cmd_train_triage(opts, spec_name);
    if (*train_diag) return cmd_train_diagnosis(opts, combo);
    if (*evaluate) return cmd_evaluate(opts);
    if (*agreement) return cmd_agreement(opts);
    if (*importance) return cmd_importance(opts);
    if (*report) return cmd_report(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
