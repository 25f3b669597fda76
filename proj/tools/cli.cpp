#include "cli.hpp"

#include "aled/detector.hpp"
#include "aled/error.hpp"
#include "aled/evaluation.hpp"
#include "aled/noise_sim.hpp"
#include "aled/report_io.hpp"
#include "aled/tensor_io.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <optional>
#include <sstream>

namespace aled::cli {

namespace {

using Json = nlohmann::ordered_json;

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::kIo, "cannot write " + path);
  file << text;
  if (!file) throw Error(ErrorKind::kIo, "write failed for " + path);
}

Priors parse_priors(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorKind::kFormat, "--priors expects GIVEN,ALT");
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, comma);
    const std::string b = text.substr(comma + 1);
    Priors priors{std::stod(a, &used), 0.0};
    if (used != a.size()) throw std::invalid_argument(a);
    priors.alt = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    return priors;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::kFormat, "--priors expects two numbers, got '" + text + "'");
  }
}

std::vector<bool> load_mask(const std::string& path) {
  const LabelVector mask = load_labels(path);
  std::vector<bool> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] == 1;
  return out;
}

struct DetectArgs {
  std::string features;
  std::string labels;
  int dim = 2;
  int ensembles = 10;
  double tau = 2.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string priors;
  std::optional<double> support_fraction;
};

int cmd_detect(const DetectArgs& args, std::ostream& out, std::ostream& err) {
  DetectorConfig config;
  config.reduced_dim = args.dim;
  config.ensembles = args.ensembles;
  config.tau = args.tau;
  config.seed = args.seed;
  config.mcd.support_fraction = args.support_fraction;
  if (!args.priors.empty()) config.priors = parse_priors(args.priors);
  config.validate();

  const FeatureTensor features = load_feature_file(args.features);
  const LabelVector labels = load_labels(args.labels);
  const DetectionReport report = detect(features, labels, config);
  emit(report_to_string(report), args.out, out);
  err << "detect: " << report.flagged.size() << " of " << report.sample_count
      << " samples flagged (d=" << config.reduced_dim << ", k=" << config.ensembles
      << ", tau=" << config.tau << ", seed=" << config.seed << ")\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string report;
  std::string truth;
  std::string out;
  bool sweep = false;
  std::vector<double> sweep_taus{1, 2, 5, 10, 20, 50};
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  const DetectionReport report = read_report(args.report);
  const std::vector<bool> truth = load_mask(args.truth);
  if (truth.size() != report.samples.size()) {
    throw Error(ErrorKind::kShape, "truth mask has " + std::to_string(truth.size()) +
                                       " entries, report has " + std::to_string(report.samples.size()));
  }
  std::vector<bool> flags;
  std::vector<double> posteriors;
  std::vector<double> lambdas;
  for (const SampleResult& s : report.samples) {
    flags.push_back(s.flagged);
    posteriors.push_back(s.posterior_mislabel);
    lambdas.push_back(s.lambda);
  }
  MetricsSummary metrics = confusion_metrics(flags, truth);
  metrics.auprc = auprc(posteriors, truth);

  Json config;
  config["command"] = "evaluate";
  config["report"] = args.report;
  config["truth"] = args.truth;
  config["threshold_sweep"] = args.sweep;
  config["sweep_taus"] = args.sweep_taus;
  config["detector"] = detector_config_to_json(report.config);

  Json json;
  json["config"] = std::move(config);
  json["metrics"] = metrics_to_json(metrics);
  if (args.sweep) {
    Json rows = Json::array();
    for (const SweepRow& row : threshold_sweep(lambdas, truth, args.sweep_taus)) {
      rows.push_back(Json{{"tau", row.tau}, {"sensitivity", row.sensitivity}, {"ppv", row.ppv}, {"f1", row.f1}});
    }
    json["threshold_sweep"] = std::move(rows);
  }
  emit(json.dump(2) + "\n", args.out, out);
  err << "evaluate: sensitivity=" << metrics.sensitivity << " ppv=" << metrics.ppv
      << " f1=" << metrics.f1 << " auprc=" << *metrics.auprc << "\n";
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  std::string out;
  bool per_trial = false;
  CLI::Option* trials = nullptr;
  CLI::Option* m = nullptr;
  CLI::Option* p = nullptr;
  CLI::Option* separation = nullptr;
  CLI::Option* target = nullptr;
  CLI::Option* cov_kind = nullptr;
  CLI::Option* beta = nullptr;
  CLI::Option* balance = nullptr;
  CLI::Option* spec_seed = nullptr;
  CLI::Option* noise_rates = nullptr;
  CLI::Option* dim = nullptr;
  CLI::Option* ensembles = nullptr;
  CLI::Option* tau = nullptr;
  CLI::Option* seed = nullptr;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig config =
      args.config.empty() ? experiment_config_from_json(Json::object())
                          : experiment_config_from_json(read_json_file(args.config));
  // Inline flags override the config file.
  if (*args.trials) config.trials = args.trials->as<int>();
  if (*args.m) config.spec.m = args.m->as<int>();
  if (*args.p) config.spec.p = args.p->as<int>();
  if (*args.separation) {
    config.spec.separation = args.separation->as<double>();
    config.target_probe_accuracy.reset();
  }
  if (*args.target) config.target_probe_accuracy = args.target->as<double>();
  if (*args.cov_kind) config.spec.cov_kind = cov_kind_from_string(args.cov_kind->as<std::string>());
  if (*args.beta) config.spec.cov_scale_ratio = args.beta->as<double>();
  if (*args.balance) config.spec.class_balance = args.balance->as<double>();
  if (*args.spec_seed) config.spec.seed = args.spec_seed->as<std::uint64_t>();
  if (*args.noise_rates) config.noise_rates = args.noise_rates->as<std::vector<double>>();
  if (*args.dim) config.detector.reduced_dim = args.dim->as<int>();
  if (*args.ensembles) config.detector.ensembles = args.ensembles->as<int>();
  if (*args.tau) config.detector.tau = args.tau->as<double>();
  if (*args.seed) config.detector.seed = args.seed->as<std::uint64_t>();
  if (config.trials < 1) throw Error(ErrorKind::kFormat, "--trials must be >= 1");
  config.spec.validate();
  config.detector.validate();

  const ExperimentResult result = run_experiment(config);
  emit(experiment_result_to_json(result, args.per_trial).dump(2) + "\n", args.out, out);
  for (const TrialsSummary& row : result.rows) {
    err << "simulate: noise=" << row.noise_rate << " sensitivity=" << row.sensitivity.mean << " ppv="
        << row.ppv.mean << " f1=" << row.f1.mean << " (" << row.trials << " trials)\n";
  }
  return kExitOk;
}

int cmd_pool(const std::string& in, const std::string& out_path, std::ostream& err) {
  const FeatureTensor tensor = load_feature_file(in);
  const auto* maps = std::get_if<FeatureMapStack>(&tensor);
  if (maps == nullptr) throw Error(ErrorKind::kShape, "pool expects a rank-4 tensor");
  const FeatureMatrix pooled = average_pool(*maps);
  store_feature_file(pooled, out_path);
  err << "pool: " << maps->samples() << "x" << maps->channels() << "x" << maps->spatial() << "x"
      << maps->spatial() << " -> " << pooled.samples() << "x" << pooled.dim() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-error detection from feature embeddings", "aled"};
  app.require_subcommand(1);

  DetectArgs detect_args;
  auto* detect_cmd = app.add_subcommand("detect", "Flag likely label errors");
  detect_cmd->add_option("--features", detect_args.features, "Rank-2 or rank-4 feature file")->required();
  detect_cmd->add_option("--labels", detect_args.labels, "Label file (CSV or NPY)")->required();
  detect_cmd->add_option("--dim", detect_args.dim, "Reduced dimension d (1 + random directions)")
      ->capture_default_str();
  detect_cmd->add_option("--ensembles", detect_args.ensembles, "Ensemble size k")->capture_default_str();
  detect_cmd->add_option("--tau", detect_args.tau, "Likelihood-ratio threshold")->capture_default_str();
  detect_cmd->add_option("--seed", detect_args.seed, "Root seed")->capture_default_str();
  detect_cmd->add_option("--out", detect_args.out, "Report path (default stdout)");
  detect_cmd->add_option("--priors", detect_args.priors, "Fixed priors GIVEN,ALT");
  detect_cmd->add_option("--support-fraction", detect_args.support_fraction, "MCD support fraction");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a report against a mislabel mask");
  eval_cmd->add_option("--report", eval_args.report, "Detection report JSON")->required();
  eval_cmd->add_option("--truth", eval_args.truth, "Mislabel mask (1 = mislabeled)")->required();
  eval_cmd->add_option("--out", eval_args.out, "Metrics path (default stdout)");
  eval_cmd->add_flag("--threshold-sweep", eval_args.sweep, "Emit (tau, sensitivity, ppv, f1) rows");
  eval_cmd->add_option("--sweep-taus", eval_args.sweep_taus, "Thresholds for the sweep")->delimiter(',');

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Run synthetic detection experiments");
  sim_cmd->add_option("--config", sim_args.config, "Experiment config JSON");
  sim_cmd->add_option("--out", sim_args.out, "Results path (default stdout)");
  sim_cmd->add_flag("--per-trial", sim_args.per_trial, "Include per-trial metrics");
  sim_args.trials = sim_cmd->add_option("--trials", "Trials per noise rate");
  sim_args.m = sim_cmd->add_option("--m", "Sample count");
  sim_args.p = sim_cmd->add_option("--p", "Feature dimension");
  sim_args.separation = sim_cmd->add_option("--separation", "Class separation (within-class stds)");
  sim_args.target = sim_cmd->add_option("--target-probe-accuracy", "Calibrate separation to this accuracy");
  sim_args.cov_kind = sim_cmd->add_option("--cov-kind", "isotropic | diagonal-random | full-random");
  sim_args.beta = sim_cmd->add_option("--beta", "Class-1 covariance scale");
  sim_args.balance = sim_cmd->add_option("--class-balance", "Fraction of class 1");
  sim_args.spec_seed = sim_cmd->add_option("--data-seed", "Synthetic data root seed");
  sim_args.noise_rates = sim_cmd->add_option("--noise-rate", "Noise rate(s)")->delimiter(',');
  sim_args.dim = sim_cmd->add_option("--dim", "Reduced dimension d");
  sim_args.ensembles = sim_cmd->add_option("--ensembles", "Ensemble size k");
  sim_args.tau = sim_cmd->add_option("--tau", "Likelihood-ratio threshold");
  sim_args.seed = sim_cmd->add_option("--seed", "Detector root seed");

  std::string pool_in;
  std::string pool_out;
  auto* pool_cmd = app.add_subcommand("pool", "Average-pool a rank-4 tensor file");
  pool_cmd->add_option("--in", pool_in, "Rank-4 tensor file")->required();
  pool_cmd->add_option("--out", pool_out, "Output rank-2 NPY file")->required();

  std::vector<std::string> argv_storage{"aled"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    if (*detect_cmd) return cmd_detect(detect_args, out, err);
    if (*eval_cmd) return cmd_evaluate(eval_args, out, err);
    if (*sim_cmd) return cmd_simulate(sim_args, out, err);
    if (*pool_cmd) return cmd_pool(pool_in, pool_out, err);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return is_numerical(e.kind()) ? kExitNumerical : kExitInput;
  } catch (const CLI::ConversionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace aled::cli
