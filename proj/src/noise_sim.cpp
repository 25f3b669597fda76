#include "aled/noise_sim.hpp"

#include "aled/error.hpp"
#include "aled/gaussian.hpp"
#include "aled/random.hpp"
#include "aled/report_io.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace aled {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kProbeStream = 0x70726f6265ULL;  // "probe"

Eigen::VectorXd random_unit(Rng& rng, Eigen::Index p) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(p);
  do {
    for (Eigen::Index j = 0; j < p; ++j) u(j) = normal(rng);
  } while (u.squaredNorm() == 0.0);
  return u / u.norm();
}

// Lower factor of the class-0 covariance, scaled to unit average variance.
Eigen::MatrixXd class0_factor(CovKind kind, Eigen::Index p, Rng& rng) {
  switch (kind) {
    case CovKind::kIsotropic:
      return Eigen::MatrixXd::Identity(p, p);
    case CovKind::kDiagonalRandom: {
      std::uniform_real_distribution<double> spread(0.25, 1.75);
      Eigen::VectorXd variances(p);
      for (Eigen::Index j = 0; j < p; ++j) variances(j) = spread(rng);
      variances *= static_cast<double>(p) / variances.sum();
      return variances.cwiseSqrt().asDiagonal();
    }
    case CovKind::kFullRandom: {
      std::normal_distribution<double> normal;
      Eigen::MatrixXd a(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) a(i, j) = normal(rng);
      }
      Eigen::MatrixXd sigma = a.transpose() * a;
      sigma.diagonal().array() += 0.1;
      sigma *= static_cast<double>(p) / sigma.trace();
      return Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
    }
  }
  throw Error(ErrorKind::kShape, "unknown covariance kind");
}

}  // namespace

std::string to_string(CovKind kind) {
  switch (kind) {
    case CovKind::kIsotropic: return "isotropic";
    case CovKind::kDiagonalRandom: return "diagonal-random";
    case CovKind::kFullRandom: return "full-random";
  }
  return "isotropic";
}

CovKind cov_kind_from_string(const std::string& name) {
  if (name == "isotropic") return CovKind::kIsotropic;
  if (name == "diagonal-random") return CovKind::kDiagonalRandom;
  if (name == "full-random") return CovKind::kFullRandom;
  throw Error(ErrorKind::kFormat, "unknown cov_kind '" + name + "'");
}

void SynthSpec::validate() const {
  if (m < 4 || p < 1) throw Error(ErrorKind::kShape, "synthetic spec needs m >= 4 and p >= 1");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw Error(ErrorKind::kShape, "separation must be finite and >= 0");
  }
  if (!(cov_scale_ratio > 0.0)) throw Error(ErrorKind::kShape, "cov_scale_ratio must be positive");
  if (!(class_balance > 0.0 && class_balance < 1.0)) {
    throw Error(ErrorKind::kShape, "class_balance must lie in (0, 1)");
  }
  const long n1 = std::lround(class_balance * m);
  if (n1 < 2 || m - n1 < 2) throw Error(ErrorKind::kShape, "each class needs at least 2 samples");
}

SynthData synth_features(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Eigen::Index p = spec.p;
  const int n1 = static_cast<int>(std::lround(spec.class_balance * spec.m));
  const int n0 = spec.m - n1;

  const Eigen::VectorXd u = random_unit(rng, p);
  const Eigen::MatrixXd factor0 = class0_factor(spec.cov_kind, p, rng);
  const double root_beta = std::sqrt(spec.cov_scale_ratio);
  const double mean_std = 0.5 * (1.0 + root_beta);
  const Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd mean1 = spec.separation * mean_std * u;

  std::normal_distribution<double> normal;
  Eigen::MatrixXd noise(p, spec.m);
  for (Eigen::Index i = 0; i < noise.cols(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) noise(j, i) = normal(rng);
  }
  Eigen::MatrixXd x(spec.m, p);
  if (spec.cov_kind == CovKind::kIsotropic) {
    x = noise.transpose();
  } else {
    x = (factor0 * noise).transpose();
  }
  x.bottomRows(n1) *= root_beta;
  x.bottomRows(n1).rowwise() += mean1.transpose();

  std::vector<int> labels(static_cast<std::size_t>(spec.m), 0);
  std::fill(labels.begin() + n0, labels.end(), 1);
  return SynthData{FeatureMatrix(std::move(x)), LabelVector(std::move(labels)), mean0, mean1};
}

NoisyLabels inject_label_noise(const LabelVector& labels, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::kShape, "noise rate must lie in [0, 1)");
  const auto m = labels.size();
  const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(m)));
  if (flips >= m) throw Error(ErrorKind::kDegenerate, "noise rate would flip every label");

  std::vector<std::size_t> pool(m);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < flips; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<int> noisy = labels.values();
  std::vector<bool> mask(m, false);
  for (std::size_t i = 0; i < flips; ++i) {
    noisy[pool[i]] = 1 - noisy[pool[i]];
    mask[pool[i]] = true;
  }
  return {LabelVector(std::move(noisy)), std::move(mask)};
}

double linear_probe_accuracy(const SynthSpec& spec, int draws, double train_fraction) {
  if (draws < 1 || !(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::kShape, "probe needs draws >= 1 and train_fraction in (0, 1)");
  }
  double total = 0.0;
  for (int t = 0; t < draws; ++t) {
    SynthSpec draw = spec;
    draw.seed = derive_seed(derive_seed(spec.seed, kProbeStream), static_cast<std::uint64_t>(t));
    const SynthData data = synth_features(draw);
    const auto& x = data.features.data();

    std::vector<int> order(static_cast<std::size_t>(draw.m));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(draw.seed, 1));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * draw.m));

    Eigen::VectorXd sums[2] = {Eigen::VectorXd::Zero(x.cols()), Eigen::VectorXd::Zero(x.cols())};
    double counts[2] = {0.0, 0.0};
    for (std::size_t k = 0; k < n_train; ++k) {
      const int i = order[k];
      const int c = data.labels[static_cast<std::size_t>(i)];
      sums[c] += x.row(i).transpose();
      counts[c] += 1.0;
    }
    if (counts[0] < 1.0 || counts[1] < 1.0) throw Error(ErrorKind::kClass, "probe split lost a class");
    const Eigen::VectorXd means[2] = {sums[0] / counts[0], sums[1] / counts[1]};
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n_train), x.cols());
    for (std::size_t k = 0; k < n_train; ++k) {
      const int i = order[k];
      centered.row(static_cast<Eigen::Index>(k)) =
          x.row(i) - means[data.labels[static_cast<std::size_t>(i)]].transpose();
    }
    const Eigen::MatrixXd pooled =
        centered.transpose() * centered / (static_cast<double>(n_train) - 2.0);

    GaussianModel model0(means[0], pooled);
    GaussianModel model1(means[1], pooled);
    const double log_prior[2] = {std::log(counts[0] / static_cast<double>(n_train)),
                                 std::log(counts[1] / static_cast<double>(n_train))};
    long correct = 0;
    const auto n_test = order.size() - n_train;
    Eigen::MatrixXd test(static_cast<Eigen::Index>(n_test), x.cols());
    for (std::size_t k = 0; k < n_test; ++k) test.row(static_cast<Eigen::Index>(k)) = x.row(order[n_train + k]);
    const Eigen::VectorXd score0 = log_pdf_rows(model0, test).array() + log_prior[0];
    const Eigen::VectorXd score1 = log_pdf_rows(model1, test).array() + log_prior[1];
    for (std::size_t k = 0; k < n_test; ++k) {
      const int predicted = score1(static_cast<Eigen::Index>(k)) > score0(static_cast<Eigen::Index>(k)) ? 1 : 0;
      if (predicted == data.labels[static_cast<std::size_t>(order[n_train + k])]) ++correct;
    }
    total += static_cast<double>(correct) / static_cast<double>(n_test);
  }
  return total / draws;
}

Calibration calibrate_separation(SynthSpec spec, double target, int draws) {
  if (!(target > 0.5 && target < 1.0)) throw Error(ErrorKind::kShape, "probe target must lie in (0.5, 1)");
  auto accuracy_at = [&](double separation) {
    spec.separation = separation;
    return linear_probe_accuracy(spec, draws);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (accuracy_at(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 256.0) throw Error(ErrorKind::kDegenerate, "probe accuracy target is unreachable");
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (accuracy_at(mid) < target ? lo : hi) = mid;
  }
  const double separation = 0.5 * (lo + hi);
  return {separation, accuracy_at(separation)};
}

MeanSem mean_sem(const std::vector<double>& values) {
  MeanSem out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sem = std::sqrt(ss / (out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

TrialOutcome run_trial(const SynthSpec& spec, double noise_rate, const DetectorConfig& config, int trial) {
  TrialOutcome outcome;
  outcome.trial = trial;
  const std::uint64_t trial_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(trial));
  outcome.data_seed = derive_seed(trial_seed, 0);
  outcome.noise_seed = derive_seed(trial_seed, 1);
  outcome.detector_seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(trial)), 2);

  SynthSpec draw = spec;
  draw.seed = outcome.data_seed;
  const SynthData data = synth_features(draw);
  NoisyLabels noisy = inject_label_noise(data.labels, noise_rate, outcome.noise_seed);

  DetectorConfig detector = config;
  detector.seed = outcome.detector_seed;
  const DetectionReport report = detect(data.features, noisy.labels, detector);

  std::vector<bool> flags(report.samples.size());
  std::vector<double> posteriors(report.samples.size());
  for (std::size_t i = 0; i < flags.size(); ++i) {
    flags[i] = report.samples[i].flagged;
    posteriors[i] = report.samples[i].posterior_mislabel;
  }
  outcome.metrics = confusion_metrics(flags, noisy.flip_mask);
  if (std::find(noisy.flip_mask.begin(), noisy.flip_mask.end(), true) != noisy.flip_mask.end()) {
    outcome.metrics.auprc = auprc(posteriors, noisy.flip_mask);
  }
  outcome.flagged = static_cast<int>(report.flagged.size());
  outcome.flip_mask = std::move(noisy.flip_mask);
  return outcome;
}

TrialsSummary run_trials(const SynthSpec& spec, double noise_rate, const DetectorConfig& config,
                         int n_trials) {
  if (n_trials < 1) throw Error(ErrorKind::kShape, "need at least one trial");
  TrialsSummary summary;
  summary.noise_rate = noise_rate;
  summary.trials = n_trials;
  std::vector<double> sens, spec_, ppv, npv, f1, ap;
  for (int t = 0; t < n_trials; ++t) {
    TrialOutcome outcome = run_trial(spec, noise_rate, config, t);
    sens.push_back(outcome.metrics.sensitivity);
    spec_.push_back(outcome.metrics.specificity);
    ppv.push_back(outcome.metrics.ppv);
    npv.push_back(outcome.metrics.npv);
    f1.push_back(outcome.metrics.f1);
    if (outcome.metrics.auprc) ap.push_back(*outcome.metrics.auprc);
    summary.outcomes.push_back(std::move(outcome));
  }
  summary.sensitivity = mean_sem(sens);
  summary.specificity = mean_sem(spec_);
  summary.ppv = mean_sem(ppv);
  summary.npv = mean_sem(npv);
  summary.f1 = mean_sem(f1);
  summary.auprc = mean_sem(ap);
  return summary;
}

Json synth_spec_to_json(const SynthSpec& spec) {
  Json json;
  json["m"] = spec.m;
  json["p"] = spec.p;
  json["separation"] = spec.separation;
  json["cov_kind"] = to_string(spec.cov_kind);
  json["cov_scale_ratio"] = spec.cov_scale_ratio;
  json["class_balance"] = spec.class_balance;
  json["seed"] = spec.seed;
  return json;
}

ExperimentConfig experiment_config_from_json(const Json& json) {
  static const std::set<std::string> kTop = {"spec", "noise_rate", "detector", "trials"};
  static const std::set<std::string> kSpec = {"m", "p", "separation", "target_probe_accuracy", "cov_kind",
                                              "cov_scale_ratio", "class_balance", "seed"};
  if (!json.is_object()) throw Error(ErrorKind::kFormat, "experiment config must be an object");
  for (const auto& [key, value] : json.items()) {
    if (!kTop.contains(key)) throw Error(ErrorKind::kFormat, "unknown key '" + key + "' in experiment config");
  }
  ExperimentConfig config;
  try {
    if (json.contains("spec")) {
      const Json& s = json.at("spec");
      for (const auto& [key, value] : s.items()) {
        if (!kSpec.contains(key)) throw Error(ErrorKind::kFormat, "unknown key '" + key + "' in spec");
      }
      config.spec.m = s.value("m", config.spec.m);
      config.spec.p = s.value("p", config.spec.p);
      config.spec.separation = s.value("separation", config.spec.separation);
      if (s.contains("target_probe_accuracy")) {
        config.target_probe_accuracy = s.at("target_probe_accuracy").get<double>();
      }
      if (s.contains("cov_kind")) config.spec.cov_kind = cov_kind_from_string(s.at("cov_kind").get<std::string>());
      config.spec.cov_scale_ratio = s.value("cov_scale_ratio", config.spec.cov_scale_ratio);
      config.spec.class_balance = s.value("class_balance", config.spec.class_balance);
      config.spec.seed = s.value("seed", config.spec.seed);
    }
    if (json.contains("noise_rate")) {
      const Json& rate = json.at("noise_rate");
      config.noise_rates = rate.is_array() ? rate.get<std::vector<double>>()
                                           : std::vector<double>{rate.get<double>()};
    }
    if (json.contains("trials")) config.trials = json.at("trials").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad experiment config: ") + e.what());
  }
  if (json.contains("detector")) config.detector = detector_config_from_json(json.at("detector"));
  if (config.noise_rates.empty()) throw Error(ErrorKind::kFormat, "noise_rate list is empty");
  if (config.trials < 1) throw Error(ErrorKind::kFormat, "trials must be >= 1");
  for (double rate : config.noise_rates) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::kFormat, "noise rates must lie in [0, 1)");
  }
  config.spec.validate();
  config.detector.validate();
  return config;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.config = config;
  if (config.target_probe_accuracy) {
    const Calibration calibration = calibrate_separation(config.spec, *config.target_probe_accuracy);
    result.config.spec.separation = calibration.separation;
    result.probe_accuracy = calibration.probe_accuracy;
  }
  for (double rate : config.noise_rates) {
    result.rows.push_back(run_trials(result.config.spec, rate, config.detector, config.trials));
  }
  return result;
}

namespace {

Json mean_sem_json(const MeanSem& v) { return Json{{"mean", v.mean}, {"sem", v.sem}, {"n", v.n}}; }

}  // namespace

Json experiment_result_to_json(const ExperimentResult& result, bool per_trial) {
  Json config;
  config["spec"] = synth_spec_to_json(result.config.spec);
  config["target_probe_accuracy"] =
      result.config.target_probe_accuracy ? Json(*result.config.target_probe_accuracy) : Json(nullptr);
  config["probe_accuracy"] = result.probe_accuracy ? Json(*result.probe_accuracy) : Json(nullptr);
  config["noise_rates"] = result.config.noise_rates;
  config["detector"] = detector_config_to_json(result.config.detector);
  config["trials"] = result.config.trials;

  Json rows = Json::array();
  Json trials = Json::array();
  for (const TrialsSummary& row : result.rows) {
    Json r;
    r["noise_rate"] = row.noise_rate;
    r["trials"] = row.trials;
    r["sensitivity"] = mean_sem_json(row.sensitivity);
    r["specificity"] = mean_sem_json(row.specificity);
    r["ppv"] = mean_sem_json(row.ppv);
    r["npv"] = mean_sem_json(row.npv);
    r["f1"] = mean_sem_json(row.f1);
    r["auprc"] = mean_sem_json(row.auprc);
    rows.push_back(std::move(r));
    if (per_trial) {
      for (const TrialOutcome& o : row.outcomes) {
        Json t;
        t["noise_rate"] = row.noise_rate;
        t["trial"] = o.trial;
        t["data_seed"] = o.data_seed;
        t["noise_seed"] = o.noise_seed;
        t["detector_seed"] = o.detector_seed;
        t["flips"] = std::count(o.flip_mask.begin(), o.flip_mask.end(), true);
        t["flagged"] = o.flagged;
        t["metrics"] = metrics_to_json(o.metrics);
        trials.push_back(std::move(t));
      }
    }
  }

  Json json;
  json["config"] = std::move(config);
  json["rows"] = std::move(rows);
  if (per_trial) json["per_trial"] = std::move(trials);
  return json;
}

}  // namespace aled
