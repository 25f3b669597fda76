#include "aled/report_io.hpp"

#include "aled/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace aled {

namespace {

constexpr const char* kInfinity = "Infinity";

double finite_or_throw(double v, const char* field) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::kSerialization, std::string("non-finite value in field ") + field);
  }
  return v;
}

void reject_unknown_keys(const Json& json, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : json.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorKind::kFormat, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const Json& json, const char* key, T fallback) {
  if (!json.contains(key) || json.at(key).is_null()) return fallback;
  return json.at(key).get<T>();
}

}  // namespace

Json detector_config_to_json(const DetectorConfig& config) {
  Json mcd;
  mcd["support_fraction"] =
      config.mcd.support_fraction ? Json(*config.mcd.support_fraction) : Json(nullptr);
  mcd["n_initial_subsets"] = config.mcd.n_initial_subsets;
  mcd["n_best_carried"] = config.mcd.n_best_carried;
  mcd["max_c_steps"] = config.mcd.max_c_steps;

  Json json;
  json["reduced_dim"] = config.reduced_dim;
  json["random_directions"] = config.random_directions();
  json["ensembles"] = config.ensembles;
  json["tau"] = config.tau;
  json["seed"] = config.seed;
  if (config.priors) {
    json["priors"] = Json{{"given", config.priors->given}, {"alt", config.priors->alt}};
  } else {
    json["priors"] = "label_proportions";
  }
  json["mcd"] = std::move(mcd);
  json["log_lambda_ceiling"] = kLogLambdaCeiling;
  return json;
}

DetectorConfig detector_config_from_json(const Json& json) {
  if (!json.is_object()) throw Error(ErrorKind::kFormat, "detector config must be an object");
  reject_unknown_keys(json,
                      {"reduced_dim", "random_directions", "ensembles", "tau", "seed", "priors", "mcd",
                       "log_lambda_ceiling"},
                      "detector config");
  DetectorConfig config;
  try {
    config.reduced_dim = get_or(json, "reduced_dim", config.reduced_dim);
    config.ensembles = get_or(json, "ensembles", config.ensembles);
    config.tau = get_or(json, "tau", config.tau);
    config.seed = get_or(json, "seed", config.seed);
    if (json.contains("priors") && json.at("priors").is_object()) {
      config.priors = Priors{json.at("priors").at("given").get<double>(),
                             json.at("priors").at("alt").get<double>()};
    }
    if (json.contains("mcd")) {
      const Json& mcd = json.at("mcd");
      reject_unknown_keys(mcd, {"support_fraction", "n_initial_subsets", "n_best_carried", "max_c_steps"},
                          "mcd config");
      if (mcd.contains("support_fraction") && !mcd.at("support_fraction").is_null()) {
        config.mcd.support_fraction = mcd.at("support_fraction").get<double>();
      }
      config.mcd.n_initial_subsets = get_or(mcd, "n_initial_subsets", config.mcd.n_initial_subsets);
      config.mcd.n_best_carried = get_or(mcd, "n_best_carried", config.mcd.n_best_carried);
      config.mcd.max_c_steps = get_or(mcd, "max_c_steps", config.mcd.max_c_steps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad detector config: ") + e.what());
  }
  if (json.contains("random_directions") &&
      json.at("random_directions").get<int>() != config.random_directions()) {
    throw Error(ErrorKind::kFormat, "random_directions must equal reduced_dim - 1");
  }
  config.validate();
  return config;
}

Json report_to_json(const DetectionReport& report) {
  Json config = detector_config_to_json(report.config);
  config["sample_count"] = report.sample_count;
  config["feature_dim"] = report.feature_dim;
  config["failed_members"] = report.failed_members;

  Json samples = Json::array();
  for (const SampleResult& s : report.samples) {
    Json row;
    row["index"] = s.index;
    row["given_label"] = s.given_label;
    row["mean_likelihood_given"] = finite_or_throw(s.log_mean_given, "mean_likelihood_given");
    row["mean_likelihood_alt"] = finite_or_throw(s.log_mean_alt, "mean_likelihood_alt");
    if (s.lambda_overflow) {
      row["lambda"] = kInfinity;
    } else {
      row["lambda"] = finite_or_throw(s.lambda, "lambda");
    }
    row["flagged"] = s.flagged;
    row["posterior_mislabel"] = finite_or_throw(s.posterior_mislabel, "posterior_mislabel");
    samples.push_back(std::move(row));
  }

  Json json;
  json["config"] = std::move(config);
  json["samples"] = std::move(samples);
  json["flagged"] = report.flagged;
  json["corrected_labels"] = report.corrected_labels;
  return json;
}

std::string report_to_string(const DetectionReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

void write_report(const DetectionReport& report, const std::filesystem::path& path) {
  const std::string text = report_to_string(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

DetectionReport report_from_json(const Json& json) {
  DetectionReport report;
  try {
    const Json& config = json.at("config");
    Json detector = config;
    detector.erase("sample_count");
    detector.erase("feature_dim");
    detector.erase("failed_members");
    report.config = detector_config_from_json(detector);
    report.sample_count = config.at("sample_count").get<int>();
    report.feature_dim = config.at("feature_dim").get<int>();
    report.failed_members = config.at("failed_members").get<int>();

    for (const Json& row : json.at("samples")) {
      SampleResult s;
      s.index = row.at("index").get<int>();
      s.given_label = row.at("given_label").get<int>();
      s.log_mean_given = row.at("mean_likelihood_given").get<double>();
      s.log_mean_alt = row.at("mean_likelihood_alt").get<double>();
      const Json& lambda = row.at("lambda");
      if (lambda.is_string()) {
        if (lambda.get<std::string>() != kInfinity) throw Error(ErrorKind::kFormat, "bad lambda value");
        s.lambda = std::numeric_limits<double>::infinity();
        s.lambda_overflow = true;
      } else {
        s.lambda = lambda.get<double>();
      }
      s.flagged = row.at("flagged").get<bool>();
      s.posterior_mislabel = row.at("posterior_mislabel").get<double>();
      report.samples.push_back(s);
    }
    report.flagged = json.at("flagged").get<std::vector<int>>();
    if (json.contains("corrected_labels")) {
      report.corrected_labels = json.at("corrected_labels").get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("malformed report: ") + e.what());
  }
  if (report.samples.size() != static_cast<std::size_t>(report.sample_count)) {
    throw Error(ErrorKind::kFormat, "report sample_count does not match its samples");
  }
  return report;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

DetectionReport read_report(const std::filesystem::path& path) {
  return report_from_json(read_json_file(path));
}

}  // namespace aled
