#pragma once

// JSON documents: detection reports and the detector configuration block
// shared by reports and experiment configs.

#include "aled/detector.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace aled {

using Json = nlohmann::ordered_json;

Json detector_config_to_json(const DetectorConfig& config);

/// Missing keys keep their defaults. Unknown keys are rejected (kFormat).
DetectorConfig detector_config_from_json(const Json& json);

/// Field order is fixed. Throws kSerialization on any NaN, or an infinite
/// value other than an overflowed likelihood ratio.
Json report_to_json(const DetectionReport& report);
std::string report_to_string(const DetectionReport& report);

/// Writes report_to_string(report) to `path`; throws kIo if unwritable.
void write_report(const DetectionReport& report, const std::filesystem::path& path);

DetectionReport report_from_json(const Json& json);
DetectionReport read_report(const std::filesystem::path& path);

/// Parses a whole file as JSON; kIo if unreadable, kFormat if malformed.
Json read_json_file(const std::filesystem::path& path);

}  // namespace aled
