#pragma once

#include <string>

#include "gasf/pipeline.hpp"

namespace gasf {

inline constexpr int kModelSchemaVersion = 1;

// Self-describing JSON model file: scaler, named/shaped neural tensors, tree
// node arrays, pipeline metadata and a config echo. Doubles round-trip
// bit-exactly. Writes are atomic (temp file + rename).
void save_model(const ForecastModel& model, const std::string& path,
                const std::string& config_echo_json = "{}");

ForecastModel load_model(const std::string& path);

// Atomic text-file write used by every command that emits reports.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace gasf
