#pragma once

#include <string>
#include <vector>

#include "bdpo/contour.hpp"
#include "bdpo/experiments.hpp"
#include "json.hpp"

namespace bdpo {

inline constexpr const char* kToolVersion = "0.1.0";

/// 17 significant digits; round-trips any finite double exactly.
std::string format_double(double value);

void write_trace_csv(const TrainingTrace& trace, const std::string& path);

/// Long-format `pw,pl,loss` rows (masked cells omitted).
void write_grid_csv(const ContourGrid& grid, const std::string& path);

/// Sidecar JSON with spec, reference point, axes, and the mask flag, so the
/// grid file is reconstructible without the generator.
nlohmann::json grid_sidecar(const ContourGrid& grid);

/// Minimal heatmap rendering with log-spaced level annotations.
void write_grid_svg(const ContourGrid& grid, const std::string& path);

nlohmann::json loss_spec_to_json(const LossSpec& spec);
LossSpec loss_spec_from_json(const nlohmann::json& doc);

nlohmann::json theorem1_report_to_json(const Theorem1Report& report);
nlohmann::json theorem2_report_to_json(const Theorem2Report& report);
nlohmann::json corollary1_report_to_json(const Corollary1Report& report);
nlohmann::json gradient_report_to_json(const GradientCheckReport& report);

/// Everything needed to reproduce a CLI run: command, resolved config,
/// seed, and the full list of files the command wrote.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<std::string> output_paths;
    std::string tool_version = kToolVersion;
    std::string timestamp_utc;
};

void write_manifest(const RunManifest& manifest, const std::string& path);
std::string utc_timestamp();

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace bdpo
