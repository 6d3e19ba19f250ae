#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "stvs/core.hpp"

namespace stvs::io {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kDatasetFormatName = "stvs-dataset";

/// `<data>.header.json` next to the JSONL file.
std::filesystem::path header_path(const std::filesystem::path& data_path);

nlohmann::json instance_to_json(const core::TimeSeriesInstance& inst);
core::TimeSeriesInstance instance_from_json(const nlohmann::json& j);

nlohmann::json header_to_json(const core::DatasetMeta& meta);
core::DatasetMeta header_from_json(const nlohmann::json& j);

nlohmann::json norm_stats_to_json(const core::NormStats& s);
core::NormStats norm_stats_from_json(const nlohmann::json& j);

/// One compact JSON object per line, trailing newline after each.
std::string to_jsonl(const core::Dataset& ds);

void write_dataset(const core::Dataset& ds, const std::filesystem::path& path);
core::Dataset read_dataset(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stvs::io
