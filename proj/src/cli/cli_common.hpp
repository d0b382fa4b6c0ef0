#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include <spdlog/spdlog.h>

#include "camo/error.hpp"
#include "camo/metrics.hpp"

namespace camo::cli {

/// Writes text verbatim (LF line endings, no locale conversion).
void write_text(const std::filesystem::path& path, const std::string& text);

/// Creates out_dir (and parents) if needed; throws std::invalid_argument when unset.
std::filesystem::path require_out_dir(const std::filesystem::path& out_dir, const char* command);

/// RFC 4180 quoting when the field contains a comma, quote or newline.
std::string csv_field(const std::string& text);

std::string csv_metric_header();
/// clip,frames,s_alpha,...; metrics with six decimals.
std::string csv_metric_row(const std::string& label, const MetricReport& r);

/// Runs body, mapping exceptions onto exit codes and logging them.
template <typename Body>
int guarded(const char* command, Body&& body) {
    try {
        return std::forward<Body>(body)();
    } catch (const MissingDataError& e) {
        spdlog::error("{}: {}", command, e.what());
        for (const auto& m : e.missing()) spdlog::error("  missing: {}", m);
        return static_cast<int>(ExitCode::kMissingData);
    } catch (const SchemaError& e) {
        spdlog::error("{}: schema error: {}", command, e.what());
        return static_cast<int>(ExitCode::kConfig);
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}: {}", command, e.what());
        return static_cast<int>(ExitCode::kConfig);
    } catch (const std::exception& e) {
        spdlog::error("{}: {}", command, e.what());
        return static_cast<int>(ExitCode::kConfig);
    }
}

}  // namespace camo::cli
