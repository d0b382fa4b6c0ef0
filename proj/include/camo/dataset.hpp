#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "camo/metrics.hpp"

namespace camo {

/// Scenario tags used for attribute-sliced evaluation.
enum class Attribute { kLdm, kCM, kOcc, kMObj, kHunt, kTObj };
inline constexpr std::array<Attribute, 6> kAllAttributes = {
    Attribute::kLdm, Attribute::kCM, Attribute::kOcc, Attribute::kMObj, Attribute::kHunt,
    Attribute::kTObj};

std::string_view to_string(Attribute a) noexcept;
std::optional<Attribute> parse_attribute(std::string_view name) noexcept;

enum class Split { kTrain, kTest };
std::string_view to_string(Split s) noexcept;

struct ClipManifest {
    std::string clip_id;
    std::vector<std::filesystem::path> frame_paths;
    std::vector<std::filesystem::path> gt_paths;
    std::vector<Attribute> attributes;  // sorted, unique
    Split split = Split::kTest;

    std::size_t length() const noexcept { return frame_paths.size(); }
    bool has(Attribute a) const noexcept;
};

inline constexpr std::string_view kManifestSchema = "yuv-manifest/1";

// Manifest document:
//   {
//     "schema": "yuv-manifest/1",
//     "root":   "optional base directory, relative to the manifest file",
//     "clips": [
//       { "clip_id": "...", "split": "train" | "test",
//         "attributes": ["Ldm", "CM", "Occ", "M-Obj", "Hunt", "T-Obj"],
//         "frames": ["rel/or/abs/path.png", ...],
//         "gts":    ["...", ...] }
//     ]
//   }
// Relative paths resolve against root (or the manifest's directory).

/// Validates the document; throws SchemaError naming the offending field.
/// When check_files is set, every referenced file must exist, otherwise
/// MissingDataError lists all absent paths.
std::vector<ClipManifest> parse_manifest(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir,
                                         bool check_files = true);
std::vector<ClipManifest> load_manifest(const std::filesystem::path& path);

inline constexpr std::size_t kWindowLength = 5;
inline constexpr std::array<double, 3> kWindowScales = {0.5, 1.0, 1.5};

struct WindowSample {
    std::string clip_id;
    std::size_t start_index = 0;
    std::array<std::filesystem::path, kWindowLength> frames;
    std::array<double, 3> scales = kWindowScales;
};

/// Windows of five consecutive frames starting at 0, stride, 2 * stride, ...
/// Throws std::invalid_argument for clips shorter than five frames or stride 0.
std::vector<WindowSample> make_windows(const ClipManifest& clip, std::size_t stride);
std::size_t window_count(std::size_t length, std::size_t stride);

/// Binary mask (0 / 1) of one frame.
struct GtMask {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<std::uint8_t> values;
};

/// 8-bit mask file, foreground where the pixel value exceeds 128.
GtMask load_gt_mask(const std::filesystem::path& path);
/// 8-bit prediction file mapped to [0, 1] by v / 255.
std::vector<double> load_prediction(const std::filesystem::path& path, std::size_t* h,
                                    std::size_t* w);

enum class DensityNorm { kMaxOne, kSumOne };
std::string_view to_string(DensityNorm n) noexcept;
DensityNorm parse_density_norm(std::string_view text);

struct DensityMap {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> grid;
    DensityNorm normalization = DensityNorm::kMaxOne;
    std::size_t source_frames = 0;
    bool degenerate = false;  // nothing accumulated; grid is all zeros
};

/// Unnormalized occupancy: each mask is resized bilinearly to (out_h, out_w),
/// binarized at >= 0.5 and added.
std::vector<double> accumulate_density(std::span<const GtMask> gts, std::size_t out_h,
                                       std::size_t out_w);

DensityMap normalize_density(std::vector<double> accumulation, std::size_t out_h,
                             std::size_t out_w, DensityNorm norm, std::size_t source_frames);

/// Throws std::invalid_argument on an empty list.
DensityMap density_map(std::span<const GtMask> gts, std::size_t out_h, std::size_t out_w,
                       DensityNorm norm = DensityNorm::kMaxOne);

struct AttributeRow {
    Attribute attribute;
    MetricReport report;
    std::size_t clip_count = 0;
};

struct AttributeTable {
    std::vector<AttributeRow> rows;    // in kAllAttributes order
    std::vector<std::string> notices;  // one per omitted attribute
};

/// Clip-level macro average of the reports of every clip carrying each
/// attribute. Throws SchemaError when a report names a clip that is not in
/// the manifests.
AttributeTable attribute_report(std::span<const ClipManifest> manifests,
                                const std::map<std::string, MetricReport>& per_clip);

}  // namespace camo
