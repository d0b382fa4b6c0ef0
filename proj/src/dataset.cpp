#include "camo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "camo/error.hpp"
#include "camo/image_io.hpp"
#include "camo/tensor.hpp"

namespace camo {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Attribute a) noexcept {
    switch (a) {
        case Attribute::kLdm: return "Ldm";
        case Attribute::kCM: return "CM";
        case Attribute::kOcc: return "Occ";
        case Attribute::kMObj: return "M-Obj";
        case Attribute::kHunt: return "Hunt";
        case Attribute::kTObj: return "T-Obj";
    }
    return "?";
}

std::optional<Attribute> parse_attribute(std::string_view name) noexcept {
    for (Attribute a : kAllAttributes) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

std::string_view to_string(Split s) noexcept { return s == Split::kTrain ? "train" : "test"; }

bool ClipManifest::has(Attribute a) const noexcept {
    return std::find(attributes.begin(), attributes.end(), a) != attributes.end();
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaError(fmt::format("{}.{}: required field missing", where, key));
    }
    return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) throw SchemaError(fmt::format("{}.{}: expected a string", where, key));
    return v.get<std::string>();
}

std::vector<fs::path> path_list(const json& obj, const char* key, const std::string& where,
                                const fs::path& base) {
    const json& v = require(obj, key, where);
    if (!v.is_array()) throw SchemaError(fmt::format("{}.{}: expected an array", where, key));
    std::vector<fs::path> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) {
            throw SchemaError(fmt::format("{}.{}[{}]: expected a path string", where, key, i));
        }
        fs::path p = v[i].get<std::string>();
        out.push_back(p.is_absolute() ? p : base / p);
    }
    return out;
}

}  // namespace

std::vector<ClipManifest> parse_manifest(const json& doc, const fs::path& base_dir,
                                         bool check_files) {
    if (!doc.is_object()) throw SchemaError("manifest: top level must be an object");
    const std::string schema = require_string(doc, "schema", "manifest");
    if (schema != kManifestSchema) {
        throw SchemaError(fmt::format("manifest.schema: expected \"{}\", got \"{}\"",
                                      kManifestSchema, schema));
    }
    fs::path base = base_dir;
    if (doc.contains("root")) {
        if (!doc["root"].is_string()) throw SchemaError("manifest.root: expected a string");
        const fs::path root = doc["root"].get<std::string>();
        base = root.is_absolute() ? root : base_dir / root;
    }
    const json& clips = require(doc, "clips", "manifest");
    if (!clips.is_array()) throw SchemaError("manifest.clips: expected an array");

    std::vector<ClipManifest> out;
    std::set<std::string> seen;
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const std::string where = fmt::format("manifest.clips[{}]", i);
        const json& c = clips[i];
        ClipManifest clip;
        clip.clip_id = require_string(c, "clip_id", where);
        if (clip.clip_id.empty()) throw SchemaError(fmt::format("{}.clip_id: empty", where));
        if (!seen.insert(clip.clip_id).second) {
            throw SchemaError(fmt::format("{}.clip_id: duplicate clip_id \"{}\"", where, clip.clip_id));
        }
        const std::string split = require_string(c, "split", where);
        if (split == "train") {
            clip.split = Split::kTrain;
        } else if (split == "test") {
            clip.split = Split::kTest;
        } else {
            throw SchemaError(fmt::format("{}.split: expected \"train\" or \"test\", got \"{}\"",
                                          where, split));
        }
        if (c.contains("attributes")) {
            const json& attrs = c["attributes"];
            if (!attrs.is_array()) throw SchemaError(fmt::format("{}.attributes: expected an array", where));
            for (std::size_t k = 0; k < attrs.size(); ++k) {
                const std::string name = attrs[k].is_string() ? attrs[k].get<std::string>() : "";
                const auto a = parse_attribute(name);
                if (!a) {
                    throw SchemaError(fmt::format(
                        "{}.attributes[{}]: unknown attribute \"{}\" (allowed: Ldm, CM, Occ, "
                        "M-Obj, Hunt, T-Obj)",
                        where, k, attrs[k].is_string() ? name : attrs[k].dump()));
                }
                clip.attributes.push_back(*a);
            }
            std::sort(clip.attributes.begin(), clip.attributes.end());
            clip.attributes.erase(std::unique(clip.attributes.begin(), clip.attributes.end()),
                                  clip.attributes.end());
        }
        clip.frame_paths = path_list(c, "frames", where, base);
        clip.gt_paths = path_list(c, "gts", where, base);
        if (clip.frame_paths.empty()) {
            throw SchemaError(fmt::format("{}: clip \"{}\" has no frames", where, clip.clip_id));
        }
        if (clip.frame_paths.size() != clip.gt_paths.size()) {
            throw SchemaError(fmt::format("{}: clip \"{}\" lists {} frames but {} ground-truth masks",
                                          where, clip.clip_id, clip.frame_paths.size(),
                                          clip.gt_paths.size()));
        }
        if (check_files) {
            for (const auto* list : {&clip.frame_paths, &clip.gt_paths}) {
                for (const fs::path& p : *list) {
                    if (!fs::exists(p)) missing.push_back(p.string());
                }
            }
        }
        out.push_back(std::move(clip));
    }
    if (!missing.empty()) {
        throw MissingDataError(
            fmt::format("manifest references {} missing file(s), first: {}", missing.size(),
                        missing.front()),
            missing);
    }
    return out;
}

std::vector<ClipManifest> load_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingDataError(fmt::format("cannot open manifest {}", path.string()), {path.string()});
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw SchemaError(fmt::format("manifest {}: {}", path.string(), e.what()));
    }
    return parse_manifest(doc, path.parent_path());
}

std::size_t window_count(std::size_t length, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("window stride must be positive");
    if (length < kWindowLength) return 0;
    return (length - kWindowLength) / stride + 1;
}

std::vector<WindowSample> make_windows(const ClipManifest& clip, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("window stride must be positive");
    if (clip.length() < kWindowLength) {
        throw std::invalid_argument(fmt::format("clip \"{}\" has {} frames; windows need {}",
                                                clip.clip_id, clip.length(), kWindowLength));
    }
    std::vector<WindowSample> out;
    for (std::size_t start = 0; start + kWindowLength <= clip.length(); start += stride) {
        WindowSample w;
        w.clip_id = clip.clip_id;
        w.start_index = start;
        for (std::size_t k = 0; k < kWindowLength; ++k) w.frames[k] = clip.frame_paths[start + k];
        out.push_back(std::move(w));
    }
    return out;
}

GtMask load_gt_mask(const fs::path& path) {
    const GrayImage img = read_gray8(path);
    GtMask m{img.h, img.w, std::vector<std::uint8_t>(img.pixels.size())};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.values[i] = img.pixels[i] > 128 ? 1 : 0;
    return m;
}

std::vector<double> load_prediction(const fs::path& path, std::size_t* h, std::size_t* w) {
    const GrayImage img = read_gray8(path);
    std::vector<double> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] / 255.0;
    *h = img.h;
    *w = img.w;
    return out;
}

std::string_view to_string(DensityNorm n) noexcept {
    return n == DensityNorm::kMaxOne ? "max_one" : "sum_one";
}

DensityNorm parse_density_norm(std::string_view text) {
    if (text == "max_one") return DensityNorm::kMaxOne;
    if (text == "sum_one") return DensityNorm::kSumOne;
    throw std::invalid_argument(
        fmt::format("unknown normalization '{}' (expected max_one or sum_one)", text));
}

std::vector<double> accumulate_density(std::span<const GtMask> gts, std::size_t out_h,
                                       std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("density grid must be non-empty");
    std::vector<double> acc(out_h * out_w, 0.0);
    for (const GtMask& g : gts) {
        if (g.h == 0 || g.w == 0 || g.values.size() != g.h * g.w) {
            throw ShapeError("ground-truth mask has inconsistent extents");
        }
        const Tensor5 src({1, 1, 1, g.h, g.w}, std::vector<double>(g.values.begin(), g.values.end()));
        const Tensor5 resized = resize_bilinear_to(src, out_h, out_w);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += resized[i] >= 0.5 ? 1.0 : 0.0;
    }
    return acc;
}

DensityMap normalize_density(std::vector<double> accumulation, std::size_t out_h,
                             std::size_t out_w, DensityNorm norm, std::size_t source_frames) {
    DensityMap map{out_h, out_w, std::move(accumulation), norm, source_frames, false};
    double denom = 0.0;
    if (norm == DensityNorm::kMaxOne) {
        for (double v : map.grid) denom = std::max(denom, v);
    } else {
        for (double v : map.grid) denom += v;
    }
    if (denom == 0.0) {
        map.degenerate = true;
        std::fill(map.grid.begin(), map.grid.end(), 0.0);
        return map;
    }
    for (double& v : map.grid) v /= denom;
    return map;
}

DensityMap density_map(std::span<const GtMask> gts, std::size_t out_h, std::size_t out_w,
                       DensityNorm norm) {
    if (gts.empty()) throw std::invalid_argument("density map needs at least one mask");
    return normalize_density(accumulate_density(gts, out_h, out_w), out_h, out_w, norm, gts.size());
}

AttributeTable attribute_report(std::span<const ClipManifest> manifests,
                                const std::map<std::string, MetricReport>& per_clip) {
    std::map<std::string, const ClipManifest*> by_id;
    for (const ClipManifest& m : manifests) by_id[m.clip_id] = &m;
    for (const auto& [id, report] : per_clip) {
        if (!by_id.count(id)) throw SchemaError(fmt::format("report for unknown clip_id \"{}\"", id));
    }
    AttributeTable table;
    for (Attribute a : kAllAttributes) {
        // per_clip is keyed by clip_id, so membership order never depends on
        // manifest order.
        std::vector<MetricReport> members;
        for (const auto& [id, report] : per_clip) {
            if (by_id.at(id)->has(a)) members.push_back(report);
        }
        if (members.empty()) {
            table.notices.push_back(
                fmt::format("attribute {}: no evaluated clips carry this tag; row omitted", to_string(a)));
            continue;
        }
        table.rows.push_back({a, average_reports(members), members.size()});
    }
    return table;
}

}  // namespace camo
