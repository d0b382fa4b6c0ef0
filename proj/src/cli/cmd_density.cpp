#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <mutex>

#include <fmt/format.h>
#include <json.hpp>

#include "camo/commands.hpp"
#include "camo/image_io.hpp"
#include "camo/tensor_io.hpp"
#include "cli_common.hpp"

namespace camo {

namespace fs = std::filesystem;

namespace {

struct Accumulation {
    std::vector<double> grid;
    std::size_t frames = 0;
};

Accumulation accumulate_clip(const ClipManifest& clip, std::size_t h, std::size_t w) {
    std::vector<GtMask> masks;
    masks.reserve(clip.gt_paths.size());
    for (const fs::path& p : clip.gt_paths) masks.push_back(load_gt_mask(p));
    return {accumulate_density(masks, h, w), masks.size()};
}

std::array<std::uint8_t, 3> jet(double v) {
    auto channel = [](double x) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(1.5 - std::abs(x), 0.0, 1.0)));
    };
    const double x = 4.0 * std::clamp(v, 0.0, 1.0);
    return {channel(x - 3.0), channel(x - 2.0), channel(x - 1.0)};
}

void write_density(const fs::path& out, const std::string& name, const DensityMap& map) {
    double peak = 0.0;
    for (double v : map.grid) peak = std::max(peak, v);
    std::vector<std::uint16_t> gray(map.grid.size(), 0);
    std::vector<std::uint8_t> rgb(map.grid.size() * 3, 0);
    for (std::size_t i = 0; i < map.grid.size(); ++i) {
        const double v = peak > 0.0 ? map.grid[i] / peak : 0.0;
        gray[i] = static_cast<std::uint16_t>(std::lround(65535.0 * v));
        const auto c = jet(v);
        std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    write_gray16(out / fmt::format("density_{}.png", name), map.h, map.w, gray);
    write_rgb8(out / fmt::format("density_{}_color.png", name), map.h, map.w, rgb);
    save_tensor(out / fmt::format("density_{}.cst5", name),
                Tensor5(Shape5{1, 1, 1, map.h, map.w}, map.grid));
}

int run_density(const RunConfig& config) {
    validate_config(config);
    if (config.manifest.empty()) throw std::invalid_argument("density requires --manifest");
    const fs::path out = cli::require_out_dir(config.out_dir, "density");
    apply_workers(config.workers);

    const std::vector<ClipManifest> clips = load_manifest(config.manifest);
    const std::size_t h = config.density_h;
    const std::size_t w = config.density_w;

    std::vector<Accumulation> per_clip(clips.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto count = static_cast<std::ptrdiff_t>(clips.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            per_clip[static_cast<std::size_t>(i)] = accumulate_clip(clips[static_cast<std::size_t>(i)], h, w);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // Accumulations are integer counts, so summation order cannot matter;
    // clips are still added in manifest order.
    auto combine = [&](auto&& keep) {
        Accumulation total{std::vector<double>(h * w, 0.0), 0};
        for (std::size_t c = 0; c < clips.size(); ++c) {
            if (!keep(clips[c])) continue;
            for (std::size_t i = 0; i < total.grid.size(); ++i) total.grid[i] += per_clip[c].grid[i];
            total.frames += per_clip[c].frames;
        }
        return normalize_density(std::move(total.grid), h, w, config.normalization, total.frames);
    };

    nlohmann::json meta = {{"normalization", std::string(to_string(config.normalization))},
                           {"grid", {h, w}},
                           {"maps", nlohmann::json::object()}};
    auto emit = [&](const std::string& name, const DensityMap& map) {
        if (map.degenerate) {
            spdlog::warn("density {}: no foreground in {} mask(s); writing an all-zero map", name,
                         map.source_frames);
        }
        write_density(out, name, map);
        meta["maps"][name] = {{"frames", map.source_frames}, {"degenerate", map.degenerate}};
    };
    for (Split s : {Split::kTrain, Split::kTest}) {
        emit(std::string(to_string(s)), combine([s](const ClipManifest& c) { return c.split == s; }));
    }
    emit("all", combine([](const ClipManifest&) { return true; }));
    cli::write_text(out / "density_meta.json", meta.dump(2) + "\n");
    spdlog::info("density maps for {} clip(s) written to {}", clips.size(), out.string());
    return static_cast<int>(ExitCode::kOk);
}

}  // namespace

int cmd_density(const RunConfig& config) {
    return cli::guarded("density", [&] { return run_density(config); });
}

}  // namespace camo
