#include <exception>
#include <map>
#include <mutex>

#include <fmt/format.h>
#include <json.hpp>

#include "camo/commands.hpp"
#include "camo/metrics.hpp"
#include "camo/tensor.hpp"
#include "cli_common.hpp"

namespace camo {

namespace fs = std::filesystem;

fs::path prediction_path(const fs::path& pred_root, const ClipManifest& clip, std::size_t frame) {
    return pred_root / clip.clip_id / clip.gt_paths.at(frame).filename();
}

namespace {

struct FrameTask {
    std::size_t clip;
    std::size_t frame;
};

MaskPair load_pair(const ClipManifest& clip, std::size_t frame, const fs::path& pred_root) {
    const GtMask gt = load_gt_mask(clip.gt_paths[frame]);
    std::size_t ph = 0;
    std::size_t pw = 0;
    std::vector<double> pred = load_prediction(prediction_path(pred_root, clip, frame), &ph, &pw);
    if (ph != gt.h || pw != gt.w) {
        throw ShapeError(fmt::format("clip {} frame {}: prediction is {}x{} but ground truth is {}x{}",
                                     clip.clip_id, frame, ph, pw, gt.h, gt.w));
    }
    return make_mask_pair(gt.h, gt.w, std::move(pred), gt.values);
}

int run_eval(const RunConfig& config) {
    validate_config(config);
    if (config.manifest.empty()) throw std::invalid_argument("eval requires --manifest");
    if (config.pred_root.empty()) throw std::invalid_argument("eval requires --pred");
    const fs::path out = cli::require_out_dir(config.out_dir, "eval");
    apply_workers(config.workers);

    std::vector<ClipManifest> all = load_manifest(config.manifest);
    std::vector<ClipManifest> clips;
    for (ClipManifest& c : all) {
        if (config.split == "all" || to_string(c.split) == config.split) clips.push_back(c);
    }
    if (clips.empty()) {
        throw std::invalid_argument(fmt::format("manifest has no clips in split '{}'", config.split));
    }

    std::vector<std::string> missing;
    std::vector<FrameTask> tasks;
    for (std::size_t c = 0; c < clips.size(); ++c) {
        for (std::size_t f = 0; f < clips[c].length(); ++f) {
            const fs::path p = prediction_path(config.pred_root, clips[c], f);
            if (!fs::exists(p)) missing.push_back(p.string());
            tasks.push_back({c, f});
        }
    }
    if (!missing.empty()) {
        throw MissingDataError(fmt::format("{} prediction frame(s) missing", missing.size()),
                               missing);
    }

    // Frames are scored in parallel into fixed slots; everything after this
    // loop is a serial, order-fixed reduction.
    std::vector<MetricReport> frame_reports(tasks.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto count = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const FrameTask& task = tasks[static_cast<std::size_t>(i)];
        try {
            const MaskPair pair = load_pair(clips[task.clip], task.frame, config.pred_root);
            frame_reports[static_cast<std::size_t>(i)] = frame_metrics(pair);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::map<std::string, MetricReport> per_clip;
    std::string clip_csv = cli::csv_metric_header();
    std::size_t cursor = 0;
    for (const ClipManifest& clip : clips) {
        const std::span<const MetricReport> frames(frame_reports.data() + cursor, clip.length());
        cursor += clip.length();
        const MetricReport r = average_reports(frames);
        per_clip[clip.clip_id] = r;
        clip_csv += cli::csv_metric_row(clip.clip_id, r);
    }
    const MetricReport aggregate = average_reports(frame_reports);
    std::string agg_csv = cli::csv_metric_header() + cli::csv_metric_row("ALL", aggregate);

    const AttributeTable table = attribute_report(all, per_clip);
    std::string attr_csv = "attribute,clips,frames,s_alpha,f_beta_w,m_iou,pooling\n";
    for (const AttributeRow& row : table.rows) {
        attr_csv += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},clip_macro\n", to_string(row.attribute),
                                row.clip_count, row.report.frame_count, row.report.s_alpha,
                                row.report.f_beta_w, row.report.m_iou);
    }
    for (const std::string& notice : table.notices) spdlog::info("{}", notice);
    if (aggregate.degenerate_frames > 0) {
        spdlog::warn("{} frame(s) have empty ground truth; their weighted F-measure is 0",
                     aggregate.degenerate_frames);
    }

    const nlohmann::json meta = {
        {"split", config.split},
        {"clips", clips.size()},
        {"frames", tasks.size()},
        {"e_m", "max over 256 thresholds (255 * pred >= k)"},
        {"f_max", "max over 256 thresholds, beta^2 = 0.3"},
        {"f_beta_w", "beta^2 = 1; 0 for frames with empty ground truth"},
        {"m_dice_m_iou", "adaptive threshold min(2 * mean(pred), 1)"},
        {"clip_rows", "mean over the clip's frames"},
        {"aggregate_row", "mean over all frames"},
        {"attribute_rows", "clip-level macro average"},
        {"degenerate_frames", aggregate.degenerate_frames},
        {"omitted_attributes", table.notices},
    };
    cli::write_text(out / "per_clip.csv", clip_csv);
    cli::write_text(out / "aggregate.csv", agg_csv);
    cli::write_text(out / "attributes.csv", attr_csv);
    cli::write_text(out / "eval_meta.json", meta.dump(2) + "\n");
    spdlog::info("evaluated {} clip(s), {} frame(s): S={:.4f} mae={:.4f} mDice={:.4f}", clips.size(),
                 tasks.size(), aggregate.s_alpha, aggregate.mae, aggregate.m_dice);
    return static_cast<int>(ExitCode::kOk);
}

}  // namespace

int cmd_eval(const RunConfig& config) {
    return cli::guarded("eval", [&] { return run_eval(config); });
}

}  // namespace camo
