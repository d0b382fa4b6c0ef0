#pragma once

// Seven-metric segmentation evaluation: S-measure, max E-measure, max
// F-measure, weighted F-measure, MAE, Dice and IoU. Definitions and
// degenerate-case conventions follow the PySODMetrics implementations, with
// the exceptions noted on each function.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace camo {

/// Prediction in [0, 1] and binary ground truth over one H x W frame.
struct MaskPair {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> pred;       // row-major, clamped into [0, 1]
    std::vector<std::uint8_t> gt;   // row-major, 0 or 1

    std::size_t size() const noexcept { return h * w; }
};

/// Validates extents, clamps pred into [0, 1] and rejects non-binary gt.
MaskPair make_mask_pair(std::size_t h, std::size_t w, std::vector<double> pred,
                        std::vector<std::uint8_t> gt);

inline constexpr double kFBetaSquared = 0.3;       // max F-measure
inline constexpr double kWeightedFBetaSquared = 1.0;
inline constexpr double kSAlpha = 0.5;
inline constexpr int kThresholdCount = 256;
/// numpy's spacing(1), used where the reference adds a guard epsilon.
inline constexpr double kEps = 2.220446049250313e-16;

/// Mean |pred - gt|. Throws std::invalid_argument on an empty mask.
double mae(const MaskPair& pair);

/// min(2 * mean(pred), 1).
double adaptive_threshold(const MaskPair& pair);

struct DiceIou {
    double dice = 0.0;
    double iou = 0.0;
};

/// Foreground is pred >= threshold and pred > 0, so an all-zero prediction is
/// empty at every threshold. Both empty gives (1, 1).
DiceIou dice_iou(const MaskPair& pair, double threshold);

/// Maximum F-beta (beta^2 = 0.3) over thresholds k = 0..255, where a pixel is
/// positive iff 255 * pred >= k. Precision with an empty prediction is 0
/// unless gt is empty too (then 1); recall divides by max(|G|, 1).
double f_measure_max(const MaskPair& pair);

struct WeightedFResult {
    double value = 0.0;
    bool degenerate = false;  // gt had no foreground
};

/// Weighted F-beta (beta^2 = 1): errors are spread by a 7x7, sigma = 5
/// Gaussian over the foreground and weighted by 2 - 0.5^(d / 5) over the
/// background, d being the Euclidean distance to the nearest foreground
/// pixel. Where several foreground pixels are equally near, the one with the
/// smallest row-major index is used.
WeightedFResult f_measure_weighted_ex(const MaskPair& pair);
double f_measure_weighted(const MaskPair& pair);

/// S-alpha with alpha = 0.5. An all-background gt scores 1 - mean(pred), an
/// all-foreground gt scores mean(pred). Sample standard deviations of fewer
/// than two values are 0; empty quadrants score 0 (their weight is 0).
double s_measure(const MaskPair& pair);

/// Enhanced alignment at one binarization threshold (positive iff pred >= t).
/// The enhanced matrix is averaged over all pixels.
double e_measure_at(const MaskPair& pair, double threshold);

/// Maximum enhanced alignment over the same 256-threshold sweep as
/// f_measure_max.
double e_measure(const MaskPair& pair);

struct MetricReport {
    double s_alpha = 0.0;
    double f_max = 0.0;
    double f_beta_w = 0.0;
    double e_m = 0.0;
    double mae = 0.0;
    double m_dice = 0.0;
    double m_iou = 0.0;
    std::size_t frame_count = 0;
    std::size_t degenerate_frames = 0;  // frames with empty gt (weighted F = 0)
};

/// All seven metrics for one frame; Dice/IoU use adaptive_threshold.
MetricReport frame_metrics(const MaskPair& pair);

/// Arithmetic mean of per-frame metrics. Frames are scored in parallel; each
/// metric is then summed in ascending value order, so the result is
/// independent of both frame order and worker count. Throws
/// std::invalid_argument on an empty list.
MetricReport evaluate_sequence(std::span<const MaskPair> frames);

/// Unweighted mean of reports (each report counts once), summed in ascending
/// value order like evaluate_sequence; frame counts add up.
MetricReport average_reports(std::span<const MetricReport> reports);

}  // namespace camo
