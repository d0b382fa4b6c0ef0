#include "camo/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "camo/error.hpp"

namespace camo {

MaskPair make_mask_pair(std::size_t h, std::size_t w, std::vector<double> pred,
                        std::vector<std::uint8_t> gt) {
    if (pred.size() != h * w || gt.size() != h * w) {
        throw ShapeError(fmt::format("mask pair {}x{}: pred has {} values, gt has {}", h, w,
                                     pred.size(), gt.size()));
    }
    for (double& v : pred) {
        if (std::isnan(v)) throw std::invalid_argument("prediction contains NaN");
        v = std::clamp(v, 0.0, 1.0);
    }
    for (std::uint8_t g : gt) {
        if (g > 1) throw std::invalid_argument("ground truth must be binary (0 or 1)");
    }
    return MaskPair{h, w, std::move(pred), std::move(gt)};
}

namespace {

void require_nonempty(const MaskPair& pair) {
    if (pair.size() == 0) throw std::invalid_argument("metric on an empty mask");
}

double mean_pred(const MaskPair& pair) {
    double s = 0.0;
    for (double v : pair.pred) s += v;
    return s / static_cast<double>(pair.size());
}

// Counts of foreground / background gt pixels whose prediction clears each
// threshold k, i.e. pred > 0 and floor(255 * pred) >= k.
struct SweepCounts {
    std::array<std::size_t, kThresholdCount> fg_pos{};
    std::array<std::size_t, kThresholdCount> bg_pos{};
    std::size_t fg_total = 0;
    std::size_t total = 0;
};

SweepCounts sweep_counts(const MaskPair& pair) {
    std::array<std::size_t, kThresholdCount> fg_hist{};
    std::array<std::size_t, kThresholdCount> bg_hist{};
    SweepCounts out;
    out.total = pair.size();
    for (std::size_t i = 0; i < pair.size(); ++i) {
        if (pair.gt[i]) ++out.fg_total;
        if (!(pair.pred[i] > 0.0)) continue;
        const auto bin = static_cast<std::size_t>(
            std::clamp(std::floor(pair.pred[i] * 255.0), 0.0, 255.0));
        if (pair.gt[i]) {
            ++fg_hist[bin];
        } else {
            ++bg_hist[bin];
        }
    }
    std::size_t fg = 0;
    std::size_t bg = 0;
    for (int k = kThresholdCount - 1; k >= 0; --k) {
        fg += fg_hist[static_cast<std::size_t>(k)];
        bg += bg_hist[static_cast<std::size_t>(k)];
        out.fg_pos[static_cast<std::size_t>(k)] = fg;
        out.bg_pos[static_cast<std::size_t>(k)] = bg;
    }
    return out;
}

double f_beta(double precision, double recall, double beta2) {
    const double num = (1.0 + beta2) * precision * recall;
    return num == 0.0 ? 0.0 : num / (beta2 * precision + recall);
}

// Enhanced-alignment sum from the four confusion counts.
double enhanced_alignment(std::size_t tp, std::size_t fp, std::size_t fg_gt, std::size_t total) {
    const std::size_t pred_fg = tp + fp;
    const std::size_t pred_bg = total - pred_fg;
    if (fg_gt == 0) return static_cast<double>(pred_bg) / static_cast<double>(total);
    if (fg_gt == total) return static_cast<double>(pred_fg) / static_cast<double>(total);

    const std::size_t fn = fg_gt - tp;
    const std::size_t tn = pred_bg - fn;
    const double n = static_cast<double>(total);
    const double mean_pred = static_cast<double>(pred_fg) / n;
    const double mean_gt = static_cast<double>(fg_gt) / n;
    const double pred_fg_v = 1.0 - mean_pred;
    const double pred_bg_v = 0.0 - mean_pred;
    const double gt_fg_v = 1.0 - mean_gt;
    const double gt_bg_v = 0.0 - mean_gt;
    auto part = [](std::size_t count, double a, double b) {
        const double align = 2.0 * (a * b) / (a * a + b * b + kEps);
        const double enhanced = (align + 1.0) * (align + 1.0) / 4.0;
        return enhanced * static_cast<double>(count);
    };
    const double sum = part(tp, pred_fg_v, gt_fg_v) + part(fp, pred_fg_v, gt_bg_v) +
                       part(fn, pred_bg_v, gt_fg_v) + part(tn, pred_bg_v, gt_bg_v);
    return sum / n;
}

}  // namespace

double mae(const MaskPair& pair) {
    require_nonempty(pair);
    double s = 0.0;
    for (std::size_t i = 0; i < pair.size(); ++i) {
        s += std::abs(pair.pred[i] - static_cast<double>(pair.gt[i]));
    }
    return s / static_cast<double>(pair.size());
}

double adaptive_threshold(const MaskPair& pair) {
    require_nonempty(pair);
    return std::min(2.0 * mean_pred(pair), 1.0);
}

DiceIou dice_iou(const MaskPair& pair, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument(fmt::format("threshold must lie in [0, 1], got {}", threshold));
    }
    std::size_t inter = 0;
    std::size_t p = 0;
    std::size_t g = 0;
    for (std::size_t i = 0; i < pair.size(); ++i) {
        const bool pos = pair.pred[i] >= threshold && pair.pred[i] > 0.0;
        p += pos;
        g += pair.gt[i];
        inter += pos && pair.gt[i];
    }
    if (p == 0 && g == 0) return {1.0, 1.0};
    const double i = static_cast<double>(inter);
    return {2.0 * i / static_cast<double>(p + g), i / static_cast<double>(p + g - inter)};
}

double f_measure_max(const MaskPair& pair) {
    require_nonempty(pair);
    const SweepCounts sc = sweep_counts(pair);
    double best = 0.0;
    for (std::size_t k = 0; k < kThresholdCount; ++k) {
        const std::size_t tp = sc.fg_pos[k];
        const std::size_t pos = tp + sc.bg_pos[k];
        double precision = 0.0;
        if (pos > 0) {
            precision = static_cast<double>(tp) / static_cast<double>(pos);
        } else if (sc.fg_total == 0) {
            precision = 1.0;
        }
        const double recall =
            static_cast<double>(tp) / static_cast<double>(std::max<std::size_t>(sc.fg_total, 1));
        best = std::max(best, f_beta(precision, recall, kFBetaSquared));
    }
    return best;
}

double e_measure_at(const MaskPair& pair, double threshold) {
    require_nonempty(pair);
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fg = 0;
    for (std::size_t i = 0; i < pair.size(); ++i) {
        const bool pos = pair.pred[i] > 0.0 && pair.pred[i] >= threshold;
        fg += pair.gt[i];
        tp += pos && pair.gt[i];
        fp += pos && !pair.gt[i];
    }
    return enhanced_alignment(tp, fp, fg, pair.size());
}

double e_measure(const MaskPair& pair) {
    require_nonempty(pair);
    const SweepCounts sc = sweep_counts(pair);
    double best = 0.0;
    for (std::size_t k = 0; k < kThresholdCount; ++k) {
        best = std::max(best, enhanced_alignment(sc.fg_pos[k], sc.bg_pos[k], sc.fg_total, sc.total));
    }
    return best;
}

namespace {

// Nearest foreground pixel (Euclidean, ties to the smaller row-major index)
// for every pixel. Column pass finds the nearest foreground row per column;
// the row pass then searches columns outward until the horizontal distance
// alone exceeds the best candidate.
struct NearestForeground {
    std::vector<double> dist;        // Euclidean distance
    std::vector<std::size_t> index;  // row-major index of the nearest fg pixel
};

NearestForeground nearest_foreground(const MaskPair& pair) {
    const std::size_t h = pair.h;
    const std::size_t w = pair.w;
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    // nearest_row[y * w + x]: nearest fg row in column x (smaller row on ties).
    std::vector<std::size_t> nearest_row(h * w, kNone);
    for (std::size_t x = 0; x < w; ++x) {
        std::size_t above = kNone;
        for (std::size_t y = 0; y < h; ++y) {
            if (pair.gt[y * w + x]) above = y;
            nearest_row[y * w + x] = above;
        }
        std::size_t below = kNone;
        for (std::size_t y = h; y-- > 0;) {
            if (pair.gt[y * w + x]) below = y;
            if (below == kNone) continue;
            const std::size_t a = nearest_row[y * w + x];
            if (a == kNone || below - y < y - a) nearest_row[y * w + x] = below;
        }
    }

    NearestForeground out{std::vector<double>(h * w, 0.0), std::vector<std::size_t>(h * w, 0)};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t best_d2 = kNone;
            std::size_t best_idx = kNone;
            auto consider = [&](std::size_t xc) {
                const std::size_t r = nearest_row[y * w + xc];
                if (r == kNone) return;
                const std::size_t dy = r > y ? r - y : y - r;
                const std::size_t dx = xc > x ? xc - x : x - xc;
                const std::size_t d2 = dy * dy + dx * dx;
                const std::size_t idx = r * w + xc;
                if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                    best_d2 = d2;
                    best_idx = idx;
                }
            };
            for (std::size_t d = 0; d < w; ++d) {
                if (best_d2 != kNone && d * d > best_d2) break;
                if (x >= d) consider(x - d);
                if (d > 0 && x + d < w) consider(x + d);
            }
            out.dist[y * w + x] = std::sqrt(static_cast<double>(best_d2));
            out.index[y * w + x] = best_idx;
        }
    }
    return out;
}

// 7x7 Gaussian, sigma 5, normalized to unit sum (MATLAB fspecial convention).
std::array<double, 49> gaussian_7x7() {
    std::array<double, 49> k{};
    double peak = 0.0;
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) {
            const double y = i - 3;
            const double x = j - 3;
            k[static_cast<std::size_t>(i * 7 + j)] = std::exp(-(x * x + y * y) / (2.0 * 25.0));
            peak = std::max(peak, k[static_cast<std::size_t>(i * 7 + j)]);
        }
    }
    double sum = 0.0;
    for (double& v : k) {
        if (v < std::numeric_limits<double>::epsilon() * peak) v = 0.0;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

WeightedFResult f_measure_weighted_ex(const MaskPair& pair) {
    require_nonempty(pair);
    const std::size_t n = pair.size();
    const std::size_t h = pair.h;
    const std::size_t w = pair.w;
    std::size_t fg_count = 0;
    for (std::uint8_t g : pair.gt) fg_count += g;
    if (fg_count == 0) return {0.0, true};

    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i) err[i] = std::abs(pair.pred[i] - pair.gt[i]);

    // Background pixels inherit the error of their nearest foreground pixel.
    const NearestForeground nf = nearest_foreground(pair);
    std::vector<double> err_t(err);
    for (std::size_t i = 0; i < n; ++i) {
        if (!pair.gt[i]) err_t[i] = err[nf.index[i]];
    }

    static const std::array<double, 49> kernel = gaussian_7x7();
    const auto hh = static_cast<std::ptrdiff_t>(h);
    const auto ww = static_cast<std::ptrdiff_t>(w);
    double fg_err_sum = 0.0;
    double bg_err_sum = 0.0;
    for (std::ptrdiff_t y = 0; y < hh; ++y) {
        for (std::ptrdiff_t x = 0; x < ww; ++x) {
            const auto i = static_cast<std::size_t>(y * ww + x);
            double e = err[i];
            if (pair.gt[i]) {
                double spread = 0.0;
                for (std::ptrdiff_t dy = -3; dy <= 3; ++dy) {
                    const std::ptrdiff_t yy = y + dy;
                    if (yy < 0 || yy >= hh) continue;
                    for (std::ptrdiff_t dx = -3; dx <= 3; ++dx) {
                        const std::ptrdiff_t xx = x + dx;
                        if (xx < 0 || xx >= ww) continue;
                        spread += kernel[static_cast<std::size_t>((dy + 3) * 7 + dx + 3)] *
                                  err_t[static_cast<std::size_t>(yy * ww + xx)];
                    }
                }
                if (spread < e) e = spread;
                fg_err_sum += e;
            } else {
                const double importance = 2.0 - std::exp(std::log(0.5) / 5.0 * nf.dist[i]);
                bg_err_sum += e * importance;
            }
        }
    }
    const double fg = static_cast<double>(fg_count);
    const double tp_w = fg - fg_err_sum;
    const double recall = 1.0 - fg_err_sum / fg;
    const double precision = tp_w / (tp_w + bg_err_sum + kEps);
    const double q = (1.0 + kWeightedFBetaSquared) * recall * precision /
                     (recall + kWeightedFBetaSquared * precision + kEps);
    return {q, false};
}

double f_measure_weighted(const MaskPair& pair) { return f_measure_weighted_ex(pair).value; }

namespace {

struct Region {
    std::size_t y0, y1, x0, x1;  // half-open
    std::size_t size() const noexcept { return (y1 - y0) * (x1 - x0); }
};

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double s_object_score(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const double sd = sample_std(v, mean);
    return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double object_score(const MaskPair& pair, double gt_mean) {
    std::vector<double> fg;
    std::vector<double> bg;
    for (std::size_t i = 0; i < pair.size(); ++i) {
        if (pair.gt[i]) {
            fg.push_back(pair.pred[i]);
        } else {
            bg.push_back(1.0 - pair.pred[i]);
        }
    }
    return s_object_score(fg) * gt_mean + s_object_score(bg) * (1.0 - gt_mean);
}

double region_ssim(const MaskPair& pair, const Region& r) {
    const std::size_t n = r.size();
    if (n == 0) return 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t y = r.y0; y < r.y1; ++y) {
        for (std::size_t x = r.x0; x < r.x1; ++x) {
            mx += pair.pred[y * pair.w + x];
            my += pair.gt[y * pair.w + x];
        }
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t y = r.y0; y < r.y1; ++y) {
        for (std::size_t x = r.x0; x < r.x1; ++x) {
            const double dx = pair.pred[y * pair.w + x] - mx;
            const double dy = pair.gt[y * pair.w + x] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    const double denom = static_cast<double>(n > 1 ? n - 1 : 1);
    sxx /= denom;
    syy /= denom;
    sxy /= denom;
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

double region_score(const MaskPair& pair) {
    const std::size_t h = pair.h;
    const std::size_t w = pair.w;
    // Foreground centroid rounded half-to-even, then shifted by one (the
    // split index is the first row / column of the lower / right part).
    double sy = 0.0;
    double sx = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (pair.gt[y * w + x]) {
                sy += static_cast<double>(y);
                sx += static_cast<double>(x);
                ++count;
            }
        }
    }
    double cy;
    double cx;
    if (count == 0) {
        cy = std::nearbyint(static_cast<double>(h) / 2.0);
        cx = std::nearbyint(static_cast<double>(w) / 2.0);
    } else {
        cy = std::nearbyint(sy / static_cast<double>(count));
        cx = std::nearbyint(sx / static_cast<double>(count));
    }
    const auto yc = std::min(static_cast<std::size_t>(cy) + 1, h);
    const auto xc = std::min(static_cast<std::size_t>(cx) + 1, w);

    const double area = static_cast<double>(h * w);
    const double w1 = static_cast<double>(xc * yc) / area;
    const double w2 = static_cast<double>(yc * (w - xc)) / area;
    const double w3 = static_cast<double>((h - yc) * xc) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * region_ssim(pair, {0, yc, 0, xc}) + w2 * region_ssim(pair, {0, yc, xc, w}) +
           w3 * region_ssim(pair, {yc, h, 0, xc}) + w4 * region_ssim(pair, {yc, h, xc, w});
}

}  // namespace

double s_measure(const MaskPair& pair) {
    require_nonempty(pair);
    std::size_t fg = 0;
    for (std::uint8_t g : pair.gt) fg += g;
    const double gt_mean = static_cast<double>(fg) / static_cast<double>(pair.size());
    if (fg == 0) return 1.0 - mean_pred(pair);
    if (fg == pair.size()) return mean_pred(pair);
    const double sm = kSAlpha * object_score(pair, gt_mean) + (1.0 - kSAlpha) * region_score(pair);
    return std::max(0.0, sm);
}

MetricReport frame_metrics(const MaskPair& pair) {
    require_nonempty(pair);
    MetricReport r;
    r.s_alpha = s_measure(pair);
    r.f_max = f_measure_max(pair);
    const WeightedFResult wf = f_measure_weighted_ex(pair);
    r.f_beta_w = wf.value;
    r.degenerate_frames = wf.degenerate ? 1 : 0;
    r.e_m = e_measure(pair);
    r.mae = mae(pair);
    const DiceIou di = dice_iou(pair, adaptive_threshold(pair));
    r.m_dice = di.dice;
    r.m_iou = di.iou;
    r.frame_count = 1;
    return r;
}

namespace {

double ordered_mean(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

MetricReport mean_fields(std::span<const MetricReport> reports) {
    auto column = [&](double MetricReport::*field) {
        std::vector<double> v;
        v.reserve(reports.size());
        for (const MetricReport& r : reports) v.push_back(r.*field);
        return ordered_mean(std::move(v));
    };
    MetricReport out;
    out.s_alpha = column(&MetricReport::s_alpha);
    out.f_max = column(&MetricReport::f_max);
    out.f_beta_w = column(&MetricReport::f_beta_w);
    out.e_m = column(&MetricReport::e_m);
    out.mae = column(&MetricReport::mae);
    out.m_dice = column(&MetricReport::m_dice);
    out.m_iou = column(&MetricReport::m_iou);
    for (const MetricReport& r : reports) {
        out.frame_count += r.frame_count;
        out.degenerate_frames += r.degenerate_frames;
    }
    return out;
}

}  // namespace

MetricReport evaluate_sequence(std::span<const MaskPair> frames) {
    if (frames.empty()) throw std::invalid_argument("evaluate_sequence needs at least one frame");
    std::vector<MetricReport> per_frame(frames.size());
    const auto count = static_cast<std::ptrdiff_t>(frames.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        per_frame[static_cast<std::size_t>(i)] = frame_metrics(frames[static_cast<std::size_t>(i)]);
    }
    return mean_fields(per_frame);
}

MetricReport average_reports(std::span<const MetricReport> reports) {
    if (reports.empty()) throw std::invalid_argument("average_reports needs at least one report");
    return mean_fields(reports);
}

}  // namespace camo
