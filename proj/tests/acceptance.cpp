// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "camo/commands.hpp"
#include "camo/dataset.hpp"
#include "camo/metrics.hpp"
#include "camo/mfs.hpp"
#include "camo/rng.hpp"
#include "camo/taa.hpp"
#include "oracles/naive_attention.hpp"
#include "oracles/naive_conv.hpp"
#include "oracles/naive_metrics.hpp"
#include "support/synthetic.hpp"

using namespace camo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct ConvCase {
    Tensor5 x;
    ConvSpec3D spec;
};

ConvCase random_conv_case(std::uint64_t seed) {
    Rng r = Rng::stream(seed, "acceptance.cdc3d");
    ConvCase c;
    const std::size_t cin = 1 + r.below(4), cout = 1 + r.below(4);
    const Extent3 k{1 + r.below(3), 1 + r.below(3), 1 + r.below(3)};
    c.spec.stride = {1 + r.below(2), 1 + r.below(2), 1 + r.below(2)};
    c.spec.dilation = {1 + r.below(2), 1 + r.below(2), 1 + r.below(2)};
    c.spec.padding = {r.below(3), r.below(3), r.below(3)};
    auto extent = [&](std::size_t kk, std::size_t d, std::size_t p) {
        const std::size_t span = d * (kk - 1) + 1;
        const std::size_t lo = span > 2 * p ? span - 2 * p : 1;
        return lo + r.below(6);
    };
    const Shape5 xs{1 + r.below(2), cin, extent(k.t, c.spec.dilation.t, c.spec.padding.t),
                    extent(k.h, c.spec.dilation.h, c.spec.padding.h),
                    extent(k.w, c.spec.dilation.w, c.spec.padding.w)};
    c.x = gaussian_init(xs, r.next_u64());
    c.spec.weights = gaussian_init({cout, cin, k.t, k.h, k.w}, r.next_u64());
    c.spec.theta = r.uniform();
    return c;
}

Outcome form_equivalence() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const ConvCase c = random_conv_case(s);
        worst = std::max(worst, max_abs_diff(cdc3d_forward_fusion(c.x, c.spec),
                                             cdc3d_forward_unified(c.x, c.spec)));
    }
    const double sec = seconds_since(t0);
    return {worst <= 1e-10 && sec < 10.0,
            fmt::format("100 cases, max |fusion - unified| = {:.3e}, {:.2f} s", worst, sec)};
}

Outcome theta_zero() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        ConvCase c = random_conv_case(1000 + s);
        c.spec.theta = 0.0;
        const Tensor5 ref = oracle::conv(c.x, c.spec);
        worst = std::max(worst, max_abs_diff(cdc3d_forward_unified(c.x, c.spec), ref));
        worst = std::max(worst, max_abs_diff(cdc3d_forward_fusion(c.x, c.spec), ref));
    }
    return {worst <= 1e-12, fmt::format("20 cases, max |cdc3d - naive conv| = {:.3e}", worst)};
}

Outcome zero_sum_invariance() {
    double worst = 0.0;
    std::size_t used = 0;
    for (std::uint64_t s = 0; used < 20; ++s) {
        ConvCase c = random_conv_case(2000 + s);
        const Shape5 ws = c.spec.weights.shape();
        const std::size_t slice = ws.t * ws.h * ws.w;
        if (slice < 2) continue;
        for (std::size_t q = 0; q < ws.n * ws.c; ++q) {
            double sum = 0.0;
            for (std::size_t i = 0; i + 1 < slice; ++i) sum += c.spec.weights[q * slice + i];
            c.spec.weights[q * slice + slice - 1] = -sum;
        }
        ConvSpec3D s0 = c.spec, s1 = c.spec;
        s0.theta = 0.0;
        s1.theta = 1.0;
        worst = std::max(worst, max_abs_diff(cdc3d_forward_unified(c.x, s0), cdc3d_forward_unified(c.x, s1)));
        worst = std::max(worst, max_abs_diff(cdc3d_forward_fusion(c.x, s0), cdc3d_forward_fusion(c.x, s1)));
        ++used;
    }
    return {worst <= 1e-10, fmt::format("20 zero-sum kernels, max |y(0) - y(1)| = {:.3e}", worst)};
}

Outcome gradients() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.gradcheck_seeds = 5;
    const auto t0 = Clock::now();
    const int code = cmd_gradcheck(cfg);
    const double sec = seconds_since(t0);
    const auto rows = run_gradcheck(cfg.seed, cfg.gradcheck_seeds, cfg.theta);
    double worst = 0.0;
    bool all = !rows.empty();
    for (const auto& r : rows) {
        worst = std::max(worst, r.max_rel_error);
        all = all && r.passed && r.max_rel_error < kGradcheckTolerance;
    }
    return {code == 0 && all && sec < 60.0,
            fmt::format("{} checks over 5 seeds, max rel err = {:.3e}, exit {}, {:.2f} s", rows.size(),
                        worst, code, sec)};
}

Outcome taa_identities() {
    const Tensor5 fs = gaussian_init({2, 3, 3, 6, 5}, 11);
    const bool identity = deform_sample(fs, OffsetField{zeros({2, 2, 3, 6, 5})}, 1) == fs;
    Rng r(12);
    TaaSpec spec = make_taa_spec(3, 9, r);
    spec.fuse_weights = Matrix(3, 3);
    const Tensor5 ft = gaussian_init({2, 3, 3, 6, 5}, 13);
    const bool residual = taa_fuse(ft, fs, spec) == ft;
    return {identity && residual, fmt::format("deform identity {}, zero projection residual {}",
                                              identity ? "exact" : "broken", residual ? "exact" : "broken")};
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

Outcome mfs_oracle() {
    double out_err = 0.0;
    double row_err = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng = Rng::stream(s, "acceptance.mfs");
        const std::size_t l = 1 + rng.below(8), m = rng.below(5), c = 1 + rng.below(8);
        const ConceptMode mode = s % 2 ? ConceptMode::kPerPairTokens : ConceptMode::kSumSingleToken;
        const AttentionSpec spec = make_attention_spec(c, mode, rng);
        const Matrix x = augment_tokens(random_matrix(l, c, rng), random_matrix(m, c, rng), spec);
        oracle::Dense w;
        const oracle::Dense ref = oracle::attention(oracle::to_dense(x), oracle::to_dense(spec.w_q),
                                                    oracle::to_dense(spec.w_k), oracle::to_dense(spec.w_v),
                                                    static_cast<double>(spec.d_k), &w);
        const Matrix fast = attention_rows(x, spec);
        const Matrix naive = attention_oracle(x, spec);
        const Matrix a = attention_weights(x, spec);
        for (std::size_t i = 0; i < x.rows; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < x.rows; ++j) row += a(i, j);
            row_err = std::max(row_err, std::abs(row - 1.0));
            for (std::size_t k = 0; k < c; ++k) {
                out_err = std::max(out_err, std::abs(fast(i, k) - ref[i][k]));
                out_err = std::max(out_err, std::abs(naive(i, k) - ref[i][k]));
            }
        }
        // The spatial path through the tensor API must agree with the same rows.
        Tensor5 f({1, c, 1, 1, l});
        const Matrix tokens = random_matrix(l, c, rng);
        store_frame_tokens(f, 0, 0, tokens);
        const Matrix concepts = random_matrix(m, c, rng);
        const Matrix full_rows = attention_oracle(augment_tokens(tokens, concepts, spec), spec);
        const Matrix back = frame_tokens(augmented_attention(f, concepts, spec), 0, 0);
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t k = 0; k < c; ++k) out_err = std::max(out_err, std::abs(back(i, k) - full_rows(i, k)));
    }
    return {out_err <= 1e-9 && row_err <= 1e-9,
            fmt::format("50 cases, max |out - oracle| = {:.3e}, max |row sum - 1| = {:.3e}", out_err, row_err)};
}

double logistic(double l) {
    if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
    const double e = std::exp(l);
    return e / (1.0 + e);
}

Outcome convexity() {
    bool exact = true;
    for (std::uint64_t s = 0; s < 20; ++s) {
        PrimitiveBank bank = gaussian_bank(1 + s % 8, 3 + s % 5, s);
        Rng r(s);
        for (double& l : bank.logits) l = r.uniform(-6.0, 6.0);
        const Matrix t = mix_primitives(bank, ConceptMode::kPerPairTokens);
        for (std::size_t i = 0; i < bank.n_pairs(); ++i) {
            const double a = logistic(bank.logits[i]);
            for (std::size_t k = 0; k < bank.dim(); ++k) {
                exact = exact && t(i, k) == bank.neg(i, k) + a * (bank.pos(i, k) - bank.neg(i, k));
            }
        }
    }
    double sat = 0.0;
    PrimitiveBank bank = gaussian_bank(4, 16, 99);
    for (double logit : {20.0, -20.0}) {
        std::fill(bank.logits.begin(), bank.logits.end(), logit);
        const Matrix t = mix_primitives(bank, ConceptMode::kPerPairTokens);
        const Matrix& target = logit > 0 ? bank.pos : bank.neg;
        for (std::size_t i = 0; i < t.data.size(); ++i) sat = std::max(sat, std::abs(t.data[i] - target.data[i]));
    }
    return {exact && sat <= 1e-8,
            fmt::format("identity {}, saturation error at |l| = 20: {:.3e}", exact ? "exact" : "inexact", sat)};
}

MaskPair random_pair(std::uint64_t seed) {
    Rng r = Rng::stream(seed, "acceptance.metrics");
    const std::size_t h = 1 + r.below(8), w = 1 + r.below(8);
    const double fg_rate = r.uniform(0.05, 0.8);
    std::vector<double> pred(h * w);
    std::vector<std::uint8_t> gt(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        gt[i] = r.uniform() < fg_rate;
        double v = gt[i] ? r.uniform(0.2, 1.0) : r.uniform(0.0, 0.8);
        if (seed % 4 == 0) v = std::round(v * 4) / 4;
        pred[i] = v;
    }
    return make_mask_pair(h, w, std::move(pred), std::move(gt));
}

Outcome metric_oracles() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const MaskPair p = random_pair(s);
        const oracle::Masks o{p.h, p.w, p.pred, p.gt};
        double d = 0, i = 0;
        oracle::dice_iou(o, oracle::adaptive_threshold(o), d, i);
        const DiceIou di = dice_iou(p, adaptive_threshold(p));
        for (double e : {mae(p) - oracle::mae(o), f_measure_max(p) - oracle::f_max(o),
                         e_measure(p) - oracle::e_max(o), f_measure_weighted(p) - oracle::f_weighted(o),
                         s_measure(p) - oracle::s_measure(o), di.dice - d, di.iou - i}) {
            worst = std::max(worst, std::abs(e));
        }
    }
    const MaskPair overlap = make_mask_pair(1, 3, {1, 1, 0}, {0, 1, 1});
    const DiceIou di = dice_iou(overlap, 0.5);
    const bool hand = di.dice == 0.5 && di.iou == 1.0 / 3.0 &&
                      mae(make_mask_pair(2, 2, std::vector<double>(4, 0.25), {0, 0, 0, 0})) == 0.25;
    return {worst <= 1e-6 && hand,
            fmt::format("50 pairs, max |metric - oracle| = {:.3e}, hand cases {}", worst, hand ? "exact" : "wrong")};
}

RunConfig eval_config(const testsupport::SyntheticSet& set, const fs::path& out, int workers) {
    RunConfig c;
    c.manifest = set.manifest;
    c.pred_root = set.pred_root;
    c.out_dir = out;
    c.workers = workers;
    return c;
}

std::string csv_cell(const std::string& csv, const std::string& label, const std::string& column) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t end = std::min(csv.find('\n', pos), csv.size());
        std::vector<std::string> cells;
        std::size_t a = pos;
        while (true) {
            const std::size_t b = csv.find(',', a);
            if (b == std::string::npos || b > end) {
                cells.push_back(csv.substr(a, end - a));
                break;
            }
            cells.push_back(csv.substr(a, b - a));
            a = b + 1;
        }
        rows.push_back(std::move(cells));
        pos = end + 1;
    }
    if (rows.empty()) return "";
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].empty() || rows[r][0] != label) continue;
        for (std::size_t i = 0; i < rows[0].size() && i < rows[r].size(); ++i)
            if (rows[0][i] == column) return rows[r][i];
    }
    return "";
}

Outcome eval_determinism() {
    using namespace testsupport;
    const fs::path dir = scratch_dir("acceptance_eval");
    bool identical = true;
    for (PredKind kind : {PredKind::kNoisy, PredKind::kPerfect}) {
        const std::string tag = kind == PredKind::kNoisy ? "noisy" : "perfect";
        const auto set = make_synthetic_set(dir / tag, default_clips(), 24, 32, kind);
        int codes = 0;
        codes |= cmd_eval(eval_config(set, dir / tag / "w1", 1));
        codes |= cmd_eval(eval_config(set, dir / tag / "w8", 8));
        codes |= cmd_eval(eval_config(set, dir / tag / "w8b", 8));
        if (codes != 0) return {false, fmt::format("{} eval returned a nonzero exit code", tag)};
        for (const char* f : {"per_clip.csv", "aggregate.csv", "attributes.csv"}) {
            const std::string a = read_file(dir / tag / "w1" / f);
            identical = identical && !a.empty() && a == read_file(dir / tag / "w8" / f) &&
                        a == read_file(dir / tag / "w8b" / f);
        }
    }
    const std::string agg = read_file(dir / "perfect" / "w1" / "aggregate.csv");
    const std::string m = csv_cell(agg, "ALL", "mae");
    const std::string d = csv_cell(agg, "ALL", "m_dice");
    const bool perfect = m == "0.000000" && d == "1.000000";
    return {identical && perfect, fmt::format("CSVs {} across runs and workers 1/8; perfect mae {} m_dice {}",
                                              identical ? "byte-identical" : "differ", m, d)};
}

Outcome windowing() {
    std::size_t checked = 0;
    std::size_t wrong = 0;
    for (std::size_t len = 5; len <= 40; ++len) {
        ClipManifest clip;
        clip.clip_id = "w";
        for (std::size_t i = 0; i < len; ++i) {
            clip.frame_paths.push_back(fmt::format("{}.png", i));
            clip.gt_paths.push_back(fmt::format("{}.png", i));
        }
        for (std::size_t stride = 1; stride <= 5; ++stride) {
            const std::size_t expected = (len - 5) / stride + 1;
            const auto windows = make_windows(clip, stride);
            bool ok = windows.size() == expected && window_count(len, stride) == expected;
            for (std::size_t k = 0; ok && k < windows.size(); ++k) {
                ok = windows[k].start_index == k * stride && windows[k].frames[4] == clip.frame_paths[k * stride + 4];
            }
            wrong += !ok;
            ++checked;
        }
    }
    return {wrong == 0, fmt::format("{} (len, stride) pairs, {} mismatches", checked, wrong)};
}

Outcome performance() {
    RunConfig cfg;
    cfg.bench_quick = true;
    cfg.bench_repeats = 11;
    const auto rows = run_bench(cfg);
    double plain = 0.0, unified = 0.0, slowest = 0.0;
    for (const auto& r : rows) {
        if (r.form == "plain") plain = r.median_ns;
        if (r.form == "unified") unified = r.median_ns;
        if (r.form == "plain" || r.form == "unified") slowest = std::max(slowest, r.median_ns);
    }
    if (plain <= 0.0 || unified <= 0.0) return {false, "bench produced no plain/unified rows"};
    const double ratio = unified / plain;
    return {ratio <= 1.5 && slowest < 5e9,
            fmt::format("(1,8,5,64,64) 8->8 3x3x3: unified {:.2f} ms, plain {:.2f} ms, ratio {:.3f}",
                        unified * 1e-6, plain * 1e-6, ratio)};
}

Outcome demo() {
    RunConfig cfg;
    const auto t0 = Clock::now();
    const int code = cmd_demo(cfg);
    const double sec = seconds_since(t0);
    const DemoReport r = run_demo(cfg);
    std::size_t mismatched = 0;
    std::vector<double> scales;
    for (const auto& s : r.stages) {
        mismatched += !(s.shape == s.expected);
        if (std::find(scales.begin(), scales.end(), s.scale) == scales.end()) scales.push_back(s.scale);
    }
    const bool all_scales = scales == std::vector<double>{0.5, 1.0, 1.5};
    return {code == 0 && sec < 30.0 && mismatched == 0 && all_scales && !r.stages.empty(),
            fmt::format("{} stages over {} scales, {} mismatched, exit {}, {:.2f} s", r.stages.size(),
                        scales.size(), mismatched, code, sec)};
}

}  // namespace

int main() {
    init_logging();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"cdc3d form equivalence", form_equivalence},
        {"cdc3d theta=0 degeneracy", theta_zero},
        {"zero-sum kernel theta invariance", zero_sum_invariance},
        {"gradient checks", gradients},
        {"TAA identity reductions", taa_identities},
        {"MFS oracle equivalence", mfs_oracle},
        {"concept mixing convexity", convexity},
        {"metric oracle equivalence", metric_oracles},
        {"end-to-end eval determinism", eval_determinism},
        {"windowing arithmetic", windowing},
        {"performance bound", performance},
        {"demo pipeline shape contract", demo},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
