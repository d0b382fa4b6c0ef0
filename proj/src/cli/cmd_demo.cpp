#include <cmath>

#include <fmt/format.h>

#include "camo/commands.hpp"
#include "camo/tensor_io.hpp"
#include "cli_common.hpp"

namespace camo {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDemoInputChannels = 3;

Tensor5 scaled_gaussian(Shape5 shape, Rng& rng, double scale) {
    Tensor5 t(shape);
    for (double& v : t.data()) v = rng.normal() * scale;
    return t;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

class StageLog {
public:
    StageLog(DemoReport& report, double scale, fs::path dump_dir)
        : report_(report), scale_(scale), dump_dir_(std::move(dump_dir)) {}

    Tensor5 check(const std::string& stage, Tensor5 t, const Shape5& expected) {
        report_.stages.push_back({scale_, stage, t.shape(), expected});
        if (t.shape() != expected) {
            throw ShapeError(fmt::format("demo stage '{}' at scale {}: got {}, expected {}", stage,
                                         scale_, t.shape().str(), expected.str()));
        }
        if (!t.all_finite()) {
            throw ShapeError(fmt::format("demo stage '{}' at scale {}: non-finite values", stage, scale_));
        }
        if (!dump_dir_.empty()) {
            save_tensor(dump_dir_ / fmt::format("{:02}_{}.cst5", index_, stage), t);
        }
        ++index_;
        return t;
    }

private:
    DemoReport& report_;
    double scale_;
    fs::path dump_dir_;
    int index_ = 0;
};

}  // namespace

DemoReport run_demo(const RunConfig& config) {
    validate_config(config);
    const std::size_t c = config.dim;
    const std::size_t k = config.k_pts;
    const std::size_t side = config.demo_frame_size;

    // Parameters are shared across scales; only the clip is resized.
    Rng clip_rng = Rng::stream(config.seed, "demo.clip");
    const Tensor5 clip = scaled_gaussian({1, kDemoInputChannels, kWindowLength, side, side}, clip_rng, 1.0);
    Rng embed_rng = Rng::stream(config.seed, "demo.embed");
    const ConvSpec3D embed = make_conv_spec(
        scaled_gaussian({c, kDemoInputChannels, 1, 1, 1}, embed_rng,
                        1.0 / std::sqrt(static_cast<double>(kDemoInputChannels))),
        0.0);
    const PrimitiveBank bank = gaussian_bank(config.n_pairs, c, config.seed);
    Rng attn_rng = Rng::stream(config.seed, "mfs.attention");
    const AttentionSpec attn = make_attention_spec(c, config.concept_mode, attn_rng);
    Rng cdc_rng = Rng::stream(config.seed, "cdc3d.weights");
    const ConvSpec3D cdc = make_conv_spec(
        scaled_gaussian({c, c, 3, 3, 3}, cdc_rng, 1.0 / std::sqrt(static_cast<double>(c * 27))),
        config.theta);
    Rng taa_rng = Rng::stream(config.seed, "taa.params");
    const TaaSpec taa = make_taa_spec(c, k, taa_rng);
    Rng head_rng = Rng::stream(config.seed, "demo.head");
    const ConvSpec3D head = make_conv_spec(
        scaled_gaussian({1, c, 1, 1, 1}, head_rng, 1.0 / std::sqrt(static_cast<double>(c))), 0.0);

    const Matrix concepts = mix_primitives(bank, config.concept_mode);
    const std::size_t m = concepts.rows;

    DemoReport report;
    for (double scale : kWindowScales) {
        fs::path dump_dir;
        if (!config.out_dir.empty()) {
            dump_dir = config.out_dir / "demo" / fmt::format("scale_{}", scale);
            fs::create_directories(dump_dir);
        }
        StageLog log(report, scale, dump_dir);
        const auto hs = static_cast<std::size_t>(std::llround(scale * static_cast<double>(side)));
        const Shape5 feat{1, c, kWindowLength, hs, hs};

        const Tensor5 input = log.check("input", resize_bilinear_spatial(clip, scale),
                                         {1, kDemoInputChannels, kWindowLength, hs, hs});
        const Tensor5 embedded = log.check("embed", conv3d(input, embed), feat);
        log.check("concepts", Tensor5({1, 1, 1, m, c}, concepts.data), {1, 1, 1, m, c});
        const Tensor5 f_s = log.check("mfs_attention", augmented_attention(embedded, concepts, attn), feat);
        const Tensor5 f_t = log.check("cdcst", cdc3d_forward_unified(f_s, cdc), feat);
        const Tensor5 plain = log.check("plain_conv", conv3d(f_s, cdc), feat);
        report.theta_zero_gap.push_back(max_abs_diff(f_t, plain));

        const Trajectory traj = predict_trajectory(f_t, taa);
        log.check("offsets", traj.offsets.values, {1, 2 * k, kWindowLength, hs, hs});
        log.check("mask", traj.mask.values, {1, 1, kWindowLength, hs, hs});
        const Tensor5 sampled = log.check("deform_sample", deform_sample(f_s, traj.offsets, k), feat);
        const Tensor5 fused = log.check(
            "taa_fuse", modulate_and_fuse(f_t, sampled, traj.mask, taa.fuse_weights, taa.fuse_bias), feat);
        Tensor5 pred = conv3d(fused, head);
        for (double& v : pred.data()) v = sigmoid(v);
        log.check("prediction", pred, {1, 1, kWindowLength, hs, hs});
    }
    return report;
}

int cmd_demo(const RunConfig& config) {
    return cli::guarded("demo", [&] {
        DemoReport report;
        try {
            report = run_demo(config);
        } catch (const ShapeError& e) {
            spdlog::error("demo: {}", e.what());
            return static_cast<int>(ExitCode::kVerification);
        }
        for (const DemoStage& s : report.stages) {
            fmt::print("scale={:<4} {:<14} {}\n", s.scale, s.stage, s.shape.str());
        }
        for (std::size_t i = 0; i < report.theta_zero_gap.size(); ++i) {
            spdlog::info("scale {}: max |cdcst - plain_conv| = {:.3e} (theta = {})", kWindowScales[i],
                         report.theta_zero_gap[i], config.theta);
        }
        spdlog::info("demo: {} stage(s) matched their shape contracts", report.stages.size());
        return static_cast<int>(ExitCode::kOk);
    });
}

}  // namespace camo
