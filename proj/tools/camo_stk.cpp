// camo-stk: evaluation, density analysis, gradient checks, operator benchmarks
// and a miniature forward pass.

#include <CLI11.hpp>

#include <spdlog/spdlog.h>

#include "camo/commands.hpp"
#include "camo/error.hpp"

namespace {

void add_common(CLI::App* cmd, camo::RunConfig& c) {
    cmd->add_option("--out", c.out_dir, "Output directory");
    cmd->add_option("--seed", c.seed, "Root seed");
    cmd->add_option("--workers", c.workers, "OpenMP threads (0: runtime default)");
}

void add_model(CLI::App* cmd, camo::RunConfig& c, std::string& mode) {
    cmd->add_option("--theta", c.theta, "3D-CDCST difference weight")->capture_default_str();
    cmd->add_option("--kpts", c.k_pts, "TAA sampling points (odd square)")->capture_default_str();
    cmd->add_option("--dim", c.dim, "Primitive / feature dimension")->capture_default_str();
    cmd->add_option("--npairs", c.n_pairs, "Primitive pairs")->capture_default_str();
    cmd->add_option("--concept-mode", mode, "per_pair_tokens | sum_single_token")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    camo::init_logging();
    camo::RunConfig config;
    std::string concept_mode{camo::to_string(config.concept_mode)};
    std::string normalization{camo::to_string(config.normalization)};

    CLI::App app{"Video camouflaged object detection toolkit"};
    app.set_config("--config", "", "TOML/INI file with option values");
    app.require_subcommand(1);

    auto* eval = app.add_subcommand("eval", "Score prediction masks against a manifest");
    eval->add_option("--manifest", config.manifest, "Dataset manifest (JSON)")->required();
    eval->add_option("--pred", config.pred_root, "Prediction root: <pred>/<clip_id>/<mask>.png")
        ->required();
    eval->add_option("--split", config.split, "test | train | all")->capture_default_str();
    add_common(eval, config);

    auto* density = app.add_subcommand("density", "Foreground density maps per split");
    density->add_option("--manifest", config.manifest, "Dataset manifest (JSON)")->required();
    density->add_option("--normalization", normalization, "max_one | sum_one")->capture_default_str();
    density->add_option("--height", config.density_h, "Grid height")->capture_default_str();
    density->add_option("--width", config.density_w, "Grid width")->capture_default_str();
    add_common(density, config);

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of the backward passes");
    gradcheck->add_option("--theta", config.theta, "3D-CDCST difference weight")->capture_default_str();
    gradcheck->add_option("--seeds", config.gradcheck_seeds, "Seeds seed, seed+1, ...")
        ->capture_default_str();
    add_common(gradcheck, config);

    auto* bench = app.add_subcommand("bench", "Median timings of the convolution and sampling kernels");
    bench->add_option("--theta", config.theta, "3D-CDCST difference weight")->capture_default_str();
    bench->add_option("--kpts", config.k_pts, "TAA sampling points")->capture_default_str();
    bench->add_option("--repeats", config.bench_repeats, "Timed repetitions")->capture_default_str();
    bench->add_flag("--quick", config.bench_quick, "Only the (1,8,5,64,64) shape");
    add_common(bench, config);

    auto* demo = app.add_subcommand("demo", "Miniature forward pass with shape checks");
    add_model(demo, config, concept_mode);
    demo->add_option("--frame-size", config.demo_frame_size, "Base frame side")->capture_default_str();
    add_common(demo, config);

    try {
        app.parse(argc, argv);
        config.concept_mode = camo::parse_concept_mode(concept_mode);
        config.normalization = camo::parse_density_norm(normalization);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(camo::ExitCode::kConfig);
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(camo::ExitCode::kConfig);
    }

    if (eval->parsed()) return camo::cmd_eval(config);
    if (density->parsed()) return camo::cmd_density(config);
    if (gradcheck->parsed()) return camo::cmd_gradcheck(config);
    if (bench->parsed()) return camo::cmd_bench(config);
    return camo::cmd_demo(config);
}
