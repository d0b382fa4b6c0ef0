#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "camo/cdc3d.hpp"
#include "camo/dataset.hpp"
#include "camo/mfs.hpp"
#include "camo/taa.hpp"

namespace camo {

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path pred_root;
    std::filesystem::path out_dir;
    double theta = kDefaultTheta;
    std::size_t k_pts = kDefaultSamplingPoints;
    ConceptMode concept_mode = ConceptMode::kPerPairTokens;
    std::size_t n_pairs = kDefaultPrimitivePairs;
    std::size_t dim = kDefaultPrimitiveDim;
    std::uint64_t seed = 0;
    int workers = 0;  // 0: OpenMP default
    DensityNorm normalization = DensityNorm::kMaxOne;

    std::string split = "test";            // eval: test | train | all
    std::size_t density_h = 128;           // density grid
    std::size_t density_w = 128;
    std::size_t gradcheck_seeds = 5;       // seeds derived from `seed`
    std::size_t bench_repeats = 11;
    bool bench_quick = false;              // only the acceptance shape
    std::size_t demo_frame_size = 8;       // base H = W of the synthetic clip
};

/// Throws std::invalid_argument when a value is out of range.
void validate_config(const RunConfig& config);

/// Applies `workers` to OpenMP (no-op for 0).
void apply_workers(int workers);

/// Reads CAMO_STK_LOG (trace, debug, info, warn, error, off) into spdlog.
void init_logging();

// Each command returns the process exit code (see ExitCode).
int cmd_eval(const RunConfig& config);
int cmd_density(const RunConfig& config);
int cmd_gradcheck(const RunConfig& config);
int cmd_bench(const RunConfig& config);
int cmd_demo(const RunConfig& config);

// ---- gradcheck -----------------------------------------------------------

inline constexpr double kGradcheckEpsilon = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradcheckFloor = 1e-3;

struct GradientHooks {
    std::function<Cdc3dGrads(const Tensor5&, const ConvSpec3D&, const Tensor5&)> cdc3d_backward =
        camo::cdc3d_backward;
    std::function<DeformGrads(const Tensor5&, const OffsetField&, const Tensor5&)> deform_backward =
        camo::deform_sample_backward;
};

struct GradcheckResult {
    std::string op;        // e.g. "cdc3d.grad_x"
    std::string case_name; // geometry description
    std::uint64_t seed = 0;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;  // linear index of the worst element
    std::string worst_coord;      // (n,c,t,h,w) of the worst element
    bool passed = false;
};

std::vector<GradcheckResult> run_gradcheck(std::uint64_t root_seed, std::size_t seeds,
                                           double theta, const GradientHooks& hooks = {});
int cmd_gradcheck(const RunConfig& config, const GradientHooks& hooks);

// ---- bench ---------------------------------------------------------------

struct BenchRow {
    std::string shape;
    std::string form;  // plain | unified | fusion | deform_sample
    double theta = 0.0;
    double median_ns = 0.0;
    double ns_per_elem = 0.0;
};

/// Median-of-`repeats` wall times for every form on the documented shapes.
std::vector<BenchRow> run_bench(const RunConfig& config);
std::string bench_csv(const std::vector<BenchRow>& rows);

// ---- demo ----------------------------------------------------------------

struct DemoStage {
    double scale = 1.0;
    std::string stage;
    Shape5 shape;
    Shape5 expected;
};

struct DemoReport {
    std::vector<DemoStage> stages;
    /// max |cdcst - plain_conv| per scale, in scale order.
    std::vector<double> theta_zero_gap;
};

/// Runs the miniature pipeline at every window scale; writes dumps under
/// out_dir/demo when out_dir is set. Throws ShapeError naming the stage on a
/// contract violation.
DemoReport run_demo(const RunConfig& config);

// ---- eval ----------------------------------------------------------------

/// Prediction file for a gt mask: <pred_root>/<clip_id>/<gt file name>.
std::filesystem::path prediction_path(const std::filesystem::path& pred_root,
                                      const ClipManifest& clip, std::size_t frame);

}  // namespace camo
