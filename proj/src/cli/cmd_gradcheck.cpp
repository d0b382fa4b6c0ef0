#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "camo/commands.hpp"
#include "cli_common.hpp"

namespace camo {

namespace {

double dot(const Tensor5& a, const Tensor5& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::string coord_string(const Tensor5& t, std::size_t linear) {
    const auto i = t.unindex(linear);
    return fmt::format("({},{},{},{},{})", i[0], i[1], i[2], i[3], i[4]);
}

// Compares an analytic gradient of loss(x) against central differences over
// every element of x. x is perturbed in place and restored.
GradcheckResult compare(std::string op, std::string case_name, std::uint64_t seed, Tensor5& x,
                        const Tensor5& analytic, const std::function<double()>& loss) {
    GradcheckResult r{std::move(op), std::move(case_name), seed, 0.0, 0, "", true};
    if (analytic.shape() != x.shape()) {
        r.passed = false;
        r.max_rel_error = INFINITY;
        r.worst_coord = fmt::format("shape {} vs {}", analytic.shape().str(), x.shape().str());
        return r;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + kGradcheckEpsilon;
        const double up = loss();
        x[i] = saved - kGradcheckEpsilon;
        const double down = loss();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * kGradcheckEpsilon);
        const double a = analytic[i];
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
        if (!(rel <= r.max_rel_error)) {
            r.max_rel_error = rel;
            r.worst_index = i;
        }
    }
    r.worst_coord = coord_string(x, r.worst_index);
    r.passed = r.max_rel_error < kGradcheckTolerance;
    return r;
}

struct ConvCase {
    const char* name;
    Shape5 x;
    std::size_t c_out;
    Extent3 kernel;
    Extent3 stride;
    Extent3 padding;
    Extent3 dilation;
};

constexpr ConvCase kConvCases[] = {
    {"2->3 k333 same", {1, 2, 3, 5, 5}, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}},
    {"1->2 k333 stride2 pad0", {2, 1, 5, 6, 5}, 2, {3, 3, 3}, {2, 2, 2}, {0, 0, 0}, {1, 1, 1}},
    {"2->2 k132 dil2 pad2", {1, 2, 4, 6, 7}, 2, {1, 3, 2}, {1, 1, 2}, {0, 2, 2}, {1, 2, 2}},
};

struct DeformCase {
    const char* name;
    Shape5 fs;
    std::size_t k_pts;
    int span;  // integer offset parts drawn from [-span, span)
};

constexpr DeformCase kDeformCases[] = {
    {"k9 interior", {1, 2, 2, 5, 5}, 9, 1},
    {"k9 border", {2, 1, 1, 4, 3}, 9, 3},
    {"k1", {1, 3, 2, 4, 4}, 1, 2},
};

Tensor5 random_tensor(Shape5 shape, Rng& rng) {
    Tensor5 t(shape);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

void conv_suite(std::uint64_t seed, double theta, const GradientHooks& hooks,
                std::vector<GradcheckResult>& out) {
    for (const ConvCase& c : kConvCases) {
        Rng rng = Rng::stream(seed, fmt::format("gradcheck.cdc3d.{}", c.name));
        Tensor5 x = random_tensor(c.x, rng);
        ConvSpec3D spec;
        spec.weights = random_tensor({c.c_out, c.x.c, c.kernel.t, c.kernel.h, c.kernel.w}, rng);
        spec.theta = theta;
        spec.stride = c.stride;
        spec.padding = c.padding;
        spec.dilation = c.dilation;
        const Tensor5 g = random_tensor(conv_output_shape(c.x, spec), rng);

        const Cdc3dGrads grads = hooks.cdc3d_backward(x, spec, g);
        auto loss = [&] { return dot(g, cdc3d_forward_unified(x, spec)); };
        out.push_back(compare("cdc3d.grad_x", c.name, seed, x, grads.grad_x, loss));
        out.push_back(compare("cdc3d.grad_w", c.name, seed, spec.weights, grads.grad_w, loss));
    }
}

void deform_suite(std::uint64_t seed, const GradientHooks& hooks,
                  std::vector<GradcheckResult>& out) {
    for (const DeformCase& c : kDeformCases) {
        Rng rng = Rng::stream(seed, fmt::format("gradcheck.deform.{}", c.name));
        Tensor5 fs = random_tensor(c.fs, rng);
        // Fractional parts in [0.25, 0.75] keep every sample coordinate at
        // least 0.25 from an integer, where the bilinear kernel has a kink.
        OffsetField off{Tensor5({c.fs.n, 2 * c.k_pts, c.fs.t, c.fs.h, c.fs.w})};
        for (double& v : off.values.data()) {
            const auto whole = static_cast<double>(rng.below(static_cast<std::uint64_t>(2 * c.span))) -
                               static_cast<double>(c.span);
            v = whole + rng.uniform(0.25, 0.75);
        }
        const Tensor5 g = random_tensor(c.fs, rng);

        const DeformGrads grads = hooks.deform_backward(fs, off, g);
        auto loss = [&] { return dot(g, deform_sample(fs, off, c.k_pts)); };
        out.push_back(compare("deform.grad_fs", c.name, seed, fs, grads.grad_fs, loss));
        out.push_back(compare("deform.grad_off", c.name, seed, off.values, grads.grad_off, loss));
    }
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(std::uint64_t root_seed, std::size_t seeds, double theta,
                                           const GradientHooks& hooks) {
    std::vector<GradcheckResult> results;
    for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t seed = root_seed + s;
        conv_suite(seed, theta, hooks, results);
        deform_suite(seed, hooks, results);
    }
    return results;
}

int cmd_gradcheck(const RunConfig& config, const GradientHooks& hooks) {
    return cli::guarded("gradcheck", [&] {
        validate_config(config);
        apply_workers(config.workers);
        const auto results = run_gradcheck(config.seed, config.gradcheck_seeds, config.theta, hooks);

        std::string csv = "op,case,seed,max_rel_error,worst_coord,status\n";
        std::size_t failures = 0;
        for (const GradcheckResult& r : results) {
            const char* status = r.passed ? "ok" : "FAIL";
            fmt::print("{:<16} {:<24} seed={:<4} max_rel={:.3e} {}\n", r.op, r.case_name, r.seed,
                       r.max_rel_error, status);
            csv += fmt::format("{},{},{},{:.6e},{},{}\n", r.op, cli::csv_field(r.case_name), r.seed,
                               r.max_rel_error, cli::csv_field(r.worst_coord), status);
            if (!r.passed) {
                ++failures;
                spdlog::error("gradcheck failed: op={} case={} seed={} coord={} rel_error={:.3e}",
                              r.op, r.case_name, r.seed, r.worst_coord, r.max_rel_error);
            }
        }
        if (!config.out_dir.empty()) {
            cli::write_text(cli::require_out_dir(config.out_dir, "gradcheck") / "gradcheck.csv", csv);
        }
        if (failures > 0) return static_cast<int>(ExitCode::kVerification);
        spdlog::info("gradcheck: {} check(s) passed", results.size());
        return static_cast<int>(ExitCode::kOk);
    });
}

int cmd_gradcheck(const RunConfig& config) { return cmd_gradcheck(config, GradientHooks{}); }

}  // namespace camo
