#include "cli_common.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <omp.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "camo/commands.hpp"

namespace camo {

void validate_config(const RunConfig& c) {
    if (!(c.theta >= 0.0 && c.theta <= 1.0)) {
        throw std::invalid_argument(fmt::format("--theta must lie in [0, 1], got {}", c.theta));
    }
    if (c.dim < 1) throw std::invalid_argument("--dim must be at least 1");
    if (c.n_pairs < 1) throw std::invalid_argument("--npairs must be at least 1");
    if (c.workers < 0) throw std::invalid_argument("--workers must be non-negative");
    base_grid(c.k_pts);
    if (c.split != "test" && c.split != "train" && c.split != "all") {
        throw std::invalid_argument(fmt::format("--split must be test, train or all, got {}", c.split));
    }
    if (c.density_h == 0 || c.density_w == 0) throw std::invalid_argument("density grid must be non-empty");
    if (c.gradcheck_seeds == 0) throw std::invalid_argument("gradcheck needs at least one seed");
    if (c.bench_repeats == 0) throw std::invalid_argument("bench needs at least one repeat");
    if (c.demo_frame_size < 2) throw std::invalid_argument("demo frame size must be at least 2");
}

void apply_workers(int workers) {
    if (workers > 0) omp_set_num_threads(workers);
}

void init_logging() {
    auto logger = spdlog::get("camo-stk");
    if (!logger) logger = spdlog::stderr_color_mt("camo-stk");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("CAMO_STK_LOG")) spdlog::cfg::helpers::load_levels(env);
}

namespace cli {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    os << text;
    if (!os) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

std::filesystem::path require_out_dir(const std::filesystem::path& out_dir, const char* command) {
    if (out_dir.empty()) throw std::invalid_argument(fmt::format("{} requires --out", command));
    std::filesystem::create_directories(out_dir);
    return out_dir;
}

std::string csv_metric_header() {
    return "clip,frames,s_alpha,f_max,f_beta_w,e_m,mae,m_dice,m_iou\n";
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string csv_metric_row(const std::string& label, const MetricReport& r) {
    return fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", csv_field(label),
                       r.frame_count, r.s_alpha, r.f_max, r.f_beta_w, r.e_m, r.mae, r.m_dice,
                       r.m_iou);
}

}  // namespace cli
}  // namespace camo
