#include <cmath>
#include <vector>

#include "camo/mfs.hpp"

namespace camo {

Matrix attention_oracle(const Matrix& x, const AttentionSpec& spec) {
    const std::size_t rows = x.rows;
    const std::size_t c = x.cols;
    auto project = [&](const Matrix& w, std::size_t r, std::size_t col) {
        double acc = 0.0;
        for (std::size_t k = 0; k < c; ++k) acc += x(r, k) * w(k, col);
        return acc;
    };
    Matrix out(rows, c);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> logits(rows);
        for (std::size_t j = 0; j < rows; ++j) {
            double dot = 0.0;
            for (std::size_t col = 0; col < c; ++col) {
                dot += project(spec.w_q, i, col) * project(spec.w_k, j, col);
            }
            logits[j] = dot / std::sqrt(static_cast<double>(spec.d_k));
        }
        double peak = logits[0];
        for (double l : logits) peak = l > peak ? l : peak;
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - peak);
        for (std::size_t j = 0; j < rows; ++j) {
            const double a = std::exp(logits[j] - peak) / denom;
            for (std::size_t col = 0; col < c; ++col) out(i, col) += a * project(spec.w_v, j, col);
        }
    }
    return out;
}

}  // namespace camo
