#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace camo {

/// Row-major dense matrix; rows are token vectors throughout the attention code.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        assert(data.size() == r * c);
    }

    double& operator()(std::size_t r, std::size_t c) noexcept {
        assert(r < rows && c < cols);
        return data[r * cols + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < rows && c < cols);
        return data[r * cols + c];
    }

    std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data.data() + r * cols, cols};
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace camo
