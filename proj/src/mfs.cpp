#include "camo/mfs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "camo/error.hpp"
#include "camo/tensor_io.hpp"

namespace camo {

std::string_view to_string(ConceptMode mode) noexcept {
    return mode == ConceptMode::kSumSingleToken ? "sum_single_token" : "per_pair_tokens";
}

ConceptMode parse_concept_mode(std::string_view text) {
    if (text == "sum_single_token") return ConceptMode::kSumSingleToken;
    if (text == "per_pair_tokens") return ConceptMode::kPerPairTokens;
    throw std::invalid_argument(fmt::format(
        "unknown concept mode '{}' (expected sum_single_token or per_pair_tokens)", text));
}

void validate_bank(const PrimitiveBank& bank) {
    if (bank.neg.rows != bank.pos.rows || bank.neg.cols != bank.pos.cols ||
        bank.logits.size() != bank.pos.rows) {
        throw ShapeError(fmt::format("primitive bank mismatch: pos {}x{}, neg {}x{}, {} logits",
                                     bank.pos.rows, bank.pos.cols, bank.neg.rows, bank.neg.cols,
                                     bank.logits.size()));
    }
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(bank.pos.data) || !finite(bank.neg.data) || !finite(bank.logits)) {
        throw std::invalid_argument("primitive bank holds non-finite values");
    }
}

PrimitiveBank gaussian_bank(std::size_t n_pairs, std::size_t dim, std::uint64_t seed) {
    PrimitiveBank bank;
    const Tensor5 pos = gaussian_init({1, 1, 1, n_pairs, dim}, Rng::stream(seed, "sbp.pos").key());
    const Tensor5 neg = gaussian_init({1, 1, 1, n_pairs, dim}, Rng::stream(seed, "sbp.neg").key());
    bank.pos = Matrix(n_pairs, dim, pos.buffer());
    bank.neg = Matrix(n_pairs, dim, neg.buffer());
    bank.logits.assign(n_pairs, 0.0);
    return bank;
}

double mixing_weight(double logit) noexcept {
    if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
    const double e = std::exp(logit);
    return e / (1.0 + e);
}

namespace {

// c = a * b, row-major, i-k-j loop order.
Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = a(i, k);
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix first_rows(const Matrix& m, std::size_t rows) {
    return Matrix(rows, m.cols,
                  std::vector<double>(m.data.begin(),
                                      m.data.begin() + static_cast<std::ptrdiff_t>(rows * m.cols)));
}

// Softmax rows of (X_q W_q)(X W_k)^T / sqrt(d_k) for the first `rows` query rows.
Matrix softmax_scores(const Matrix& x, std::size_t rows, const AttentionSpec& spec) {
    const Matrix q = matmul(first_rows(x, rows), spec.w_q);
    const Matrix k = matmul(x, spec.w_k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.d_k));
    Matrix a(rows, x.rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto qi = q.row(i);
        auto ai = a.row(i);
        for (std::size_t j = 0; j < x.rows; ++j) {
            const auto kj = k.row(j);
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols; ++c) dot += qi[c] * kj[c];
            ai[j] = dot * scale;
        }
        const double mx = *std::max_element(ai.begin(), ai.end());
        double total = 0.0;
        for (double& v : ai) {
            v = std::exp(v - mx);
            total += v;
        }
        for (double& v : ai) v /= total;
    }
    return a;
}

Matrix attend(const Matrix& x, std::size_t rows, const AttentionSpec& spec) {
    if (x.cols != spec.dim()) {
        throw ShapeError(fmt::format("tokens have {} channels, attention expects {}", x.cols,
                                     spec.dim()));
    }
    if (rows == 0) return Matrix(0, x.cols);
    const Matrix a = softmax_scores(x, rows, spec);
    const Matrix v = matmul(x, spec.w_v);
    return matmul(a, v);
}

Matrix random_square(std::size_t n, Rng& rng) {
    Matrix m(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (double& v : m.data) v = rng.normal() * scale;
    return m;
}

}  // namespace

Matrix mix_primitives(const PrimitiveBank& bank, ConceptMode mode) {
    validate_bank(bank);
    const std::size_t n = bank.n_pairs();
    const std::size_t c = bank.dim();
    Matrix tokens(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        const double alpha = mixing_weight(bank.logits[i]);
        for (std::size_t k = 0; k < c; ++k) {
            tokens(i, k) = bank.neg(i, k) + alpha * (bank.pos(i, k) - bank.neg(i, k));
        }
    }
    if (mode == ConceptMode::kPerPairTokens) return tokens;
    Matrix single(1, c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c; ++k) single(0, k) += tokens(i, k);
    }
    return single;
}

AttentionSpec make_attention_spec(std::size_t dim, ConceptMode mode, Rng& rng) {
    if (dim == 0) throw std::invalid_argument("attention dimension must be positive");
    AttentionSpec spec;
    spec.w_q = random_square(dim, rng);
    spec.w_k = random_square(dim, rng);
    spec.w_v = random_square(dim, rng);
    spec.w_inject = random_square(dim, rng);
    spec.d_k = dim;
    spec.concept_mode = mode;
    return spec;
}

AttentionSpec identity_attention_spec(std::size_t dim) {
    AttentionSpec spec;
    spec.w_q = spec.w_k = spec.w_v = spec.w_inject = Matrix::identity(dim);
    spec.d_k = dim;
    return spec;
}

void validate_attention(const AttentionSpec& spec) {
    const std::size_t c = spec.w_q.rows;
    for (const Matrix* m : {&spec.w_q, &spec.w_k, &spec.w_v, &spec.w_inject}) {
        if (m->rows != c || m->cols != c) {
            throw ShapeError(fmt::format("attention projections must all be {0}x{0}", c));
        }
    }
    if (c == 0) throw ShapeError("attention dimension must be positive");
    if (spec.d_k != c) {
        throw std::invalid_argument(fmt::format("d_k must equal C = {}, got {}", c, spec.d_k));
    }
}

Matrix augment_tokens(const Matrix& tokens, const Matrix& concepts, const AttentionSpec& spec) {
    validate_attention(spec);
    if (tokens.cols != spec.dim() || (concepts.rows > 0 && concepts.cols != spec.dim())) {
        throw ShapeError(fmt::format("tokens ({}) and concepts ({}) must have C = {} channels",
                                     tokens.cols, concepts.cols, spec.dim()));
    }
    Matrix x(tokens.rows + concepts.rows, spec.dim());
    std::copy(tokens.data.begin(), tokens.data.end(), x.data.begin());
    if (concepts.rows > 0) {
        const Matrix injected = matmul(concepts, spec.w_inject);
        std::copy(injected.data.begin(), injected.data.end(),
                  x.data.begin() + static_cast<std::ptrdiff_t>(tokens.data.size()));
    }
    return x;
}

Matrix attention_weights(const Matrix& x, const AttentionSpec& spec) {
    validate_attention(spec);
    return softmax_scores(x, x.rows, spec);
}

Matrix attention_rows(const Matrix& x, const AttentionSpec& spec) {
    validate_attention(spec);
    return attend(x, x.rows, spec);
}

Matrix frame_tokens(const Tensor5& x, std::size_t n, std::size_t t) {
    const Shape5 s = x.shape();
    const std::size_t hw = s.h * s.w;
    Matrix m(hw, s.c);
    for (std::size_t c = 0; c < s.c; ++c) {
        const auto p = x.plane(n, c, t);
        for (std::size_t i = 0; i < hw; ++i) m(i, c) = p[i];
    }
    return m;
}

void store_frame_tokens(Tensor5& x, std::size_t n, std::size_t t, const Matrix& tokens) {
    const Shape5 s = x.shape();
    const std::size_t hw = s.h * s.w;
    for (std::size_t c = 0; c < s.c; ++c) {
        auto p = x.plane(n, c, t);
        for (std::size_t i = 0; i < hw; ++i) p[i] = tokens(i, c);
    }
}

Tensor5 augmented_attention(const Tensor5& f_s, const Matrix& concepts, const AttentionSpec& spec) {
    validate_attention(spec);
    const Shape5 s = f_s.shape();
    if (s.c != spec.dim()) {
        throw ShapeError(fmt::format("F_s has {} channels, attention expects {}", s.c, spec.dim()));
    }
    Tensor5 out(s);
    const auto frames = static_cast<std::ptrdiff_t>(s.n * s.t);
    // Frames are independent; each output frame is written by one task.
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t nt = 0; nt < frames; ++nt) {
        const std::size_t n = static_cast<std::size_t>(nt) / s.t;
        const std::size_t t = static_cast<std::size_t>(nt) % s.t;
        const Matrix tokens = frame_tokens(f_s, n, t);
        const Matrix x = augment_tokens(tokens, concepts, spec);
        store_frame_tokens(out, n, t, attend(x, tokens.rows, spec));
    }
    return out;
}

void write_bank(std::ostream& os, const PrimitiveBank& bank, ConceptMode mode) {
    validate_bank(bank);
    const nlohmann::json header = {{"format", "sbp-bank/1"},
                                   {"n_pairs", bank.n_pairs()},
                                   {"dim", bank.dim()},
                                   {"mode", std::string(to_string(mode))}};
    os << header.dump() << '\n';
    const std::size_t n = bank.n_pairs();
    const std::size_t c = bank.dim();
    write_tensor(os, Tensor5({1, 1, 1, n, c}, bank.pos.data));
    write_tensor(os, Tensor5({1, 1, 1, n, c}, bank.neg.data));
    write_tensor(os, Tensor5({1, 1, 1, 1, n}, bank.logits));
}

PrimitiveBank read_bank(std::istream& is, ConceptMode* mode) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("primitive bank: missing JSON header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(fmt::format("primitive bank header: {}", e.what()));
    }
    if (header.value("format", "") != "sbp-bank/1" || !header.contains("n_pairs") ||
        !header.contains("dim") || !header.contains("mode")) {
        throw SchemaError("primitive bank header must carry format, n_pairs, dim, mode");
    }
    const auto n = header["n_pairs"].get<std::size_t>();
    const auto c = header["dim"].get<std::size_t>();
    const ConceptMode parsed = parse_concept_mode(header["mode"].get<std::string>());
    const Tensor5 pos = read_tensor(is);
    const Tensor5 neg = read_tensor(is);
    const Tensor5 logits = read_tensor(is);
    const Shape5 expect_pc{1, 1, 1, n, c};
    const Shape5 expect_l{1, 1, 1, 1, n};
    if (pos.shape() != expect_pc || neg.shape() != expect_pc || logits.shape() != expect_l) {
        throw SchemaError("primitive bank payload extents disagree with the header");
    }
    PrimitiveBank bank{Matrix(n, c, pos.buffer()), Matrix(n, c, neg.buffer()), logits.buffer()};
    validate_bank(bank);
    if (mode != nullptr) *mode = parsed;
    return bank;
}

void save_bank(const std::filesystem::path& path, const PrimitiveBank& bank, ConceptMode mode) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    write_bank(os, bank, mode);
}

PrimitiveBank load_bank(const std::filesystem::path& path, ConceptMode* mode) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingDataError(fmt::format("cannot open {}", path.string()), {path.string()});
    return read_bank(is, mode);
}

}  // namespace camo
