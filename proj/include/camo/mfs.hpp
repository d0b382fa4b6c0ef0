#pragma once

// Motion feature stabilization: paired semantic basis primitives are mixed
// convexly into concept tokens, which are appended to each frame's spatial
// tokens before a single-head self-attention pass.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "camo/matrix.hpp"
#include "camo/rng.hpp"
#include "camo/tensor.hpp"

namespace camo {

/// Primitive dimension reported as the best trade-off.
inline constexpr std::size_t kDefaultPrimitiveDim = 384;
inline constexpr std::size_t kDefaultPrimitivePairs = 8;

enum class ConceptMode {
    kSumSingleToken,  // one token: sum_i [a_i p+_i + (1 - a_i) p-_i]
    kPerPairTokens,   // N tokens: c_i = a_i p+_i + (1 - a_i) p-_i, evaluated as p-_i + a_i (p+_i - p-_i)
};

std::string_view to_string(ConceptMode mode) noexcept;
/// Accepts "sum_single_token" and "per_pair_tokens".
ConceptMode parse_concept_mode(std::string_view text);

struct PrimitiveBank {
    Matrix pos;                 // N x C
    Matrix neg;                 // N x C
    std::vector<double> logits; // N

    std::size_t n_pairs() const noexcept { return pos.rows; }
    std::size_t dim() const noexcept { return pos.cols; }
};

void validate_bank(const PrimitiveBank& bank);

/// p+ and p- drawn from N(0, 1); logits start at zero (alpha = 0.5).
PrimitiveBank gaussian_bank(std::size_t n_pairs, std::size_t dim, std::uint64_t seed);

/// alpha = sigmoid(logit).
double mixing_weight(double logit) noexcept;

/// M x C concept tokens (M = 1 or N depending on mode).
Matrix mix_primitives(const PrimitiveBank& bank, ConceptMode mode);

struct AttentionSpec {
    Matrix w_q;       // C x C, row-vector convention: Q' = X W_q
    Matrix w_k;       // C x C
    Matrix w_v;       // C x C
    Matrix w_inject;  // C x C, Linear(C) = C W_inject
    std::size_t d_k = 0;
    ConceptMode concept_mode = ConceptMode::kPerPairTokens;

    std::size_t dim() const noexcept { return w_q.rows; }
};

/// Random projections with entries ~ N(0, 1/C), d_k = C.
AttentionSpec make_attention_spec(std::size_t dim, ConceptMode mode, Rng& rng);
AttentionSpec identity_attention_spec(std::size_t dim);

void validate_attention(const AttentionSpec& spec);

/// X = [tokens; concepts * W_inject].
Matrix augment_tokens(const Matrix& tokens, const Matrix& concepts, const AttentionSpec& spec);

/// Row-wise softmax(X W_q (X W_k)^T / sqrt(d_k)) over all rows of X.
Matrix attention_weights(const Matrix& x, const AttentionSpec& spec);

/// Full (L + M) x C attention output for an already augmented token matrix.
Matrix attention_rows(const Matrix& x, const AttentionSpec& spec);

/// Per frame (n, t): the H*W spatial tokens are augmented with the projected
/// concepts, attended, and the first H*W output rows are written back in the
/// spatial layout. Concept rows have no spatial home and are dropped.
Tensor5 augmented_attention(const Tensor5& f_s, const Matrix& concepts, const AttentionSpec& spec);

/// Tokens of one frame as an (H*W) x C matrix, and back.
Matrix frame_tokens(const Tensor5& x, std::size_t n, std::size_t t);
void store_frame_tokens(Tensor5& x, std::size_t n, std::size_t t, const Matrix& tokens);

/// Naive triple-loop attention with an explicit softmax, independent of the
/// blocked kernel above. Intended for cross-checking on small inputs.
Matrix attention_oracle(const Matrix& x_rows, const AttentionSpec& spec);

// Bank serialization: one JSON line {"format":"sbp-bank/1","n_pairs":N,"dim":C,"mode":...}
// followed by three tensor dumps: pos (1,1,1,N,C), neg (1,1,1,N,C), logits (1,1,1,1,N).
void write_bank(std::ostream& os, const PrimitiveBank& bank, ConceptMode mode);
PrimitiveBank read_bank(std::istream& is, ConceptMode* mode = nullptr);
void save_bank(const std::filesystem::path& path, const PrimitiveBank& bank, ConceptMode mode);
PrimitiveBank load_bank(const std::filesystem::path& path, ConceptMode* mode = nullptr);

}  // namespace camo
