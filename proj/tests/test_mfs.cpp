#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "camo/error.hpp"
#include "camo/mfs.hpp"
#include "oracles/naive_attention.hpp"
#include "support/synthetic.hpp"

using namespace camo;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("mfs") {

TEST_CASE("zero logits mix halfway") {
    const PrimitiveBank bank = gaussian_bank(4, 6, 3);
    for (double l : bank.logits) CHECK(l == 0.0);
    const Matrix t = mix_primitives(bank, ConceptMode::kPerPairTokens);
    REQUIRE(t.rows == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 6; ++k)
            CHECK(t(i, k) == doctest::Approx(0.5 * (bank.pos(i, k) + bank.neg(i, k))).epsilon(1e-15));
}

TEST_CASE("tokens lie on the primitive segment") {
    PrimitiveBank bank = gaussian_bank(5, 7, 4);
    Rng r(4);
    for (double& l : bank.logits) l = r.uniform(-6, 6);
    const Matrix t = mix_primitives(bank, ConceptMode::kPerPairTokens);
    for (std::size_t i = 0; i < 5; ++i) {
        const double a = mixing_weight(bank.logits[i]);
        CHECK(a == doctest::Approx(1.0 / (1.0 + std::exp(-bank.logits[i]))).epsilon(1e-15));
        for (std::size_t k = 0; k < 7; ++k) CHECK(t(i, k) == bank.neg(i, k) + a * (bank.pos(i, k) - bank.neg(i, k)));
    }
}

TEST_CASE("saturated logits reach the primitives") {
    PrimitiveBank bank = gaussian_bank(2, 5, 1);
    bank.logits = {20.0, -20.0};
    const Matrix t = mix_primitives(bank, ConceptMode::kPerPairTokens);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(std::abs(t(0, k) - bank.pos(0, k)) <= 1e-8);
        CHECK(std::abs(t(1, k) - bank.neg(1, k)) <= 1e-8);
    }
}

TEST_CASE("opposite pairs sum to zero") {
    PrimitiveBank bank{Matrix(2, 2, {1, 0, 0, 1}), Matrix(2, 2, {-1, 0, 0, -1}), {0.0, 0.0}};
    const Matrix c = mix_primitives(bank, ConceptMode::kSumSingleToken);
    REQUIRE(c.rows == 1);
    CHECK(c(0, 0) == 0.0);
    CHECK(c(0, 1) == 0.0);
}

TEST_CASE("single token is the sum of per-pair tokens") {
    PrimitiveBank bank = gaussian_bank(3, 4, 8);
    bank.logits = {0.3, -1.0, 2.0};
    const Matrix per = mix_primitives(bank, ConceptMode::kPerPairTokens);
    const Matrix one = mix_primitives(bank, ConceptMode::kSumSingleToken);
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(one(0, k) == doctest::Approx(per(0, k) + per(1, k) + per(2, k)).epsilon(1e-14));
}

TEST_CASE("mixing does not depend on unrelated work") {
    const PrimitiveBank bank = gaussian_bank(3, 4, 2);
    const Matrix before = mix_primitives(bank, ConceptMode::kPerPairTokens);
    Tensor5 noise = gaussian_init({1, 4, 2, 3, 3}, 1);
    noise *= 3.0;
    CHECK(mix_primitives(bank, ConceptMode::kPerPairTokens) == before);
}

TEST_CASE("gaussian bank is reproducible") {
    const PrimitiveBank a = gaussian_bank(8, 16, 42);
    const PrimitiveBank b = gaussian_bank(8, 16, 42);
    CHECK(a.pos == b.pos);
    CHECK(a.neg == b.neg);
    CHECK_FALSE(a.pos == a.neg);
    CHECK_FALSE(gaussian_bank(8, 16, 43).pos == a.pos);
}

TEST_CASE("concept modes parse") {
    CHECK(parse_concept_mode("per_pair_tokens") == ConceptMode::kPerPairTokens);
    CHECK(parse_concept_mode("sum_single_token") == ConceptMode::kSumSingleToken);
    CHECK(to_string(ConceptMode::kPerPairTokens) == "per_pair_tokens");
    CHECK_THROWS(parse_concept_mode("both"));
}

TEST_CASE("attention oracles agree") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const std::size_t l = 1 + rng.below(8), m = rng.below(5), c = 1 + rng.below(8);
        const AttentionSpec spec = make_attention_spec(c, ConceptMode::kPerPairTokens, rng);
        const Matrix x = augment_tokens(random_matrix(l, c, rng), random_matrix(m, c, rng), spec);
        oracle::Dense w;
        const oracle::Dense ref = oracle::attention(oracle::to_dense(x), oracle::to_dense(spec.w_q),
                                                    oracle::to_dense(spec.w_k), oracle::to_dense(spec.w_v),
                                                    double(c), &w);
        const Matrix fast = attention_rows(x, spec);
        const Matrix naive = attention_oracle(x, spec);
        const Matrix a = attention_weights(x, spec);
        for (std::size_t i = 0; i < x.rows; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < x.rows; ++j) {
                row += a(i, j);
                CHECK(a(i, j) > 0.0);
                CHECK(std::abs(a(i, j) - w[i][j]) < 1e-12);
            }
            CHECK(std::abs(row - 1.0) < 1e-12);
            for (std::size_t k = 0; k < c; ++k) {
                CHECK(std::abs(fast(i, k) - ref[i][k]) < 1e-10);
                CHECK(std::abs(naive(i, k) - ref[i][k]) < 1e-10);
            }
        }
    }
}

TEST_CASE("single token and duplicated tokens") {
    const AttentionSpec id = identity_attention_spec(3);
    const Matrix one(1, 3, {0.2, -1.0, 4.0});
    CHECK(attention_oracle(one, id) == one);
    const Matrix two(2, 3, {0.2, -1.0, 4.0, 0.2, -1.0, 4.0});
    const Matrix out = attention_oracle(two, id);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(out(0, k) == doctest::Approx(two(0, k)).epsilon(1e-15));
        CHECK(out(1, k) == doctest::Approx(two(0, k)).epsilon(1e-15));
    }
}

TEST_CASE("no concepts is plain self-attention") {
    Rng rng(3);
    const AttentionSpec spec = make_attention_spec(4, ConceptMode::kPerPairTokens, rng);
    const Tensor5 fs = gaussian_init({1, 4, 2, 2, 3}, 5);
    const Tensor5 out = augmented_attention(fs, Matrix(0, 4), spec);
    for (std::size_t t = 0; t < 2; ++t) {
        const Matrix ref = attention_oracle(frame_tokens(fs, 0, t), spec);
        const Matrix got = frame_tokens(out, 0, t);
        for (std::size_t i = 0; i < ref.data.size(); ++i) CHECK(std::abs(got.data[i] - ref.data[i]) < 1e-12);
    }
}

TEST_CASE("zero injection adds zero-key columns") {
    Rng rng(6);
    AttentionSpec spec = make_attention_spec(4, ConceptMode::kPerPairTokens, rng);
    spec.w_inject = Matrix(4, 4);
    const Tensor5 fs = gaussian_init({1, 4, 1, 2, 3}, 2);
    const Matrix concepts = random_matrix(2, 4, rng);
    const Tensor5 out = augmented_attention(fs, concepts, spec);
    // Dense reference on the explicit augmented matrix with two zero rows.
    Matrix x(8, 4);
    const Matrix tok = frame_tokens(fs, 0, 0);
    std::copy(tok.data.begin(), tok.data.end(), x.data.begin());
    const oracle::Dense ref = oracle::attention(oracle::to_dense(x), oracle::to_dense(spec.w_q),
                                                oracle::to_dense(spec.w_k), oracle::to_dense(spec.w_v), 4.0);
    const Matrix got = frame_tokens(out, 0, 0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(got(i, k) - ref[i][k]) < 1e-12);
    // The zero rows dilute the spatial attention, so the output differs from
    // plain self-attention.
    const Tensor5 plain = augmented_attention(fs, Matrix(0, 4), spec);
    CHECK(max_abs_diff(plain, out) > 0.0);
}

TEST_CASE("spatial permutation permutes the output rows") {
    Rng rng(7);
    const AttentionSpec spec = make_attention_spec(3, ConceptMode::kPerPairTokens, rng);
    const Matrix tokens = random_matrix(6, 3, rng);
    const Matrix concepts = random_matrix(2, 3, rng);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    Matrix shuffled(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t k = 0; k < 3; ++k) shuffled(i, k) = tokens(perm[i], k);
    const Matrix a = attention_rows(augment_tokens(tokens, concepts, spec), spec);
    const Matrix b = attention_rows(augment_tokens(shuffled, concepts, spec), spec);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(b(i, k) - a(perm[i], k)) < 1e-12);
    for (std::size_t i = 6; i < 8; ++i)
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(b(i, k) - a(i, k)) < 1e-12);
}

TEST_CASE("outputs stay within the value envelope") {
    Rng rng(8);
    const AttentionSpec spec = make_attention_spec(5, ConceptMode::kPerPairTokens, rng);
    const Matrix x = augment_tokens(random_matrix(7, 5, rng), random_matrix(3, 5, rng), spec);
    const oracle::Dense v = oracle::matmul(oracle::to_dense(x), oracle::to_dense(spec.w_v));
    const Matrix out = attention_rows(x, spec);
    for (std::size_t k = 0; k < 5; ++k) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& row : v) {
            lo = std::min(lo, row[k]);
            hi = std::max(hi, row[k]);
        }
        for (std::size_t i = 0; i < out.rows; ++i) {
            CHECK(out(i, k) >= lo - 1e-12);
            CHECK(out(i, k) <= hi + 1e-12);
        }
    }
}

TEST_CASE("bank serialization round-trips") {
    PrimitiveBank bank = gaussian_bank(3, 5, 9);
    bank.logits = {0.1, -2.0, 3.5};
    std::stringstream ss;
    write_bank(ss, bank, ConceptMode::kSumSingleToken);
    std::string header;
    std::getline(ss, header);
    CHECK(header.find("\"format\":\"sbp-bank/1\"") != std::string::npos);
    CHECK(header.find("\"mode\":\"sum_single_token\"") != std::string::npos);
    ss.seekg(0);
    ConceptMode mode = ConceptMode::kPerPairTokens;
    const PrimitiveBank back = read_bank(ss, &mode);
    CHECK(mode == ConceptMode::kSumSingleToken);
    CHECK(back.pos == bank.pos);
    CHECK(back.neg == bank.neg);
    CHECK(back.logits == bank.logits);

    const auto dir = testsupport::scratch_dir("bank");
    save_bank(dir / "b.sbp", bank, ConceptMode::kPerPairTokens);
    CHECK(load_bank(dir / "b.sbp").pos == bank.pos);
    CHECK_THROWS_AS(load_bank(dir / "missing.sbp"), MissingDataError);
    std::stringstream bad("{\"format\":\"other\"}\n");
    CHECK_THROWS_AS(read_bank(bad), SchemaError);
}

TEST_CASE("contract violations") {
    const AttentionSpec spec = identity_attention_spec(4);
    CHECK_THROWS_AS(augmented_attention(gaussian_init({1, 3, 1, 2, 2}, 1), Matrix(1, 4), spec), ShapeError);
    CHECK_THROWS_AS(augment_tokens(Matrix(2, 4), Matrix(1, 3), spec), ShapeError);
    AttentionSpec bad = spec;
    bad.d_k = 2;
    CHECK_THROWS(validate_attention(bad));
    PrimitiveBank pb = gaussian_bank(2, 3, 1);
    pb.logits.push_back(0.0);
    CHECK_THROWS(validate_bank(pb));
}

}
