#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "advgnn/matrix.hpp"
#include "advgnn/optim.hpp"
#include "advgnn/rng.hpp"

using namespace advgnn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
}

Matrix triple_loop(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

} // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    const Matrix m{{1.5, -2.0}, {0.25, 3.0}};
    EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matmul, HandArithmetic) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{0}, {1}};
    EXPECT_EQ(matmul(a, b), (Matrix{{2}, {4}}));
}

TEST(Matmul, MatchesTripleLoopOracle) {
    Rng rng(11);
    const auto a = random_matrix(5, 7, rng);
    const auto b = random_matrix(7, 3, rng);
    const auto got = matmul(a, b);
    const auto want = triple_loop(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
    // Transposed variants agree with the same oracle.
    const auto at_b = matmul_at_b(transpose(a), b);
    const auto a_bt = matmul_a_bt(a, transpose(b));
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(at_b.values()[i], want.values()[i], 1e-12);
        EXPECT_NEAR(a_bt.values()[i], want.values()[i], 1e-12);
    }
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("by 2x3"), std::string::npos);
    }
}

TEST(Matmul, AssociativeOnRandomTriples) {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t p = 1 + rng.below(6), q = 1 + rng.below(6), r = 1 + rng.below(6), s = 1 + rng.below(6);
        const auto a = random_matrix(p, q, rng);
        const auto b = random_matrix(q, r, rng);
        const auto c = random_matrix(r, s, rng);
        const auto left = matmul(matmul(a, b), c);
        const auto right = matmul(a, matmul(b, c));
        const double scale = std::max(1.0, max_abs(left));
        for (std::size_t i = 0; i < left.size(); ++i) {
            EXPECT_LE(std::abs(left.values()[i] - right.values()[i]) / scale, 1e-9);
        }
    }
}

TEST(Matmul, InputsUnmodified) {
    Rng rng(3);
    const auto a = random_matrix(4, 4, rng);
    const auto b = random_matrix(4, 4, rng);
    const Matrix a0 = a, b0 = b;
    (void)matmul(a, b);
    (void)matmul_at_b(a, b);
    (void)matmul_a_bt(a, b);
    (void)add(a, b);
    (void)hadamard(a, b);
    (void)scale(a, 2.0);
    EXPECT_EQ(a, a0);
    EXPECT_EQ(b, b0);
}

TEST(Elementwise, Identities) {
    const Matrix m{{1, -2}, {3.5, 0}};
    EXPECT_EQ(add(m, Matrix(2, 2)), m);
    EXPECT_EQ(sub(m, m), Matrix(2, 2));
    EXPECT_EQ(hadamard(Matrix{{2, 3}}, Matrix{{4, 5}}), (Matrix{{8, 15}}));
    EXPECT_THROW(add(Matrix(1, 2), Matrix(2, 1)), ShapeError);
}

TEST(Elementwise, OverflowIsReported) {
    const Matrix big{{1e308}};
    EXPECT_THROW(add(big, big), NumericError);
}

TEST(Glorot, DeterministicGivenSeed) {
    Rng a(7), b(7);
    EXPECT_EQ(glorot_init(1, 1, a), glorot_init(1, 1, b));
}

TEST(Glorot, WithinBound) {
    Rng rng(1);
    const auto m = glorot_init(64, 64, rng);
    EXPECT_LE(max_abs(m), std::sqrt(6.0 / 128.0));
}

TEST(Glorot, ZeroDimensionRejected) {
    Rng rng(1);
    EXPECT_THROW(glorot_init(0, 3, rng), ShapeError);
}

TEST(Glorot, MonteCarloMeanNearZero) {
    Rng rng(2024);
    double sum = 0.0;
    std::size_t count = 0;
    while (count < 100000) {
        const auto m = glorot_init(3, 5, rng);
        for (double v : m.values()) sum += v;
        count += m.size();
    }
    EXPECT_NEAR(sum / static_cast<double>(count), 0.0, 0.01);
}

TEST(Rng, EqualSeedsGiveEqualStreams) {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ChildStreamsDifferAndIgnoreParentDraws) {
    Rng parent(42);
    std::set<std::uint64_t> firsts;
    for (std::uint64_t k = 0; k < 100; ++k) firsts.insert(parent.child(k).next_u64());
    EXPECT_EQ(firsts.size(), 100u);

    Rng drawn(42);
    for (int i = 0; i < 10; ++i) drawn.next_u64();
    EXPECT_EQ(drawn.child(3).next_u64(), Rng(42).child(3).next_u64());
}

TEST(Rng, BelowIsInRangeAndCoversValues) {
    Rng rng(8);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Optimizer, AdamMinimizesQuadratic) {
    std::vector<double> x{3.0, -2.0};
    Optimizer opt({OptimizerKind::adam, 0.1, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 500; ++i) {
        std::vector<double> g{2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)};
        opt.step({std::span<double>(x)}, {std::span<const double>(g)});
    }
    EXPECT_NEAR(x[0], 1.0, 1e-3);
    EXPECT_NEAR(x[1], -0.5, 1e-3);
}

TEST(Optimizer, SgdStepIsLearningRateTimesGradient) {
    std::vector<double> x{1.0};
    std::vector<double> g{0.5};
    Optimizer opt({OptimizerKind::sgd, 0.1});
    opt.step({std::span<double>(x)}, {std::span<const double>(g)});
    EXPECT_DOUBLE_EQ(x[0], 1.0 - 0.05);
}
