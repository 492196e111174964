#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stegodetect/activations.hpp"
#include "stegodetect/mat.hpp"
#include "stegodetect/rng.hpp"

using namespace stegodetect;

namespace {

template <typename T>
Mat<T> random_mat(std::size_t r, std::size_t c, Rng& rng) {
    Mat<T> m(r, c);
    for (auto& v : m.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    return m;
}

template <typename T>
double max_abs_diff(const Mat<T>& a, const Mat<T>& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) -
                                         static_cast<double>(b.data[i])));
    return worst;
}

}  // namespace

TEST_CASE("matmul identity and annihilator") {
    Rng rng(7);
    auto m = random_mat<float>(3, 5, rng);
    Mat<float> eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
    CHECK(max_abs_diff(matmul(eye, m), m) == 0.0);

    Mat<float> zeros(2, 3);
    auto z = matmul(zeros, random_mat<float>(3, 4, rng));
    for (float v : z.data) CHECK(v == 0.0f);
    CHECK(z.rows == 2);
    CHECK(z.cols == 4);
}

TEST_CASE("matmul hand-computed 2x2 times 2x1") {
    Mat<double> a(2, 2, {1, 2, 3, 4});
    Mat<double> b(2, 1, {5, 6});
    auto c = matmul(a, b);
    CHECK(c.at(0, 0) == doctest::Approx(17.0));
    CHECK(c.at(1, 0) == doctest::Approx(39.0));
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    Mat<float> a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x2") != std::string::npos);
    }
}

TEST_CASE("matmul associativity on random triples") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto a64 = random_mat<double>(4, 6, rng);
        auto b64 = random_mat<double>(6, 3, rng);
        auto c64 = random_mat<double>(3, 5, rng);
        CHECK(max_abs_diff(matmul(matmul(a64, b64), c64), matmul(a64, matmul(b64, c64))) < 1e-10);

        auto a32 = random_mat<float>(4, 6, rng);
        auto b32 = random_mat<float>(6, 3, rng);
        auto c32 = random_mat<float>(3, 5, rng);
        auto lhs = matmul(matmul(a32, b32), c32);
        auto rhs = matmul(a32, matmul(b32, c32));
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double denom = std::max(1.0, std::abs(static_cast<double>(rhs.data[i])));
            CHECK(std::abs(lhs.data[i] - rhs.data[i]) / denom < 1e-4);
        }
    }
}

TEST_CASE("activation fixed points and scalar oracle") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5));
    CHECK(tanh_act(0.0) == 0.0);
    // scalar evaluation oracle: 1/(1+e^-1)
    const double oracle = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(sigmoid(1.0) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("activations saturate without NaN") {
    for (double x : {-1e6, -500.0, 500.0, 1e6}) {
        CHECK(std::isfinite(sigmoid(x)));
        CHECK(std::isfinite(tanh_act(x)));
        CHECK(sigmoid(x) >= 0.0);
        CHECK(sigmoid(x) <= 1.0);
    }
    CHECK(sigmoid(1e6f) == 1.0f);
    CHECK(sigmoid(-1e6f) == 0.0f);
}

TEST_CASE("analytic derivatives match central finite differences") {
    const double h = 1e-5;
    for (double x = -4.0; x <= 4.0; x += 0.37) {
        const double fd_sig = (sigmoid(x + h) - sigmoid(x - h)) / (2 * h);
        const double fd_tanh = (tanh_act(x + h) - tanh_act(x - h)) / (2 * h);
        CHECK(std::abs(sigmoid_deriv(x) - fd_sig) < 1e-7);
        CHECK(std::abs(tanh_deriv(x) - fd_tanh) < 1e-7);
    }
}

TEST_CASE("softmax symmetry, hand case, shift invariance") {
    auto sym = softmax(std::vector<double>{3.25, 3.25});
    CHECK(sym[0] == doctest::Approx(0.5));
    CHECK(sym[1] == doctest::Approx(0.5));

    auto hand = softmax(std::vector<double>{0.0, std::log(3.0)});
    CHECK(hand[0] == doctest::Approx(0.25));
    CHECK(hand[1] == doctest::Approx(0.75));

    auto big = softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(big[0] == doctest::Approx(0.5));
    CHECK(std::isfinite(big[0]));
}

TEST_CASE("softmax sums to one for extreme logits") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(1 + rng.uniform_int(6));
        for (auto& v : logits) v = rng.uniform(-1e4, 1e4);
        auto p = softmax(logits);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("softmax rejects empty input") {
    CHECK_THROWS_AS(softmax(std::vector<float>{}), UsageError);
}

TEST_CASE("glorot init bounds and determinism") {
    Rng a(42), b(42);
    auto w1 = init_weights<float>(1, 1, a);
    const double bound = std::sqrt(3.0);  // sqrt(6/(1+1))
    CHECK(std::abs(w1.at(0, 0)) <= bound);

    Rng a2(42);
    auto m1 = init_weights<double>(8, 5, a2);
    auto m2 = init_weights<double>(8, 5, b);
    CHECK(max_abs_diff(m1, m2) == 0.0);

    CHECK_THROWS_AS(init_weights<float>(0, 3, a), UsageError);
}

TEST_CASE("rng reproducibility over ten thousand draws") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 10000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng base(1234);
    Rng s1 = base.substream(1);
    Rng s2 = base.substream(2);
    CHECK(s1.next_u64() != s2.next_u64());
    // substreams do not depend on draws already consumed
    Rng fresh(1234);
    fresh.next_u64();
    CHECK(fresh.substream(1).next_u64() == Rng(1234).substream(1).next_u64());
}

TEST_CASE("uniform draws stay in range") {
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.uniform_int(7) < 7);
    }
}

TEST_CASE("debug mode flags non-finite results") {
    set_debug_checks(true);
    Mat<double> a(1, 1, {1e308});
    Mat<double> b(1, 1, {1e308});
    CHECK_THROWS_AS(matmul(a, b), NumericError);
    set_debug_checks(false);
    CHECK_NOTHROW(matmul(a, b));
}
