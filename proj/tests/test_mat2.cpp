#include <catch2/catch_amalgamated.hpp>

#include "tdslab/mat2.hpp"

#include <cmath>
#include <random>

using namespace tdslab;
using Catch::Approx;

namespace {

// Independent Lyapunov oracle: vectorize A^T P + P A = -Q as a 4x4 system in
// (p11, p12, p21, p22) without assuming symmetry, then solve by elimination.
SymMat2 lyapunov_oracle(const Mat2& a, const SymMat2& q) {
    const real A[2][2] = {{a.a11, a.a12}, {a.a21, a.a22}};
    const real Q[2][2] = {{q.p11, q.p12}, {q.p12, q.p22}};
    real m[4][5] = {};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const int row = 2 * i + j;
            // sum_k A[k][i] P[k][j] + sum_k P[i][k] A[k][j]
            for (int k = 0; k < 2; ++k) {
                m[row][2 * k + j] += A[k][i];
                m[row][2 * i + k] += A[k][j];
            }
            m[row][4] = -Q[i][j];
        }
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::fabs(m[r][c]) > std::fabs(m[piv][c])) piv = r;
        for (int k = 0; k < 5; ++k) std::swap(m[c][k], m[piv][k]);
        for (int r = 0; r < 4; ++r) {
            if (r == c) continue;
            const real f = m[r][c] / m[c][c];
            for (int k = 0; k < 5; ++k) m[r][k] -= f * m[c][k];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[3][4] / m[3][3]};
}

// Eigenvalue oracle: bisection on the characteristic polynomial
// p(l) = (s11 - l)(s22 - l) - s12^2 on brackets built from Gershgorin discs.
EigBounds eig_oracle(const SymMat2& s) {
    const auto p = [&](real l) { return (s.p11 - l) * (s.p22 - l) - s.p12 * s.p12; };
    const real r = std::fabs(s.p12);
    const real lo = std::min(s.p11, s.p22) - r - 1, hi = std::max(s.p11, s.p22) + r + 1;
    const real mid = (s.p11 + s.p22) / 2;  // p(mid) <= 0 always
    const auto root = [&](real a, real b) {
        // p(a) and p(b) have opposite signs (or one is zero)
        for (int i = 0; i < 200; ++i) {
            const real m = (a + b) / 2;
            if ((p(m) > 0) == (p(a) > 0))
                a = m;
            else
                b = m;
        }
        return (a + b) / 2;
    };
    return {root(lo, mid), root(hi, mid)};
}

}  // namespace

TEST_CASE("hurwitz examples", "[mat2]") {
    CHECK(hurwitz(mat_a0()));
    CHECK(hurwitz(mat_a1()));
    CHECK_FALSE(hurwitz(Mat2{1, 0, 0, -1}));
    const Mat2 half = a_lambda(0.5L);
    CHECK(half.a11 == Approx(-0.05));
    CHECK(half.a12 == Approx(1.25));
    CHECK(half.a21 == Approx(-1.25));
    CHECK(half.a22 == Approx(-0.05));
    CHECK(half.det() == Approx(1.565));
    CHECK(hurwitz(half));
    CHECK_THROWS_AS(hurwitz(Mat2{NAN, 0, 0, -1}), std::invalid_argument);
}

TEST_CASE("hurwitz holds along the convex family", "[mat2][property]") {
    for (int i = 0; i <= 100; ++i) CHECK(hurwitz(a_lambda(static_cast<real>(i) / 100)));
}

TEST_CASE("a_lambda endpoints and range", "[mat2]") {
    const Mat2 a0 = a_lambda(0), a1 = a_lambda(1);
    CHECK(a0.a11 == mat_a0().a11);
    CHECK(a0.a21 == mat_a0().a21);
    CHECK(a1.a12 == mat_a1().a12);
    CHECK(a1.a22 == mat_a1().a22);
    CHECK_THROWS_AS(a_lambda(-0.1L), std::invalid_argument);
    CHECK_THROWS_AS(a_lambda(1.5L), std::invalid_argument);
}

TEST_CASE("lyapunov solve for A0 and A1", "[mat2]") {
    const SymMat2 p0 = lyapunov_solve(mat_a0(), SymMat2::identity());
    CHECK(std::fabs(p0.p11 - 25) <= 1e-12L);
    CHECK(std::fabs(p0.p12 + 1) <= 1e-12L);
    CHECK(std::fabs(p0.p22 - 6.3L) <= 1e-12L);
    CHECK(lyapunov_residual(mat_a0(), p0, SymMat2::identity()) <= 1e-12L);

    const SymMat2 p1 = lyapunov_solve(mat_a1(), SymMat2::identity());
    CHECK(std::fabs(p1.p11 - 6.3L) <= 1e-12L);
    CHECK(std::fabs(p1.p12 - 1) <= 1e-12L);
    CHECK(std::fabs(p1.p22 - 25) <= 1e-12L);

    const SymMat2 pm = lyapunov_solve(Mat2{-1, 0, 0, -1}, SymMat2::identity());
    CHECK(pm.p11 == Approx(0.5));
    CHECK(pm.p12 == Approx(0.0).margin(1e-15));
    CHECK(pm.p22 == Approx(0.5));
}

TEST_CASE("lyapunov solve rejects bad inputs", "[mat2]") {
    CHECK_THROWS_AS(lyapunov_solve(Mat2{1, 0, 0, -1}, SymMat2::identity()), std::domain_error);
    CHECK_THROWS_AS(lyapunov_solve(mat_a0(), SymMat2{1, 2, 1}), std::domain_error);
    CHECK_THROWS_AS(lyapunov_solve(Mat2{INFINITY, 0, 0, -1}, SymMat2::identity()), std::invalid_argument);
}

TEST_CASE("lyapunov solve matches the vectorized oracle on random Hurwitz matrices", "[mat2][property]") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> entry(-3, 3);
    int accepted = 0;
    while (accepted < 100) {
        const Mat2 a{entry(rng), entry(rng), entry(rng), entry(rng)};
        if (!(a.trace() < -0.05L && a.det() > 0.05L)) continue;  // rejection sampling
        ++accepted;
        const SymMat2 q = SymMat2::identity();
        const SymMat2 p = lyapunov_solve(a, q);
        CHECK(lyapunov_residual(a, p, q) <= 1e-12L);
        const SymMat2 o = lyapunov_oracle(a, q);
        const real scale = std::max({std::fabs(o.p11), std::fabs(o.p22), real(1)});
        CHECK(std::fabs(p.p11 - o.p11) <= 1e-12L * scale);
        CHECK(std::fabs(p.p12 - o.p12) <= 1e-12L * scale);
        CHECK(std::fabs(p.p22 - o.p22) <= 1e-12L * scale);
        CHECK(p.positive_definite());
    }
}

TEST_CASE("symmetric eigenvalue bounds", "[mat2]") {
    const EigBounds id = sym_eig_bounds(SymMat2::identity());
    CHECK(id.lo == 1);
    CHECK(id.hi == 1);

    const EigBounds s0 = sym_eig_bounds(sym_part(mat_a0()));
    // trace -0.1, det -0.5625: l = -0.05 -/+ sqrt(0.0025 + 0.5625)
    CHECK(s0.lo == Approx(-0.05 - std::sqrt(0.565)).epsilon(1e-15));
    CHECK(s0.lo == Approx(-0.80166).margin(1e-5));
    CHECK(s0.hi == Approx(0.70166).margin(1e-5));

    const EigBounds p = sym_eig_bounds(SymMat2{25, -1, 6.3L});
    // trace 31.3, det 156.5
    CHECK(p.lo == Approx(15.65 - std::sqrt(15.65 * 15.65 - 156.5)).epsilon(1e-14));
    CHECK(p.lo == Approx(6.246676).margin(1e-6));
    CHECK(p.hi == Approx(25.053324).margin(1e-6));
    CHECK_THROWS_AS(sym_eig_bounds(SymMat2{NAN, 0, 1}), std::invalid_argument);
}

TEST_CASE("eigenvalue bounds agree with the characteristic polynomial oracle", "[mat2][property]") {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> entry(-10, 10);
    for (int i = 0; i < 500; ++i) {
        const SymMat2 s{entry(rng), entry(rng), entry(rng)};
        const EigBounds a = sym_eig_bounds(s), b = eig_oracle(s);
        CHECK(a.lo <= a.hi);
        CHECK(std::fabs(a.lo - b.lo) <= 1e-12L);
        CHECK(std::fabs(a.hi - b.hi) <= 1e-12L);
    }
}

TEST_CASE("lambda bar margin", "[mat2]") {
    const SymMat2 p0 = lyapunov_solve(mat_a0(), SymMat2::identity());
    const SymMat2 at0 = lyapunov_operator(mat_a0(), p0);
    CHECK(at0.p11 == Approx(-1));
    CHECK(at0.p12 == Approx(0).margin(1e-15));
    CHECK(at0.p22 == Approx(-1));

    const SymMat2 at1 = lyapunov_operator(mat_a1(), p0);
    CHECK(at1.p11 == Approx(1.0));
    CHECK(at1.p12 == Approx(46.95));
    CHECK(at1.p22 == Approx(-5.26));
    CHECK(at1.det() < 0);  // indefinite

    const real tol = 1e-6L;
    const real lb = find_lambda_bar(p0, tol);
    CHECK(lb > 0);
    CHECK(lb < 1);
    // independent bisection in test code freezes lambda_bar = 0.0108875017...
    CHECK(lb == Approx(0.0108875).margin(2e-6));
    CHECK(find_lambda_bar(p0, tol) == lb);

    const auto margin = [&](real l) {
        SymMat2 n = lyapunov_operator(a_lambda(l), p0);
        n.p11 += 0.5L;
        n.p22 += 0.5L;
        return sym_eig_bounds(n).hi;
    };
    CHECK(margin(lb) <= 0);
    CHECK(margin(std::min<real>(lb + 10 * tol, 1)) > 0);
    CHECK_THROWS_AS(find_lambda_bar(SymMat2{1, 0, 1}, tol), std::runtime_error);
}
