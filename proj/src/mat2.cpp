#include "tdslab/mat2.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace tdslab {

namespace {

bool finite(const Mat2& a) {
    return std::isfinite(a.a11) && std::isfinite(a.a12) && std::isfinite(a.a21) && std::isfinite(a.a22);
}

bool finite(const SymMat2& s) { return std::isfinite(s.p11) && std::isfinite(s.p12) && std::isfinite(s.p22); }

void require_finite(const Mat2& a, const char* what) {
    if (!finite(a)) throw std::invalid_argument(std::string(what) + ": non-finite matrix entry");
}

// -I/2 margin test: largest eigenvalue of A^T P + P A + I/2.
real margin(const Mat2& a, const SymMat2& p) {
    SymMat2 n = lyapunov_operator(a, p);
    n.p11 += 0.5L;
    n.p22 += 0.5L;
    return sym_eig_bounds(n).hi;
}

}  // namespace

Mat2 Mat2::operator*(const Mat2& b) const {
    return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22,
            a21 * b.a11 + a22 * b.a21, a21 * b.a12 + a22 * b.a22};
}

Mat2 mat_a0() { return {-0.1L, 0.5L, -2.0L, 0.0L}; }
Mat2 mat_a1() { return {0.0L, 2.0L, -0.5L, -0.1L}; }

SymMat2 sym_part(const Mat2& a) { return {a.a11, (a.a12 + a.a21) / 2, a.a22}; }

SymMat2 lyapunov_operator(const Mat2& a, const SymMat2& p) {
    // (A^T P)_{ij}; the sum with its transpose is symmetric.
    const real m11 = a.a11 * p.p11 + a.a21 * p.p12;
    const real m12 = a.a11 * p.p12 + a.a21 * p.p22;
    const real m21 = a.a12 * p.p11 + a.a22 * p.p12;
    const real m22 = a.a12 * p.p12 + a.a22 * p.p22;
    return {2 * m11, m12 + m21, 2 * m22};
}

real lyapunov_residual(const Mat2& a, const SymMat2& p, const SymMat2& q) {
    const SymMat2 r = lyapunov_operator(a, p);
    return std::max({std::fabs(r.p11 + q.p11), std::fabs(r.p12 + q.p12), std::fabs(r.p22 + q.p22)});
}

bool hurwitz(const Mat2& a) {
    require_finite(a, "hurwitz");
    return a.trace() < 0 && a.det() > 0;
}

SymMat2 lyapunov_solve(const Mat2& a, const SymMat2& q) {
    require_finite(a, "lyapunov_solve");
    if (!finite(q)) throw std::invalid_argument("lyapunov_solve: non-finite Q");
    if (!q.positive_definite()) throw std::domain_error("lyapunov_solve: Q is not positive definite");
    if (!hurwitz(a)) throw std::domain_error("lyapunov_solve: A is not Hurwitz, no positive-definite solution");

    // Unknowns (p11, p12, p22):
    //   2 a11 p11 + 2 a21 p12                 = -q11
    //   a12 p11 + (a11 + a22) p12 + a21 p22   = -q12
    //             2 a12 p12 + 2 a22 p22       = -q22
    real m[3][4] = {
        {2 * a.a11, 2 * a.a21, 0, -q.p11},
        {a.a12, a.a11 + a.a22, a.a21, -q.p12},
        {0, 2 * a.a12, 2 * a.a22, -q.p22},
    };
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        if (m[piv][col] == 0) throw std::runtime_error("lyapunov_solve: singular linear system");
        if (piv != col) std::swap(m[piv], m[col]);
        for (int r = col + 1; r < 3; ++r) {
            const real f = m[r][col] / m[col][col];
            for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
        }
    }
    real x[3];
    for (int r = 2; r >= 0; --r) {
        real s = m[r][3];
        for (int k = r + 1; k < 3; ++k) s -= m[r][k] * x[k];
        x[r] = s / m[r][r];
    }
    const SymMat2 p{x[0], x[1], x[2]};
    if (!p.positive_definite()) throw std::runtime_error("lyapunov_solve: solution is not positive definite");
    return p;
}

EigBounds sym_eig_bounds(const SymMat2& s) {
    if (!finite(s)) throw std::invalid_argument("sym_eig_bounds: non-finite entry");
    const real half_tr = s.trace() / 2;
    const real half_diff = (s.p11 - s.p22) / 2;
    // Discriminant written as a sum of squares so it never goes negative.
    const real rad = std::hypot(half_diff, s.p12);
    return {half_tr - rad, half_tr + rad};
}

Mat2 a_lambda(real lambda) {
    if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("a_lambda: lambda outside [0, 1]");
    return mat_a1() * lambda + mat_a0() * (1 - lambda);
}

real find_lambda_bar(const SymMat2& p0, real tol) {
    if (!(tol > 0)) throw std::invalid_argument("find_lambda_bar: tol must be positive");
    if (margin(a_lambda(0), p0) > 0)
        throw std::runtime_error("find_lambda_bar: margin fails at lambda = 0, P0 is inconsistent with A0");
    if (margin(a_lambda(1), p0) <= 0) return 1;

    real lo = 0, hi = 1;
    while (hi - lo > tol) {
        const real mid = (lo + hi) / 2;
        (margin(a_lambda(mid), p0) <= 0 ? lo : hi) = mid;
    }
    // Grid scan below the bisection endpoint; a violation means the feasible
    // set is not an interval and lambda_bar must sit below it.
    const auto steps = static_cast<long>(std::floor(lo / tol));
    for (long i = 1; i <= steps; ++i) {
        const real l = static_cast<real>(i) * tol;
        if (margin(a_lambda(l), p0) > 0) return static_cast<real>(i - 1) * tol;
    }
    return lo;
}

}  // namespace tdslab
