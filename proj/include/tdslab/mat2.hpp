#pragma once

#include "tdslab/real.hpp"

#include <array>

namespace tdslab {

using Vec2 = std::array<real, 2>;

/// Dense 2x2 matrix, row-major.
struct Mat2 {
    real a11 = 0, a12 = 0, a21 = 0, a22 = 0;

    real trace() const { return a11 + a22; }
    real det() const { return a11 * a22 - a12 * a21; }
    Mat2 transposed() const { return {a11, a21, a12, a22}; }
    Vec2 operator*(const Vec2& v) const { return {a11 * v[0] + a12 * v[1], a21 * v[0] + a22 * v[1]}; }
    Mat2 operator*(const Mat2& b) const;
    Mat2 operator+(const Mat2& b) const { return {a11 + b.a11, a12 + b.a12, a21 + b.a21, a22 + b.a22}; }
    Mat2 operator*(real s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    static Mat2 identity() { return {1, 0, 0, 1}; }
};

/// Symmetric 2x2 matrix stored by its upper triangle.
struct SymMat2 {
    real p11 = 0, p12 = 0, p22 = 0;

    real trace() const { return p11 + p22; }
    real det() const { return p11 * p22 - p12 * p12; }
    bool positive_definite() const { return p11 > 0 && det() > 0; }
    Mat2 full() const { return {p11, p12, p12, p22}; }
    /// v^T S v
    real quad(const Vec2& v) const { return p11 * v[0] * v[0] + 2 * p12 * v[0] * v[1] + p22 * v[1] * v[1]; }

    static SymMat2 identity() { return {1, 0, 1}; }
};

struct EigBounds {
    real lo;
    real hi;
};

/// The two matrices of the switched counter-example.
Mat2 mat_a0();
Mat2 mat_a1();

/// (A + A^T) / 2
SymMat2 sym_part(const Mat2& a);

/// Symmetric part of A^T P + P A (exactly symmetric for symmetric P).
SymMat2 lyapunov_operator(const Mat2& a, const SymMat2& p);

/// 2x2 Hurwitz test: trace < 0 and det > 0. Throws std::invalid_argument on
/// non-finite entries.
bool hurwitz(const Mat2& a);

/// Solves A^T P + P A = -Q for symmetric P via the 3x3 linear system in
/// (p11, p12, p22). Requires A Hurwitz and Q positive definite; throws
/// std::domain_error otherwise and std::runtime_error if the system is singular.
SymMat2 lyapunov_solve(const Mat2& a, const SymMat2& q);

/// Closed-form eigenvalues of a symmetric 2x2 matrix, lo <= hi.
EigBounds sym_eig_bounds(const SymMat2& s);

/// lambda * A1 + (1 - lambda) * A0, lambda in [0, 1].
Mat2 a_lambda(real lambda);

/// Largest lambda in (0, 1) such that A_l^T P0 + P0 A_l <= -I/2 holds for all
/// l in [0, lambda], located by bisection to `tol`.
real find_lambda_bar(const SymMat2& p0, real tol);

/// Residual max-entry of A^T P + P A + Q.
real lyapunov_residual(const Mat2& a, const SymMat2& p, const SymMat2& q);

}  // namespace tdslab
