#pragma once

#include <cmath>
#include <limits>

#include "cocycle/errors.hpp"

namespace cocycle {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend Vec2 operator*(Vec2 v, double s) { return s * v; }
    friend Vec2 operator/(Vec2 v, double s) { return {v.x / s, v.y / s}; }

    double norm() const { return std::hypot(x, y); }

    Vec2 normalized() const {
        const double n = norm();
        if (!(n > 0.0)) throw degenerate_frame("cannot normalize a zero vector");
        return {x / n, y / n};
    }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

// Direction at a given angle from the first axis.
inline Vec2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Angle between the lines spanned by u and v, in [0, pi/2].  atan2-based for
// stability at both tiny and near-perpendicular angles.
inline double line_angle(Vec2 u, Vec2 v) {
    const double c = std::abs(cross(u, v));
    const double d = std::abs(dot(u, v));
    return std::atan2(c, d);
}

// Signed rotation angle from the line of u to the line of v, in
// [-pi/2, pi/2].  Sign convention: positive if rotating u counterclockwise
// by a small positive angle moves its line toward the line of v.
inline double signed_line_angle(Vec2 u, Vec2 v) {
    double d = dot(u, v);
    double c = cross(u, v);
    if (d < 0.0) {  // lines are sign-blind: flip v into the half-plane of u
        d = -d;
        c = -c;
    }
    return std::atan2(c, d);
}

struct Matrix2 {
    // Row-major entries: [[a, b], [c, d]].
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    static Matrix2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    friend Matrix2 operator+(const Matrix2& m, const Matrix2& n) {
        return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
    }
    friend Matrix2 operator-(const Matrix2& m, const Matrix2& n) {
        return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
    }
    friend Matrix2 operator*(double s, const Matrix2& m) {
        return {s * m.a, s * m.b, s * m.c, s * m.d};
    }
    friend Matrix2 operator*(const Matrix2& m, double s) { return s * m; }
    friend Matrix2 operator*(const Matrix2& m, const Matrix2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend Vec2 operator*(const Matrix2& m, Vec2 v) {
        return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
    }

    double trace() const { return a + d; }
    double det() const { return a * d - b * c; }

    Matrix2 transpose() const { return {a, c, b, d}; }

    Matrix2 inverse() const {
        const double dt = det();
        if (dt == 0.0 || !std::isfinite(dt))
            throw numerical_domain("matrix is not invertible");
        const double s = 1.0 / dt;
        return {s * d, -s * b, -s * c, s * a};
    }

    double max_abs_entry() const {
        return std::max(std::max(std::abs(a), std::abs(b)),
                        std::max(std::abs(c), std::abs(d)));
    }

    bool finite() const {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) &&
               std::isfinite(d);
    }
};

// Exact singular values of a 2x2 matrix, largest first.  Uses the closed
// form sigma_{1,2} = (q1 +- q2)/2 with q1 = |(a+d, b-c)|, q2 = |(a-d, b+c)|,
// which is stable for all entry magnitudes.
struct SingularValues {
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};

inline SingularValues singular_values(const Matrix2& m) {
    const double q1 = std::hypot(m.a + m.d, m.b - m.c);
    const double q2 = std::hypot(m.a - m.d, m.b + m.c);
    return {0.5 * (q1 + q2), 0.5 * std::abs(q1 - q2)};
}

inline double operator_norm(const Matrix2& m) { return singular_values(m).sigma1; }

inline double condition_number(const Matrix2& m) {
    const auto sv = singular_values(m);
    if (!(sv.sigma2 > 0.0)) return std::numeric_limits<double>::infinity();
    return sv.sigma1 / sv.sigma2;
}

// Counterclockwise rotation by theta.
inline Matrix2 rotation_matrix(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c, -s, s, c};
}

// A 2x2 matrix with its magnitude factored out as an accumulated logarithm,
// so that long products of exponentially growing or decaying propagators
// never overflow or underflow doubles.  The stored matrix part is rescaled
// to unit operator norm after every multiplication.
class ScaledMatrix {
public:
    ScaledMatrix() : m_(Matrix2::identity()), log_scale_(0.0) {}

    explicit ScaledMatrix(const Matrix2& m) : m_(m), log_scale_(0.0) { rescale(); }

    // Product this * other (matrix order, i.e. other acts first).
    ScaledMatrix operator*(const ScaledMatrix& other) const {
        ScaledMatrix r;
        r.m_ = m_ * other.m_;
        r.log_scale_ = log_scale_ + other.log_scale_;
        r.rescale();
        return r;
    }

    const Matrix2& unit_part() const { return m_; }
    double log_scale() const { return log_scale_; }

    double log_operator_norm() const {
        return log_scale_ + std::log(operator_norm(m_));
    }

    double log_sigma_min() const {
        const double s2 = singular_values(m_).sigma2;
        if (!(s2 > 0.0)) return -std::numeric_limits<double>::infinity();
        return log_scale_ + std::log(s2);
    }

    // log of ||M v|| for a unit-normalised v; returns -inf if M v vanishes.
    double log_norm_applied(Vec2 v) const {
        const double n = (m_ * v).norm();
        if (!(n > 0.0)) return -std::numeric_limits<double>::infinity();
        return log_scale_ + std::log(n);
    }

    // Direction of M v (unit length); the scale factor is irrelevant.
    Vec2 direction_applied(Vec2 v) const { return (m_ * v).normalized(); }

private:
    void rescale() {
        const double n = operator_norm(m_);
        if (!std::isfinite(n))
            throw numerical_domain("scaled product lost finiteness");
        if (n > 0.0) {
            m_ = (1.0 / n) * m_;
            log_scale_ += std::log(n);
        }
    }

    Matrix2 m_;
    double log_scale_;
};

}  // namespace cocycle
