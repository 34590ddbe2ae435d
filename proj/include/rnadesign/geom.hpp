#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace rnadesign {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

// Unit vector, or exact zero when the input is (numerically) zero-length.
inline Vec3 unit_or_zero(const Vec3& a, double tiny = 1e-12) {
    const double n = norm(a);
    if (n < tiny) return {0.0, 0.0, 0.0};
    return (1.0 / n) * a;
}

// Signed dihedral angle of the chain a-b-c-d, in radians; the sign follows
// the usual convention atan2((n1 x n2) . b2_hat, n1 . n2).
inline double dihedral(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 b1 = b - a;
    const Vec3 b2 = c - b;
    const Vec3 b3 = d - c;
    const Vec3 n1 = cross(b1, b2);
    const Vec3 n2 = cross(b2, b3);
    const double x = dot(n1, n2);
    const double y = dot(cross(n1, n2), unit_or_zero(b2));
    return std::atan2(y, x);
}

// Unsigned angle at vertex b of the chain a-b-c, in radians.
inline double bond_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = unit_or_zero(a - b);
    const Vec3 v = unit_or_zero(c - b);
    double d = dot(u, v);
    if (d > 1.0) d = 1.0;
    if (d < -1.0) d = -1.0;
    return std::acos(d);
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 mat_apply(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

// Rotation matrix about a (unit) axis by angle theta (Rodrigues).
Mat3 axis_angle_rotation(const Vec3& axis, double theta);

// Haar-ish random rotation: random axis from normals, random angle.
Mat3 random_rotation(class RngStream& rng);

}  // namespace rnadesign
