#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace crownfill {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    Vec3 cwise_mul(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    Vec3 cwise_div(const Vec3& o) const { return {x / o.x, y / o.y, z / o.z}; }
    Vec3 cwise_abs() const { return {std::fabs(x), std::fabs(y), std::fabs(z)}; }
    Vec3 cwise_max(const Vec3& o) const { return {std::max(x, o.x), std::max(y, o.y), std::max(z, o.z)}; }
    Vec3 cwise_min(const Vec3& o) const { return {std::min(x, o.x), std::min(y, o.y), std::min(z, o.z)}; }

    double max_component() const { return std::max(x, std::max(y, z)); }
    double min_component() const { return std::min(x, std::min(y, z)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length_sq(const Vec3& v) { return dot(v, v); }
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
    double len = length(v);
    return len > 0.0 ? v / len : Vec3{0.0, 0.0, 0.0};
}

// Column-major 3x3 rotation / linear map.
struct Mat3 {
    // m[c] is column c.
    std::array<Vec3, 3> col{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};

    static Mat3 identity() { return {}; }

    Vec3 operator*(const Vec3& v) const {
        return col[0] * v.x + col[1] * v.y + col[2] * v.z;
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int c = 0; c < 3; ++c) r.col[c] = (*this) * o.col[c];
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int c = 0; c < 3; ++c)
            r.col[c] = {col[0][c], col[1][c], col[2][c]};
        return r;
    }
    double det() const { return dot(col[0], cross(col[1], col[2])); }

    static Mat3 from_axis_angle(const Vec3& axis, double angle) {
        Vec3 u = normalized(axis);
        double c = std::cos(angle), s = std::sin(angle), ic = 1.0 - c;
        Mat3 r;
        r.col[0] = {c + u.x * u.x * ic, u.y * u.x * ic + u.z * s, u.z * u.x * ic - u.y * s};
        r.col[1] = {u.x * u.y * ic - u.z * s, c + u.y * u.y * ic, u.z * u.y * ic + u.x * s};
        r.col[2] = {u.x * u.z * ic + u.y * s, u.y * u.z * ic - u.x * s, c + u.z * u.z * ic};
        return r;
    }

    // Unit quaternion (w, x, y, z) to rotation matrix.
    static Mat3 from_quat(double w, double x, double y, double z) {
        Mat3 r;
        r.col[0] = {1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)};
        r.col[1] = {2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)};
        r.col[2] = {2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)};
        return r;
    }
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    void expand(const Vec3& p) { lo = lo.cwise_min(p); hi = hi.cwise_max(p); }
    void expand(const Aabb& b) { lo = lo.cwise_min(b.lo); hi = hi.cwise_max(b.hi); }
    Vec3 center() const { return (lo + hi) * 0.5; }
    Vec3 extents() const { return hi - lo; }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    // Squared distance from point to box (0 inside).
    double dist_sq(const Vec3& p) const {
        double d = 0.0;
        for (int i = 0; i < 3; ++i) {
            double v = p[i];
            if (v < lo[i]) d += (lo[i] - v) * (lo[i] - v);
            else if (v > hi[i]) d += (v - hi[i]) * (v - hi[i]);
        }
        return d;
    }
    // Signed distance to the box boundary, negative inside.
    double signed_dist(const Vec3& p) const {
        Vec3 c = center(), h = extents() * 0.5;
        Vec3 q = (p - c).cwise_abs() - h;
        Vec3 qpos = q.cwise_max(Vec3{0, 0, 0});
        return length(qpos) + std::min(q.max_component(), 0.0);
    }
};

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace crownfill
