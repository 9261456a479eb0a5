#pragma once

#include <array>
#include <cmath>

namespace dtwin {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm_sq(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    return n > 0.0 ? a / n : Vec3{};
}
inline Vec3 component_min(const Vec3& a, const Vec3& b) {
    return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}
inline Vec3 component_max(const Vec3& a, const Vec3& b) {
    return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}

/// Angle between two vectors in degrees, robust near 0 and 180.
inline double angle_deg(const Vec3& a, const Vec3& b) {
    constexpr double rad_to_deg = 57.295779513082320876798;
    return std::atan2(norm(cross(a, b)), dot(a, b)) * rad_to_deg;
}

struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Quat normalized() const;
    Vec3 rotate(const Vec3& v) const;
    friend bool operator==(const Quat&, const Quat&) = default;
};

Quat operator*(const Quat& a, const Quat& b);

/// Rotation about X, then Y, then Z (extrinsic), angles in degrees.
Quat quat_from_euler_xyz_deg(const Vec3& degrees);
Vec3 euler_xyz_deg_from_quat(const Quat& q);

/// Affine map: linear part (row-major 3x3) followed by translation.
struct Affine {
    std::array<double, 9> linear{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation;

    Vec3 apply(const Vec3& p) const;
    Vec3 apply_linear(const Vec3& v) const;
    static Affine identity() { return {}; }
    static Affine uniform_scale(double s);
    static Affine rotation(const Quat& q);
};

/// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
Affine operator*(const Affine& a, const Affine& b);

/// Local transform of a node relative to its parent.
struct Transform {
    Vec3 position;
    Vec3 rotation_deg;
    Vec3 scale{1.0, 1.0, 1.0};

    Quat rotation() const { return quat_from_euler_xyz_deg(rotation_deg); }
    /// Scale, then rotate, then translate.
    Affine to_affine() const;
    bool valid() const { return scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0; }

    friend bool operator==(const Transform&, const Transform&) = default;
};

}  // namespace dtwin
