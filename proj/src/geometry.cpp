#include "dtwin/geometry.hpp"

#include <numbers>

namespace dtwin {

namespace {
constexpr double deg_to_rad = std::numbers::pi / 180.0;
constexpr double rad_to_deg = 180.0 / std::numbers::pi;
}  // namespace

Quat Quat::normalized() const {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n == 0.0) return {};
    return {w / n, x / n, y / n, z / n};
}

Vec3 Quat::rotate(const Vec3& v) const {
    // v' = v + 2w(u x v) + 2u x (u x v)
    const Vec3 u{x, y, z};
    const Vec3 t = 2.0 * cross(u, v);
    return v + w * t + cross(u, t);
}

Quat operator*(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_from_euler_xyz_deg(const Vec3& degrees) {
    const auto axis_quat = [](double deg, int axis) {
        const double h = 0.5 * deg * deg_to_rad;
        Quat q{std::cos(h), 0.0, 0.0, 0.0};
        const double s = std::sin(h);
        if (axis == 0) q.x = s;
        if (axis == 1) q.y = s;
        if (axis == 2) q.z = s;
        return q;
    };
    const Quat qx = axis_quat(degrees.x, 0);
    const Quat qy = axis_quat(degrees.y, 1);
    const Quat qz = axis_quat(degrees.z, 2);
    return (qz * qy * qx).normalized();
}

Vec3 euler_xyz_deg_from_quat(const Quat& in) {
    const Quat q = in.normalized();
    // R = Rz * Ry * Rx
    const double sinr_cosp = 2.0 * (q.w * q.x + q.y * q.z);
    const double cosr_cosp = 1.0 - 2.0 * (q.x * q.x + q.y * q.y);
    double sinp = 2.0 * (q.w * q.y - q.z * q.x);
    sinp = std::fmax(-1.0, std::fmin(1.0, sinp));
    const double siny_cosp = 2.0 * (q.w * q.z + q.x * q.y);
    const double cosy_cosp = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
    return {std::atan2(sinr_cosp, cosr_cosp) * rad_to_deg, std::asin(sinp) * rad_to_deg,
            std::atan2(siny_cosp, cosy_cosp) * rad_to_deg};
}

Vec3 Affine::apply_linear(const Vec3& v) const {
    const auto& m = linear;
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Vec3 Affine::apply(const Vec3& p) const { return apply_linear(p) + translation; }

Affine Affine::uniform_scale(double s) {
    Affine a;
    a.linear = {s, 0, 0, 0, s, 0, 0, 0, s};
    return a;
}

Affine Affine::rotation(const Quat& in) {
    const Quat q = in.normalized();
    const double xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
    const double xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
    const double wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
    Affine a;
    a.linear = {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
                2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
                2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
    return a;
}

Affine operator*(const Affine& a, const Affine& b) {
    Affine r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a.linear[i * 3 + k] * b.linear[k * 3 + j];
            r.linear[i * 3 + j] = s;
        }
    }
    r.translation = a.apply(b.translation);
    return r;
}

Affine Transform::to_affine() const {
    Affine r = Affine::rotation(rotation());
    for (int i = 0; i < 3; ++i) {
        r.linear[i * 3 + 0] *= scale.x;
        r.linear[i * 3 + 1] *= scale.y;
        r.linear[i * 3 + 2] *= scale.z;
    }
    r.translation = position;
    return r;
}

}  // namespace dtwin
