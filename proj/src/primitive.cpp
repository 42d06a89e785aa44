#include "crownfill/primitive.hpp"

#include <cmath>

#include "crownfill/error.hpp"

namespace crownfill {

const char* primitive_kind_name(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::Cube: return "cube";
        case PrimitiveKind::Cylinder: return "cylinder";
        case PrimitiveKind::Capsule: return "capsule";
        case PrimitiveKind::Cone: return "cone";
    }
    return "?";
}

Primitive Primitive::sphere(double radius) {
    Primitive p;
    p.kind = PrimitiveKind::Sphere;
    p.size = {radius, radius, radius};
    p.validate();
    return p;
}

Primitive Primitive::cube(const Vec3& half_extents) {
    Primitive p;
    p.kind = PrimitiveKind::Cube;
    p.size = half_extents;
    p.validate();
    return p;
}

Primitive Primitive::cylinder(double radius, double half_height) {
    Primitive p;
    p.kind = PrimitiveKind::Cylinder;
    p.size = {radius, half_height, 0.0};
    p.size.z = radius;  // unused slot kept positive for validation
    p.validate();
    return p;
}

Primitive Primitive::capsule(double radius, double half_height) {
    Primitive p;
    p.kind = PrimitiveKind::Capsule;
    p.size = {radius, half_height, radius};
    p.validate();
    return p;
}

Primitive Primitive::cone(double base_radius, double half_height) {
    Primitive p;
    p.kind = PrimitiveKind::Cone;
    p.size = {base_radius, half_height, base_radius};
    p.validate();
    return p;
}

Primitive& Primitive::with_pose(const Mat3& rot, const Vec3& trans) {
    rotation = rot;
    translation = trans;
    validate();
    return *this;
}

Primitive& Primitive::with_scale(const Vec3& s) {
    scale = s;
    validate();
    return *this;
}

void Primitive::validate() const {
    if (!(size.x > 0.0 && size.y > 0.0 && size.z > 0.0))
        throw ValidationError("Primitive: size parameters must be strictly positive");
    if (!(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0))
        throw ValidationError("Primitive: scale must be strictly positive");
    Mat3 rtr = rotation.transposed() * rotation;
    double off = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r)
            off += std::fabs(rtr.col[c][r] - (c == r ? 1.0 : 0.0));
    if (off > 1e-9 || std::fabs(rotation.det() - 1.0) > 1e-9)
        throw ValidationError("Primitive: rotation must be orthonormal with det +1");
}

namespace {

double sd_sphere(const Vec3& p, double r) { return length(p) - r; }

double sd_box(const Vec3& p, const Vec3& h) {
    Vec3 q = p.cwise_abs() - h;
    Vec3 qpos = q.cwise_max(Vec3{0, 0, 0});
    return length(qpos) + std::min(q.max_component(), 0.0);
}

double sd_cylinder(const Vec3& p, double r, double h) {
    double dr = std::sqrt(p.x * p.x + p.y * p.y) - r;
    double dz = std::fabs(p.z) - h;
    double inside = std::min(std::max(dr, dz), 0.0);
    double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
    return inside + std::sqrt(ox * ox + oz * oz);
}

double sd_capsule(const Vec3& p, double r, double h) {
    double zc = clamp(p.z, -h, h);
    Vec3 d{p.x, p.y, p.z - zc};
    return length(d) - r;
}

// Capped cone with base radius r1 at z=-h and apex at z=+h.
double sd_cone(const Vec3& p, double r1, double h) {
    const double r2 = 0.0;
    double qx = std::sqrt(p.x * p.x + p.y * p.y);
    double qy = p.z;
    double k1x = r2, k1y = h;
    double k2x = r2 - r1, k2y = 2.0 * h;
    double cax = qx - std::min(qx, (qy < 0.0) ? r1 : r2);
    double cay = std::fabs(qy) - h;
    double t = clamp(((k1x - qx) * k2x + (k1y - qy) * k2y) / (k2x * k2x + k2y * k2y), 0.0, 1.0);
    double cbx = qx - k1x + k2x * t;
    double cby = qy - k1y + k2y * t;
    double s = (cbx < 0.0 && cay < 0.0) ? -1.0 : 1.0;
    return s * std::sqrt(std::min(cax * cax + cay * cay, cbx * cbx + cby * cby));
}

}  // namespace

double eval_primitive(const Primitive& prim, const Vec3& point) {
    Vec3 local = prim.rotation.transposed() * (point - prim.translation);
    local = local.cwise_div(prim.scale);
    double d = 0.0;
    switch (prim.kind) {
        case PrimitiveKind::Sphere: d = sd_sphere(local, prim.size.x); break;
        case PrimitiveKind::Cube: d = sd_box(local, prim.size); break;
        case PrimitiveKind::Cylinder: d = sd_cylinder(local, prim.size.x, prim.size.y); break;
        case PrimitiveKind::Capsule: d = sd_capsule(local, prim.size.x, prim.size.y); break;
        case PrimitiveKind::Cone: d = sd_cone(local, prim.size.x, prim.size.y); break;
    }
    return d * prim.scale.min_component();
}

}  // namespace crownfill
