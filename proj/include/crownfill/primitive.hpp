#pragma once

#include <string>

#include "crownfill/math.hpp"

namespace crownfill {

enum class PrimitiveKind { Sphere, Cube, Cylinder, Capsule, Cone };

const char* primitive_kind_name(PrimitiveKind kind);

// Analytic solid with a rigid pose plus per-axis scale. Distances are exact
// for uniform scale; under anisotropic scale (and for the cone) the value is
// a conservative lower bound with an exact zero level set.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    // size[0..2]: meaning depends on kind.
    //   Sphere:   radius
    //   Cube:     half extents x/y/z
    //   Cylinder: radius, half height (z axis)
    //   Capsule:  radius, half height of the core segment (z axis)
    //   Cone:     base radius, half height (base at -z, apex at +z)
    Vec3 size{1, 1, 1};
    Mat3 rotation = Mat3::identity();
    Vec3 translation{0, 0, 0};
    Vec3 scale{1, 1, 1};

    static Primitive sphere(double radius);
    static Primitive cube(const Vec3& half_extents);
    static Primitive cylinder(double radius, double half_height);
    static Primitive capsule(double radius, double half_height);
    static Primitive cone(double base_radius, double half_height);

    Primitive& with_pose(const Mat3& rot, const Vec3& trans);
    Primitive& with_scale(const Vec3& s);

    // Throws ValidationError on non-positive sizes/scale or a non-rotation matrix.
    void validate() const;
};

double eval_primitive(const Primitive& prim, const Vec3& point);

}  // namespace crownfill
