#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crownfill/math.hpp"
#include "crownfill/rng.hpp"

namespace crownfill {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    bool empty() const { return faces.empty(); }
    Aabb bounds() const;
    double area() const;

    // Drops faces with out-of-range indices, repeated indices, or (near) zero
    // area. Returns the number of removed faces.
    int drop_degenerate_faces(double area_eps = 1e-14);

    void transform(double scale, const Vec3& pre_translate);  // x -> scale * (x + pre_translate)
    void apply(const Mat3& rot, const Vec3& trans, double scale);  // x -> scale * rot * x + trans
};

// Area-uniform surface samples; deterministic for a fixed seed.
std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, int count, uint64_t seed);

// Plain OBJ with v/f records, 1-based indices. Polygons are fan-triangulated
// on load. Throws IoError / ValidationError.
TriangleMesh load_obj(const std::string& path);
void save_obj(const TriangleMesh& mesh, const std::string& path);

// Clips the mesh to an axis-aligned box, slicing triangles at the boundary.
TriangleMesh clip_to_box(const TriangleMesh& mesh, const Aabb& box);

}  // namespace crownfill
