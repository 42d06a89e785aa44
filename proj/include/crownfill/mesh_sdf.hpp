#pragma once

#include <vector>

#include "crownfill/mesh.hpp"
#include "crownfill/sdf_grid.hpp"

namespace crownfill {

// Immutable nearest-triangle index over a mesh. Sign queries use
// angle-weighted pseudo-normals at the closest feature (Baerentzen-Aanaes),
// which tolerates small holes in near-watertight meshes.
class MeshDistanceQuery {
public:
    explicit MeshDistanceQuery(const TriangleMesh& mesh);

    struct Result {
        double distance = 0.0;  // unsigned
        double sign = 1.0;      // -1 inside, +1 outside
        Vec3 closest{};
        int face = -1;
    };

    Result nearest(const Vec3& point) const;
    double signed_distance(const Vec3& point) const;

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1;  // children, or leaf range when left < 0
        int begin = 0, end = 0;
    };

    int build(int begin, int end, std::vector<Aabb>& face_boxes, std::vector<Vec3>& centroids);

    std::vector<Vec3> verts_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<int> order_;  // face indices, BVH leaf ranges point here
    std::vector<Node> nodes_;

    std::vector<Vec3> face_normals_;    // unit
    std::vector<Vec3> vertex_normals_;  // angle-weighted sums
    std::vector<std::array<Vec3, 3>> edge_normals_;  // per face edge (v0v1, v1v2, v2v0)
};

// Samples the mesh's signed distance onto a grid, clamped to +-kTruncation.
// Throws ValidationError on an empty mesh.
SdfGrid mesh_to_sdf(const TriangleMesh& mesh, int resolution, const Vec3& origin, double spacing);

}  // namespace crownfill
