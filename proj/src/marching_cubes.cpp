#include "crownfill/marching_cubes.hpp"

#include <cmath>
#include <unordered_map>

#include "crownfill/mc_tables.hpp"

namespace crownfill {

namespace {

// Bourke's corner layout: ring 0-1-2-3 at the lower y face, 4-7 above it.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
                               {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

TriangleMesh marching_cubes(const SdfGrid& grid, double iso) {
    TriangleMesh mesh;
    const int n = grid.resolution();

    // Canonical global edge id -> welded vertex index. The id is the edge's
    // lower corner plus its axis, so adjacent cells agree exactly.
    std::unordered_map<uint64_t, int> edge_vertex;
    auto vertex_on_edge = [&](int ax, int ay, int az, int bx, int by, int bz) {
        int axis = (bx != ax) ? 0 : (by != ay) ? 1 : 2;
        int lx = std::min(ax, bx), ly = std::min(ay, by), lz = std::min(az, bz);
        uint64_t key = ((static_cast<uint64_t>(lz) * n + ly) * n + lx) * 3 + axis;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;

        double v0 = grid.at(lx, ly, lz);
        int hx = std::max(ax, bx), hy = std::max(ay, by), hz = std::max(az, bz);
        double v1 = grid.at(hx, hy, hz);
        double t = (v1 == v0) ? 0.5 : clamp((iso - v0) / (v1 - v0), 0.0, 1.0);
        Vec3 p0 = grid.voxel_center(lx, ly, lz);
        Vec3 p1 = grid.voxel_center(hx, hy, hz);
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p0 + (p1 - p0) * t);
        edge_vertex.emplace(key, idx);
        return idx;
    };

    int edge_verts[12];
    for (int k = 0; k + 1 < n; ++k)
        for (int j = 0; j + 1 < n; ++j)
            for (int i = 0; i + 1 < n; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c)
                    if (grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso)
                        cube |= 1 << c;
                if (kMcEdgeTable[cube] == 0) continue;

                for (int e = 0; e < 12; ++e)
                    if (kMcEdgeTable[cube] & (1 << e)) {
                        int ca = kEdgeEnds[e][0], cb = kEdgeEnds[e][1];
                        edge_verts[e] = vertex_on_edge(
                            i + kCorner[ca][0], j + kCorner[ca][1], k + kCorner[ca][2],
                            i + kCorner[cb][0], j + kCorner[cb][1], k + kCorner[cb][2]);
                    }

                for (int t = 0; kMcTriTable[cube][t] != -1; t += 3) {
                    int a = edge_verts[kMcTriTable[cube][t]];
                    int b = edge_verts[kMcTriTable[cube][t + 1]];
                    int c = edge_verts[kMcTriTable[cube][t + 2]];
                    if (a == b || b == c || a == c) continue;  // collapsed at a corner
                    mesh.faces.push_back({a, b, c});
                }
            }
    return mesh;
}

}  // namespace crownfill
