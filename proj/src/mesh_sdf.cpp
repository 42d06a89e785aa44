#include "crownfill/mesh_sdf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "crownfill/error.hpp"

namespace crownfill {

namespace {

enum class Feature { Face, EdgeAB, EdgeBC, EdgeCA, VertA, VertB, VertC };

// Ericson, Real-Time Collision Detection 5.1.5.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Feature& feature) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) { feature = Feature::VertA; return a; }

    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) { feature = Feature::VertB; return b; }

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        feature = Feature::EdgeAB;
        return a + ab * (d1 / (d1 - d3));
    }

    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) { feature = Feature::VertC; return c; }

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        feature = Feature::EdgeCA;
        return a + ac * (d2 / (d2 - d6));
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        feature = Feature::EdgeBC;
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }

    feature = Feature::Face;
    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

double corner_angle(const Vec3& corner, const Vec3& p1, const Vec3& p2) {
    Vec3 u = normalized(p1 - corner), v = normalized(p2 - corner);
    return std::acos(clamp(dot(u, v), -1.0, 1.0));
}

}  // namespace

MeshDistanceQuery::MeshDistanceQuery(const TriangleMesh& mesh)
    : verts_(mesh.vertices), faces_(mesh.faces) {
    if (faces_.empty()) throw ValidationError("MeshDistanceQuery: empty mesh");

    const size_t nf = faces_.size();
    face_normals_.resize(nf);
    vertex_normals_.assign(verts_.size(), Vec3{0, 0, 0});
    edge_normals_.assign(nf, {Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{0, 0, 0}});

    std::map<std::pair<int, int>, Vec3> edge_accum;
    auto edge_key = [](int u, int v) { return std::make_pair(std::min(u, v), std::max(u, v)); };

    for (size_t f = 0; f < nf; ++f) {
        const auto& tri = faces_[f];
        const Vec3 &a = verts_[tri[0]], &b = verts_[tri[1]], &c = verts_[tri[2]];
        Vec3 n = normalized(cross(b - a, c - a));
        face_normals_[f] = n;
        vertex_normals_[tri[0]] += n * corner_angle(a, b, c);
        vertex_normals_[tri[1]] += n * corner_angle(b, c, a);
        vertex_normals_[tri[2]] += n * corner_angle(c, a, b);
        edge_accum[edge_key(tri[0], tri[1])] += n;
        edge_accum[edge_key(tri[1], tri[2])] += n;
        edge_accum[edge_key(tri[2], tri[0])] += n;
    }
    for (size_t f = 0; f < nf; ++f) {
        const auto& tri = faces_[f];
        edge_normals_[f][0] = edge_accum[edge_key(tri[0], tri[1])];
        edge_normals_[f][1] = edge_accum[edge_key(tri[1], tri[2])];
        edge_normals_[f][2] = edge_accum[edge_key(tri[2], tri[0])];
    }

    order_.resize(nf);
    for (size_t f = 0; f < nf; ++f) order_[f] = static_cast<int>(f);
    std::vector<Aabb> face_boxes(nf);
    std::vector<Vec3> centroids(nf);
    for (size_t f = 0; f < nf; ++f) {
        const auto& tri = faces_[f];
        for (int i = 0; i < 3; ++i) face_boxes[f].expand(verts_[tri[i]]);
        centroids[f] = (verts_[tri[0]] + verts_[tri[1]] + verts_[tri[2]]) / 3.0;
    }
    nodes_.reserve(2 * nf);
    build(0, static_cast<int>(nf), face_boxes, centroids);
}

int MeshDistanceQuery::build(int begin, int end, std::vector<Aabb>& face_boxes,
                             std::vector<Vec3>& centroids) {
    int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Aabb box;
    for (int i = begin; i < end; ++i) box.expand(face_boxes[order_[i]]);
    nodes_[idx].box = box;

    const int leaf_size = 4;
    if (end - begin <= leaf_size) {
        nodes_[idx].left = -1;
        nodes_[idx].begin = begin;
        nodes_[idx].end = end;
        return idx;
    }
    Vec3 ext = box.extents();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int fa, int fb) { return centroids[fa][axis] < centroids[fb][axis]; });
    int left = build(begin, mid, face_boxes, centroids);
    int right = build(mid, end, face_boxes, centroids);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
}

MeshDistanceQuery::Result MeshDistanceQuery::nearest(const Vec3& point) const {
    double best_sq = std::numeric_limits<double>::infinity();
    int best_face = -1;
    Vec3 best_point{};
    Feature best_feature = Feature::Face;

    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        int ni = stack[--top];
        const Node& node = nodes_[ni];
        if (node.box.dist_sq(point) >= best_sq) continue;
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                int f = order_[i];
                const auto& tri = faces_[f];
                Feature feat;
                Vec3 cp = closest_point_on_triangle(point, verts_[tri[0]], verts_[tri[1]],
                                                    verts_[tri[2]], feat);
                double d_sq = length_sq(point - cp);
                if (d_sq < best_sq) {
                    best_sq = d_sq;
                    best_face = f;
                    best_point = cp;
                    best_feature = feat;
                }
            }
        } else {
            double dl = nodes_[node.left].box.dist_sq(point);
            double dr = nodes_[node.right].box.dist_sq(point);
            // push farther child first so the nearer one is explored next
            if (dl < dr) {
                stack[top++] = node.right;
                stack[top++] = node.left;
            } else {
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        }
    }

    Result res;
    res.distance = std::sqrt(best_sq);
    res.closest = best_point;
    res.face = best_face;

    const auto& tri = faces_[best_face];
    Vec3 pseudo;
    switch (best_feature) {
        case Feature::Face: pseudo = face_normals_[best_face]; break;
        case Feature::EdgeAB: pseudo = edge_normals_[best_face][0]; break;
        case Feature::EdgeBC: pseudo = edge_normals_[best_face][1]; break;
        case Feature::EdgeCA: pseudo = edge_normals_[best_face][2]; break;
        case Feature::VertA: pseudo = vertex_normals_[tri[0]]; break;
        case Feature::VertB: pseudo = vertex_normals_[tri[1]]; break;
        case Feature::VertC: pseudo = vertex_normals_[tri[2]]; break;
    }
    res.sign = dot(point - best_point, pseudo) < 0.0 ? -1.0 : 1.0;
    return res;
}

double MeshDistanceQuery::signed_distance(const Vec3& point) const {
    Result r = nearest(point);
    return r.sign * r.distance;
}

SdfGrid mesh_to_sdf(const TriangleMesh& mesh, int resolution, const Vec3& origin, double spacing) {
    if (mesh.empty()) throw ValidationError("mesh_to_sdf: empty mesh");
    MeshDistanceQuery query(mesh);
    SdfGrid grid(resolution, origin, spacing);
    const int n = resolution;
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double d = query.signed_distance(grid.voxel_center(i, j, k));
                grid.at(i, j, k) = static_cast<float>(
                    clamp(d, -static_cast<double>(kTruncation), static_cast<double>(kTruncation)));
            }
    return grid;
}

}  // namespace crownfill
