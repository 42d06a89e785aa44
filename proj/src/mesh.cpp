#include "crownfill/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crownfill/error.hpp"

namespace crownfill {

Aabb TriangleMesh::bounds() const {
    Aabb box;
    for (const Vec3& v : vertices) box.expand(v);
    return box;
}

double TriangleMesh::area() const {
    double total = 0.0;
    for (const auto& f : faces) {
        const Vec3& a = vertices[f[0]];
        total += 0.5 * length(cross(vertices[f[1]] - a, vertices[f[2]] - a));
    }
    return total;
}

int TriangleMesh::drop_degenerate_faces(double area_eps) {
    const int nv = static_cast<int>(vertices.size());
    std::vector<std::array<int, 3>> kept;
    kept.reserve(faces.size());
    int dropped = 0;
    for (const auto& f : faces) {
        bool bad = false;
        for (int idx : f)
            if (idx < 0 || idx >= nv) bad = true;
        if (!bad && (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])) bad = true;
        if (!bad) {
            const Vec3& a = vertices[f[0]];
            double area2 = length(cross(vertices[f[1]] - a, vertices[f[2]] - a));
            if (area2 < area_eps) bad = true;
        }
        if (bad) ++dropped;
        else kept.push_back(f);
    }
    faces = std::move(kept);
    return dropped;
}

void TriangleMesh::transform(double scale, const Vec3& pre_translate) {
    for (Vec3& v : vertices) v = (v + pre_translate) * scale;
}

void TriangleMesh::apply(const Mat3& rot, const Vec3& trans, double scale) {
    for (Vec3& v : vertices) v = rot * v * scale + trans;
}

std::vector<Vec3> sample_surface_points(const TriangleMesh& mesh, int count, uint64_t seed) {
    std::vector<Vec3> points;
    if (mesh.faces.empty() || count <= 0) return points;
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.vertices[tri[0]];
        total += 0.5 * length(cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a));
        cumulative[f] = total;
    }
    if (total <= 0.0) return points;
    Rng rng(seed);
    points.reserve(count);
    for (int s = 0; s < count; ++s) {
        double r = rng.uniform() * total;
        size_t f = std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin();
        if (f >= mesh.faces.size()) f = mesh.faces.size() - 1;
        const auto& tri = mesh.faces[f];
        double u = rng.uniform(), v = rng.uniform();
        double su = std::sqrt(u);
        double b0 = 1.0 - su, b1 = su * (1.0 - v), b2 = su * v;
        points.push_back(mesh.vertices[tri[0]] * b0 + mesh.vertices[tri[1]] * b1 +
                         mesh.vertices[tri[2]] * b2);
    }
    return points;
}

TriangleMesh load_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_obj: cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z))
                throw ValidationError("load_obj: malformed vertex at " + path + ":" +
                                      std::to_string(lineno));
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string token;
            while (ss >> token) {
                // accept "i", "i/t", "i/t/n", "i//n"
                size_t slash = token.find('/');
                std::string head = slash == std::string::npos ? token : token.substr(0, slash);
                int i = 0;
                try {
                    i = std::stoi(head);
                } catch (...) {
                    throw ValidationError("load_obj: malformed face at " + path + ":" +
                                          std::to_string(lineno));
                }
                if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
                idx.push_back(i - 1);
            }
            if (idx.size() < 3)
                throw ValidationError("load_obj: face with <3 vertices at " + path + ":" +
                                      std::to_string(lineno));
            for (size_t t = 1; t + 1 < idx.size(); ++t)
                mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
        }
    }
    for (const auto& f : mesh.faces)
        for (int i : f)
            if (i < 0 || i >= static_cast<int>(mesh.vertices.size()))
                throw ValidationError("load_obj: face index out of range in " + path);
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("save_obj: cannot open " + path);
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        os << buf;
    }
    for (const auto& f : mesh.faces)
        os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!os) throw IoError("save_obj: write failed for " + path);
}

namespace {

// Sutherland-Hodgman clip of a convex polygon against one axis plane.
void clip_axis(std::vector<Vec3>& poly, int axis, double bound, bool keep_below) {
    std::vector<Vec3> out;
    out.reserve(poly.size() + 2);
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec3& cur = poly[i];
        const Vec3& nxt = poly[(i + 1) % n];
        double dc = keep_below ? bound - cur[axis] : cur[axis] - bound;
        double dn = keep_below ? bound - nxt[axis] : nxt[axis] - bound;
        if (dc >= 0.0) out.push_back(cur);
        if ((dc >= 0.0) != (dn >= 0.0)) {
            double t = dc / (dc - dn);
            out.push_back(cur + (nxt - cur) * t);
        }
    }
    poly = std::move(out);
}

}  // namespace

TriangleMesh clip_to_box(const TriangleMesh& mesh, const Aabb& box) {
    TriangleMesh out;
    for (const auto& f : mesh.faces) {
        std::vector<Vec3> poly{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
        for (int axis = 0; axis < 3 && !poly.empty(); ++axis) {
            clip_axis(poly, axis, box.hi[axis], true);
            if (!poly.empty()) clip_axis(poly, axis, box.lo[axis], false);
        }
        if (poly.size() < 3) continue;
        int base = static_cast<int>(out.vertices.size());
        for (const Vec3& v : poly) out.vertices.push_back(v);
        for (size_t t = 1; t + 1 < poly.size(); ++t)
            out.faces.push_back({base, base + static_cast<int>(t), base + static_cast<int>(t) + 1});
    }
    out.drop_degenerate_faces();
    return out;
}

}  // namespace crownfill
