#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "crownfill/arch.hpp"
#include "crownfill/error.hpp"
#include "crownfill/extract.hpp"
#include "crownfill/marching_cubes.hpp"
#include "crownfill/mesh_sdf.hpp"
#include "support/shapes.hpp"

using namespace crownfill;
using namespace crownfill::testsupport;

namespace {

// V - E + F with unique undirected edges.
int euler_characteristic(const TriangleMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edges.size()) +
           static_cast<int>(mesh.faces.size());
}

}  // namespace

TEST_CASE("obj round trip") {
    TriangleMesh box = box_mesh({-1, -2, -0.5}, {1, 0.5, 2});
    save_obj(box, "box_test.obj");
    TriangleMesh back = load_obj("box_test.obj");
    REQUIRE(back.vertices.size() == box.vertices.size());
    REQUIRE(back.faces.size() == box.faces.size());
    for (size_t i = 0; i < box.vertices.size(); ++i)
        CHECK(length(back.vertices[i] - box.vertices[i]) < 1e-7);
    CHECK(back.faces == box.faces);
    std::remove("box_test.obj");
}

TEST_CASE("load_arch validation errors are distinct") {
    TriangleMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    save_obj(tri, "arch_test.obj");

    SUBCASE("label count mismatch") {
        std::ofstream os("arch_test.labels.json");
        os << R"({"labels": [11, 11], "jaw": "lower"})";
        os.close();
        CHECK_THROWS_WITH_AS(load_arch("arch_test.obj", "arch_test.labels.json"),
                             doctest::Contains("does not match vertex count"), ValidationError);
    }
    SUBCASE("unknown FDI code") {
        std::ofstream os("arch_test.labels.json");
        os << R"({"labels": [11, 99, 11], "jaw": "lower"})";
        os.close();
        CHECK_THROWS_WITH_AS(load_arch("arch_test.obj", "arch_test.labels.json"),
                             doctest::Contains("unknown FDI"), ValidationError);
    }
    SUBCASE("unparseable label file") {
        std::ofstream os("arch_test.labels.json");
        os << "{not json";
        os.close();
        CHECK_THROWS_AS(load_arch("arch_test.obj", "arch_test.labels.json"), ValidationError);
    }
    SUBCASE("missing mesh file") {
        CHECK_THROWS_AS(load_arch("no_such_file.obj", "arch_test.labels.json"), IoError);
    }
    std::remove("arch_test.obj");
    std::remove("arch_test.labels.json");
}

TEST_CASE("phantom arch: determinism, validity, save/load round trip") {
    LabeledArch a = generate_phantom_arch(123);
    LabeledArch b = generate_phantom_arch(123);
    REQUIRE(a.mesh.vertices.size() == b.mesh.vertices.size());
    for (size_t i = 0; i < a.mesh.vertices.size(); ++i) {
        CHECK(a.mesh.vertices[i].x == b.mesh.vertices[i].x);
        CHECK(a.mesh.vertices[i].y == b.mesh.vertices[i].y);
        CHECK(a.mesh.vertices[i].z == b.mesh.vertices[i].z);
    }
    CHECK(a.labels == b.labels);
    CHECK(a.tooth_fdis().size() == 14);
    CHECK_NOTHROW(a.validate());

    LabeledArch different = generate_phantom_arch(124);
    int changed = 0;
    for (size_t i = 0; i < std::min(a.mesh.vertices.size(), different.mesh.vertices.size()); ++i)
        if (length(a.mesh.vertices[i] - different.mesh.vertices[i]) > 1e-12) ++changed;
    CHECK(changed > 100);

    save_arch(a, "phantom_test.obj", "phantom_test.labels.json");
    LabeledArch loaded = load_arch("phantom_test.obj", "phantom_test.labels.json");
    CHECK(loaded.mesh.vertices.size() == a.mesh.vertices.size());
    CHECK(loaded.labels == a.labels);
    CHECK(loaded.jaw == a.jaw);
    CHECK(loaded.arch_id == a.arch_id);

    // idempotence of the save/load cycle on the data model
    save_arch(loaded, "phantom_test2.obj", "phantom_test2.labels.json");
    LabeledArch loaded2 = load_arch("phantom_test2.obj", "phantom_test2.labels.json");
    CHECK(loaded2.labels == loaded.labels);
    REQUIRE(loaded2.mesh.vertices.size() == loaded.mesh.vertices.size());
    for (size_t i = 0; i < loaded.mesh.vertices.size(); ++i)
        CHECK(length(loaded2.mesh.vertices[i] - loaded.mesh.vertices[i]) == 0.0);
    std::remove("phantom_test.obj");
    std::remove("phantom_test.labels.json");
    std::remove("phantom_test2.obj");
    std::remove("phantom_test2.labels.json");
}

TEST_CASE("phantom upper jaw mirrors with valid upper FDIs") {
    LabeledArch upper = generate_phantom_arch(55, Jaw::Upper);
    CHECK(upper.jaw == Jaw::Upper);
    for (int fdi : upper.tooth_fdis()) {
        int quadrant = fdi / 10;
        CHECK((quadrant == 1 || quadrant == 2));
    }
    CHECK(upper.tooth_fdis().size() == 14);
}

TEST_CASE("extract_tooth_context works for every phantom tooth") {
    LabeledArch arch = generate_phantom_arch(77);
    for (int fdi : arch.tooth_fdis()) {
        ToothContext tc = extract_tooth_context(arch, fdi);
        CHECK(!tc.tooth.empty());
        CHECK(tc.context.vertices.size() > tc.tooth.vertices.size());
        Aabb tooth_box = tc.tooth.bounds();
        for (int axis = 0; axis < 3; ++axis) {
            CHECK(tooth_box.lo[axis] >= -0.9 - 1e-9);
            CHECK(tooth_box.hi[axis] <= 0.9 + 1e-9);
        }
    }
    CHECK_THROWS_AS(extract_tooth_context(arch, 18), ValidationError);  // not in lower jaw
}

TEST_CASE("mesh_to_sdf matches the analytic sphere oracle") {
    TriangleMesh sphere = icosphere(0.8, 3);
    const int n = 32;
    const double spacing = 2.0 / (n - 1);
    SdfGrid grid = mesh_to_sdf(sphere, n, {-1, -1, -1}, spacing);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double v = grid.at(i, j, k);
                if (std::fabs(v) >= kTruncation - 1e-6) continue;
                double analytic = length(grid.voxel_center(i, j, k)) - 0.8;
                CHECK(std::fabs(v - analytic) < 1.5 * spacing);
            }
}

TEST_CASE("mesh_to_sdf sign sanity on a box mesh") {
    TriangleMesh box = box_mesh({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
    SdfGrid grid = mesh_to_sdf(box, 16, {-1, -1, -1}, 2.0 / 15);
    // center voxel (nearest to origin) negative, corner-region voxel positive
    int c = 7;
    double best = 1e9;
    for (int i = 0; i < 16; ++i) {
        double x = -1.0 + i * (2.0 / 15);
        if (std::fabs(x) < best) { best = std::fabs(x); c = i; }
    }
    CHECK(grid.at(c, c, c) < 0.0f);
    CHECK(grid.at(0, 0, 0) > 0.0f);
    CHECK_THROWS_AS(mesh_to_sdf(TriangleMesh{}, 8, {-1, -1, -1}, 0.25), ValidationError);
}

TEST_CASE("mesh_to_sdf sign flips exactly once along a ray out of a convex mesh") {
    TriangleMesh sphere = icosphere(0.7, 2);
    MeshDistanceQuery query(sphere);
    int flips = 0;
    double prev = query.signed_distance({0, 0, 0});
    CHECK(prev < 0.0);
    for (int s = 1; s <= 200; ++s) {
        double r = 1.5 * s / 200.0;
        double d = query.signed_distance({r, 0, 0});
        if ((d < 0) != (prev < 0)) ++flips;
        prev = d;
    }
    CHECK(flips == 1);
    CHECK(prev > 0.0);
}

TEST_CASE("marching cubes basics") {
    SUBCASE("all-positive grid gives an empty mesh") {
        SdfGrid g(8, {-1, -1, -1}, 2.0 / 7, kTruncation);
        TriangleMesh m = marching_cubes(g);
        CHECK(m.vertices.empty());
        CHECK(m.faces.empty());
    }
    SUBCASE("analytic sphere: vertices on the surface, Euler characteristic 2") {
        const int n = 32;
        const double spacing = 2.0 / (n - 1);
        SdfGrid g = sample_to_grid([](const Vec3& p) { return length(p) - 0.8; }, n, {-1, -1, -1},
                                   spacing);
        TriangleMesh m = marching_cubes(g);
        REQUIRE(!m.empty());
        for (const Vec3& v : m.vertices) {
            CHECK(std::isfinite(v.x));
            CHECK(std::fabs(length(v) - 0.8) < spacing);
        }
        for (const auto& f : m.faces)
            for (int idx : f) {
                CHECK(idx >= 0);
                CHECK(idx < static_cast<int>(m.vertices.size()));
            }
        CHECK(euler_characteristic(m) == 2);
    }
    SUBCASE("triangles are wound outward (positive signed volume)") {
        SdfGrid g = sample_to_grid([](const Vec3& p) { return length(p) - 0.6; }, 24, {-1, -1, -1},
                                   2.0 / 23);
        TriangleMesh m = marching_cubes(g);
        double vol = 0.0;
        for (const auto& f : m.faces)
            vol += dot(m.vertices[f[0]], cross(m.vertices[f[1]], m.vertices[f[2]])) / 6.0;
        CHECK(vol > 0.8);  // analytic: 0.9048
        CHECK(vol < 1.0);
    }
}

TEST_CASE("mesh_to_sdf / marching_cubes round trip is stable") {
    TriangleMesh sphere = icosphere(0.75, 3);
    const int n = 32;
    const double spacing = 2.0 / (n - 1);
    SdfGrid first = mesh_to_sdf(sphere, n, {-1, -1, -1}, spacing);
    TriangleMesh extracted = marching_cubes(first);
    SdfGrid second = mesh_to_sdf(extracted, n, {-1, -1, -1}, spacing);
    double max_err = 0.0;
    for (size_t i = 0; i < first.voxel_count(); ++i) {
        double a = first.values()[i], b = second.values()[i];
        if (std::fabs(a) >= kTruncation - 1e-6 || std::fabs(b) >= kTruncation - 1e-6) continue;
        max_err = std::max(max_err, std::fabs(a - b));
    }
    CHECK(max_err < 2.0 * spacing);
}
