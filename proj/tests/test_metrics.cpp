#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crownfill/arch.hpp"
#include "crownfill/error.hpp"
#include "crownfill/marching_cubes.hpp"
#include "crownfill/metrics.hpp"
#include "support/shapes.hpp"

using namespace crownfill;
using namespace crownfill::testsupport;

namespace {

SdfGrid grid16(float fill = kTruncation) { return SdfGrid(16, {-1, -1, -1}, 2.0 / 15, fill); }

SdfGrid grid2(float fill = kTruncation) { return SdfGrid(2, {0, 0, 0}, 1.0, fill); }

}  // namespace

TEST_CASE("l1_volume") {
    SdfGrid a = grid16(0.1f), b = grid16(0.1f);
    SUBCASE("identity is zero") { CHECK(l1_volume(a, b) == 0.0); }
    SUBCASE("constant offset") {
        for (float& v : b.values()) v += 0.01f;
        CHECK(l1_volume(a, b) == doctest::Approx(0.01).epsilon(1e-6));
    }
    SUBCASE("single differing voxel on a 2x2x2 grid") {
        SdfGrid p = grid2(0.0f), g = grid2(0.0f);
        p.at(1, 0, 1) = 0.2f;
        g.at(1, 0, 1) = -0.6f;
        CHECK(l1_volume(p, g) == doctest::Approx(0.8 / 8.0));
    }
    SUBCASE("masked over the full grid equals unmasked exactly") {
        Rng rng(1);
        for (float& v : a.values()) v = static_cast<float>(rng.uniform(-0.25, 0.25));
        for (float& v : b.values()) v = static_cast<float>(rng.uniform(-0.25, 0.25));
        VoxelBox full;
        full.lo[0] = full.lo[1] = full.lo[2] = 0;
        full.hi[0] = full.hi[1] = full.hi[2] = 15;
        CHECK(l1_volume(a, b, full) == l1_volume(a, b));
    }
    SUBCASE("l1 is symmetric") {
        Rng rng(2);
        for (float& v : a.values()) v = static_cast<float>(rng.uniform(-0.25, 0.25));
        CHECK(l1_volume(a, b) == l1_volume(b, a));
    }
    SUBCASE("errors") {
        SdfGrid other(8, {-1, -1, -1}, 0.25);
        CHECK_THROWS_AS(l1_volume(a, other), ValidationError);
        VoxelBox empty;
        CHECK_THROWS_AS(l1_volume(a, b, empty), ValidationError);
    }
}

TEST_CASE("iou_voxel") {
    SUBCASE("identical occupancy is 100%") {
        SdfGrid a = grid16();
        a.at(3, 3, 3) = -0.1f;
        a.at(4, 3, 3) = -0.1f;
        CHECK(iou_voxel(a, a) == 100.0);
    }
    SUBCASE("disjoint occupancies are 0%") {
        SdfGrid a = grid16(), b = grid16();
        a.at(2, 2, 2) = -0.1f;
        b.at(9, 9, 9) = -0.1f;
        CHECK(iou_voxel(a, b) == 0.0);
    }
    SUBCASE("2-and-2 with one voxel overlap is 1/3") {
        SdfGrid a = grid16(), b = grid16();
        a.at(2, 2, 2) = -0.1f;
        a.at(3, 2, 2) = -0.1f;
        b.at(3, 2, 2) = -0.1f;
        b.at(4, 2, 2) = -0.1f;
        CHECK(iou_voxel(a, b) == doctest::Approx(100.0 / 3.0));
    }
    SUBCASE("both empty is 100% by convention") {
        SdfGrid a = grid16(), b = grid16();
        CHECK(iou_voxel(a, b) == 100.0);
    }
    SUBCASE("symmetric") {
        Rng rng(3);
        SdfGrid a = grid16(), b = grid16();
        for (float& v : a.values()) v = rng.uniform() < 0.3 ? -0.1f : 0.1f;
        for (float& v : b.values()) v = rng.uniform() < 0.3 ? -0.1f : 0.1f;
        CHECK(iou_voxel(a, b) == iou_voxel(b, a));
    }
}

TEST_CASE("IoU monotonicity by brute force") {
    // exhaustive on a 2x2x2 corner embedded in a 3x3x3 grid
    auto make = [](unsigned mask) {
        SdfGrid g(3, {0, 0, 0}, 1.0, kTruncation);
        for (int b = 0; b < 8; ++b)
            if (mask & (1u << b)) g.at(b & 1, (b >> 1) & 1, (b >> 2) & 1) = -0.1f;
        return g;
    };
    for (unsigned gt_mask = 0; gt_mask < 256; ++gt_mask) {
        SdfGrid gt = make(gt_mask);
        for (unsigned pred_mask = 0; pred_mask < 256; ++pred_mask) {
            unsigned missing = gt_mask & ~pred_mask;
            if (!missing) continue;
            double before = iou_voxel(make(pred_mask), gt);
            // adding any missing ground-truth voxel never decreases IoU
            for (int b = 0; b < 8; ++b)
                if (missing & (1u << b)) {
                    double after = iou_voxel(make(pred_mask | (1u << b)), gt);
                    CHECK(after >= before - 1e-12);
                }
        }
    }
}

TEST_CASE("antagonist_interference") {
    SdfGrid tooth = grid16(), antag = grid16();
    SUBCASE("clearance is 0%") {
        tooth.at(2, 2, 2) = -0.1f;
        antag.at(9, 9, 9) = -0.1f;
        CHECK(antagonist_interference(tooth, antag) == 0.0);
    }
    SUBCASE("identical occupancy is 100%") {
        tooth.at(2, 2, 2) = -0.1f;
        CHECK(antagonist_interference(tooth, tooth) == 100.0);
    }
    SUBCASE("1 voxel overlap over a 10 voxel union is 10%") {
        for (int i = 0; i < 5; ++i) tooth.at(i, 1, 1) = -0.1f;   // 5 voxels
        for (int i = 4; i < 10; ++i) antag.at(i, 1, 1) = -0.1f;  // 6 voxels, 1 shared
        CHECK(antagonist_interference(tooth, antag) == doctest::Approx(10.0));
    }
    SUBCASE("empty union is 0% by convention") {
        CHECK(antagonist_interference(tooth, antag) == 0.0);
    }
}

TEST_CASE("chamfer") {
    SUBCASE("mesh against itself is exactly zero") {
        TriangleMesh sphere = icosphere(0.6, 2);
        CHECK(chamfer(sphere, sphere, 2000) == 0.0);
    }
    SUBCASE("parallel unit squares approach the squared offset") {
        auto square = [](double z) {
            TriangleMesh m;
            m.vertices = {{0, 0, z}, {1, 0, z}, {1, 1, z}, {0, 1, z}};
            m.faces = {{0, 1, 2}, {0, 2, 3}};
            return m;
        };
        double d = 0.35;
        double cd = chamfer(square(0.0), square(d), 20000);
        CHECK(cd == doctest::Approx(d * d).epsilon(0.02));
        CHECK(cd >= d * d - 1e-12);  // nearest distance can only exceed the plane gap
    }
    SUBCASE("exactly symmetric") {
        TriangleMesh a = icosphere(0.5, 2);
        TriangleMesh b = box_mesh({-0.4, -0.4, -0.4}, {0.4, 0.4, 0.4});
        CHECK(chamfer(a, b, 3000) == chamfer(b, a, 3000));
    }
    SUBCASE("empty mesh rejected") {
        TriangleMesh empty;
        CHECK_THROWS_AS(chamfer(empty, icosphere(0.5, 1), 100), ValidationError);
    }
}

TEST_CASE("evaluate_sample") {
    // small deterministic sample with a sphere "tooth"
    CompletionSample sample;
    const int n = 24;
    sample.ground_truth = sample_to_grid([](const Vec3& p) { return length(p) - 0.55; }, n,
                                         {-1, -1, -1}, 2.0 / (n - 1));
    // context: the same sphere with a bite removed (half-space cut)
    SdfGrid bite = sample_to_grid([](const Vec3& p) { return 0.25 - p.z; }, n, {-1, -1, -1},
                                  2.0 / (n - 1));
    sample.context = csg_difference(sample.ground_truth, bite);
    sample.tooth_bbox = occupancy_bbox(sample.ground_truth);
    SdfGrid antag = sample_to_grid([](const Vec3& p) { return length(p - Vec3{0, 0, 0.9}) - 0.3; },
                                   n, {-1, -1, -1}, 2.0 / (n - 1));
    sample.antagonist = antag;

    SUBCASE("perfect completion") {
        MetricReport r = evaluate_sample(sample.ground_truth, sample, 4000);
        CHECK(r.l1 == 0.0);
        CHECK(r.masked_l1 == 0.0);
        CHECK(r.iou_pct == 100.0);
        CHECK(r.masked_iou_pct == 100.0);
        CHECK(r.chamfer == 0.0);
        CHECK(r.masked_chamfer == 0.0);
        REQUIRE(r.iou_antag_pred_pct.has_value());
        REQUIRE(r.iou_antag_gt_pct.has_value());
        CHECK(*r.iou_antag_pred_pct == *r.iou_antag_gt_pct);
    }
    SUBCASE("no completion (pred == context) scores below 100% masked IoU") {
        MetricReport r = evaluate_sample(sample.context, sample, 4000);
        CHECK(r.masked_iou_pct < 100.0);
        CHECK(r.masked_l1 > 0.0);
        // report invariants
        CHECK(r.l1 >= 0.0);
        CHECK(r.chamfer >= 0.0);
        CHECK(r.iou_pct >= 0.0);
        CHECK(r.iou_pct <= 100.0);
        CHECK(r.masked_iou_pct >= 0.0);
    }
    SUBCASE("antagonist metrics absent when the sample has none") {
        sample.antagonist.reset();
        MetricReport r = evaluate_sample(sample.ground_truth, sample, 2000);
        CHECK(!r.iou_antag_pred_pct.has_value());
        CHECK(!r.iou_antag_gt_pct.has_value());
    }
}

TEST_CASE("report serialization and aggregation") {
    MetricReport r1;
    r1.l1 = 0.01;
    r1.masked_l1 = 0.02;
    r1.chamfer = 3.0;
    r1.masked_chamfer = 2.0;
    r1.iou_pct = 80.0;
    r1.masked_iou_pct = 85.0;
    MetricReport r2 = r1;
    r2.iou_pct = 90.0;
    r2.iou_antag_pred_pct = 0.5;
    r2.iou_antag_gt_pct = 0.25;

    std::vector<std::pair<std::string, MetricReport>> reports{{"a", r1}, {"b", r2}};
    AggregateTable table = aggregate_reports(reports);
    CHECK(table.iou.mean == doctest::Approx(85.0));
    CHECK(table.iou.stddev == doctest::Approx(5.0));
    CHECK(table.iou.count == 2);
    CHECK(table.iou_antag_pred.count == 1);

    std::string text = aggregate_to_text(table);
    CHECK(text.find("mIoU") != std::string::npos);
    CHECK(text.find("CD (x1e4)") != std::string::npos);

    write_reports_jsonl(reports, "reports_test.jsonl");
    std::ifstream is("reports_test.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) {
        ++lines;
        CHECK(line.find("\"l1\"") != std::string::npos);
    }
    CHECK(lines == 2);
    std::remove("reports_test.jsonl");
}
