#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "crownfill/augment.hpp"
#include "crownfill/error.hpp"
#include "crownfill/mesh_sdf.hpp"
#include "crownfill/rng.hpp"

using namespace crownfill;
namespace fs = std::filesystem;

namespace {

AugmentConfig small_config(int resolution = 24) {
    AugmentConfig config;
    config.resolution = resolution;
    config.max_primitives = 3;
    config.variants_per_tooth = 1;
    return config;
}

struct Fixture {
    LabeledArch arch = generate_phantom_arch(2024);
    LabeledArch upper = generate_phantom_arch(2024, Jaw::Upper);
};

}  // namespace

TEST_CASE("extract round trip through the inverse transform") {
    Fixture fx;
    ToothContext tc = extract_tooth_context(fx.arch, 36);
    // rebuild the original tooth vertices by inverting the normalization
    std::vector<int> tooth_faces;
    std::vector<Vec3> original;
    for (size_t f = 0; f < fx.arch.mesh.faces.size(); ++f) {
        const auto& tri = fx.arch.mesh.faces[f];
        if (fx.arch.labels[tri[0]] == 36 && fx.arch.labels[tri[1]] == 36 &&
            fx.arch.labels[tri[2]] == 36)
            for (int c = 0; c < 3; ++c) original.push_back(fx.arch.mesh.vertices[tri[c]]);
    }
    size_t oi = 0;
    for (const auto& tri : tc.tooth.faces)
        for (int c = 0; c < 3; ++c) {
            Vec3 recon = tc.norm.inverse(tc.tooth.vertices[tri[c]]);
            CHECK(length(recon - original[oi]) < 1e-6);
            ++oi;
        }
}

TEST_CASE("synthesize_damage honors the zero-primitive hook") {
    Fixture fx;
    ToothContext tc = extract_tooth_context(fx.arch, 41);
    AugmentConfig config = small_config();
    SdfGrid tooth = mesh_to_sdf(tc.tooth, config.resolution, {-1, -1, -1},
                                2.0 / (config.resolution - 1));
    std::vector<Vec3> points = sample_surface_points(tc.tooth, 512, 1);

    config.max_primitives = 0;
    DamageResult result = synthesize_damage(tooth, points, config, 99);
    CHECK(result.damaged.values() == tooth.values());
    CHECK(result.primitives.empty());
}

TEST_CASE("a giant sphere removes the whole tooth inside its bbox") {
    Fixture fx;
    ToothContext tc = extract_tooth_context(fx.arch, 34);
    const int n = 24;
    SdfGrid tooth = mesh_to_sdf(tc.tooth, n, {-1, -1, -1}, 2.0 / (n - 1));
    VoxelBox occ = occupancy_bbox(tooth);
    REQUIRE(!occ.empty());

    Aabb box;
    box.expand(tooth.voxel_center(occ.lo[0], occ.lo[1], occ.lo[2]));
    box.expand(tooth.voxel_center(occ.hi[0], occ.hi[1], occ.hi[2]));
    double diagonal = length(box.extents());

    // oversized primitive centered on the tooth: nothing survives in the bbox
    Primitive giant = Primitive::sphere(1.5 * diagonal);
    giant.with_pose(Mat3::identity(), box.center());
    SdfGrid prim = sample_to_grid([&](const Vec3& p) { return eval_primitive(giant, p); }, n,
                                  {-1, -1, -1}, 2.0 / (n - 1));
    SdfGrid damaged = csg_difference(tooth, prim);
    for (int k = occ.lo[2]; k <= occ.hi[2]; ++k)
        for (int j = occ.lo[1]; j <= occ.hi[1]; ++j)
            for (int i = occ.lo[0]; i <= occ.hi[0]; ++i)
                CHECK(damaged.at(i, j, k) >= 0.0f);
}

TEST_CASE("synthesize_damage: determinism, monotonicity, support locality") {
    Fixture fx;
    ToothContext tc = extract_tooth_context(fx.arch, 36);
    AugmentConfig config = small_config();
    const int n = config.resolution;
    SdfGrid tooth = mesh_to_sdf(tc.tooth, n, {-1, -1, -1}, 2.0 / (n - 1));
    std::vector<Vec3> points = sample_surface_points(tc.tooth, 512, 2);

    DamageResult first = synthesize_damage(tooth, points, config, 7);
    DamageResult second = synthesize_damage(tooth, points, config, 7);
    CHECK(first.damaged.values() == second.damaged.values());
    REQUIRE(!first.primitives.empty());

    DamageResult other = synthesize_damage(tooth, points, config, 8);
    CHECK(first.damaged.values() != other.damaged.values());

    for (size_t i = 0; i < tooth.voxel_count(); ++i)
        CHECK(first.damaged.values()[i] >= tooth.values()[i]);
}

TEST_CASE("build_sample invariants") {
    Fixture fx;
    AugmentConfig config = small_config();

    SUBCASE("zero-damage hook: context equals ground truth") {
        config.max_primitives = 0;
        CompletionSample sample = build_sample(fx.arch, 36, nullptr, config, 5);
        CHECK(sample.context.values() == sample.ground_truth.values());
    }

    SUBCASE("damaged sample validates and is exact outside primitive supports") {
        CompletionSample sample = build_sample(fx.arch, 36, nullptr, config, 5);
        CHECK_NOTHROW(sample.validate());
        CHECK(!sample.meta.primitives.empty());

        // rebuild the union of trimmed, perturbed primitive grids
        const int n = config.resolution;
        const double spacing = 2.0 / (n - 1);
        SdfGrid tooth = [&] {
            ToothContext tc = extract_tooth_context(fx.arch, 36);
            return mesh_to_sdf(tc.tooth, n, {-1, -1, -1}, spacing);
        }();
        VoxelBox occ = occupancy_bbox(tooth);
        Aabb trim;
        trim.expand(tooth.voxel_center(occ.lo[0], occ.lo[1], occ.lo[2]));
        trim.expand(tooth.voxel_center(occ.hi[0], occ.hi[1], occ.hi[2]));
        trim.lo -= Vec3{spacing / 2, spacing / 2, spacing / 2};
        trim.hi += Vec3{spacing / 2, spacing / 2, spacing / 2};
        SdfGrid trim_grid = sample_to_grid([&](const Vec3& p) { return trim.signed_dist(p); }, n,
                                           {-1, -1, -1}, spacing);
        SdfGrid support(n, {-1, -1, -1}, spacing, kTruncation);
        for (size_t pi = 0; pi < sample.meta.primitives.size(); ++pi) {
            const Primitive& prim = sample.meta.primitives[pi];
            SdfGrid pg = sample_to_grid([&](const Vec3& p) { return eval_primitive(prim, p); }, n,
                                        {-1, -1, -1}, spacing);
            pg = csg_intersection(pg, trim_grid);
            SimplexNoiseParams noise = config.noise;
            noise.seed = sample.meta.primitive_noise_seeds[pi];
            pg = perturb_with_simplex(pg, noise);
            support = csg_union(support, pg);
        }
        int outside = 0, changed_outside = 0;
        for (size_t i = 0; i < support.voxel_count(); ++i) {
            if (support.values()[i] >= kTruncation) {
                ++outside;
                if (sample.context.values()[i] != sample.ground_truth.values()[i])
                    ++changed_outside;
            }
        }
        CHECK(outside > 0);
        CHECK(changed_outside == 0);
    }

    SUBCASE("bitwise determinism") {
        CompletionSample a = build_sample(fx.arch, 36, nullptr, config, 5);
        CompletionSample b = build_sample(fx.arch, 36, nullptr, config, 5);
        CHECK(a.context.values() == b.context.values());
        CHECK(a.ground_truth.values() == b.ground_truth.values());
    }

    SUBCASE("variants share ground truth but differ in context") {
        CompletionSample v0 = build_sample(fx.arch, 36, nullptr, config, mix_seed(5, 0));
        CompletionSample v1 = build_sample(fx.arch, 36, nullptr, config, mix_seed(5, 1));
        CompletionSample v2 = build_sample(fx.arch, 36, nullptr, config, mix_seed(5, 2));
        CHECK(v0.ground_truth.values() == v1.ground_truth.values());
        CHECK(v1.ground_truth.values() == v2.ground_truth.values());
        CHECK(v0.context.values() != v1.context.values());
        CHECK(v0.context.values() != v2.context.values());
        CHECK(v1.context.values() != v2.context.values());
    }

    SUBCASE("antagonist grid is produced under the same normalization") {
        CompletionSample sample = build_sample(fx.arch, 36, &fx.upper, config, 5);
        REQUIRE(sample.antagonist.has_value());
        CHECK(sample.antagonist->same_spec(sample.ground_truth));
        // opposing cusps reach into the context window, so some occupancy exists
        int neg = 0;
        for (float v : sample.antagonist->values())
            if (v < 0.0f) ++neg;
        CHECK(neg > 0);
    }
}

TEST_CASE("tooth bbox contains every ground-truth tooth voxel") {
    Fixture fx;
    AugmentConfig config = small_config();
    CompletionSample sample = build_sample(fx.arch, 44, nullptr, config, 21);
    ToothContext tc = extract_tooth_context(fx.arch, 44);
    SdfGrid tooth = mesh_to_sdf(tc.tooth, config.resolution, {-1, -1, -1},
                                2.0 / (config.resolution - 1));
    const int n = config.resolution;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (tooth.at(i, j, k) < 0.0f) CHECK(sample.tooth_bbox.contains(i, j, k));
}

TEST_CASE("build_dataset writes a consistent, reproducible manifest") {
    Fixture fx;
    AugmentConfig config = small_config(16);
    config.variants_per_tooth = 2;

    // two arches, keep it fast: restrict each arch to 3 teeth by relabeling
    auto shrink = [](LabeledArch arch, const std::set<int>& keep) {
        for (int& label : arch.labels)
            if (label != 0 && keep.find(label) == keep.end()) label = 0;
        return arch;
    };
    std::vector<ArchPair> arches;
    arches.push_back({shrink(fx.arch, {35, 36, 37}), std::nullopt});
    arches.push_back({shrink(generate_phantom_arch(31), {41, 42, 43}), std::nullopt});

    fs::path out = fs::temp_directory_path() / "crownfill_dataset_test";
    fs::remove_all(out);
    Manifest manifest = build_dataset(arches, config, 123, out.string());

    CHECK(manifest.entries.size() == 2 * 3 * 2);  // arches x teeth x variants
    for (const auto& entry : manifest.entries) {
        CHECK(fs::exists(out / entry.context_file));
        CHECK(fs::exists(out / entry.ground_truth_file));
        CHECK(fs::exists(out / entry.meta_file));
        CompletionSample sample = load_sample(entry, out.string());
        CHECK_NOTHROW(sample.validate());
    }
    Manifest loaded = load_manifest((out / "manifest.json").string());
    CHECK(loaded.entries.size() == manifest.entries.size());
    CHECK(loaded.master_seed == 123);

    // rerun into a second directory: bitwise identical grids
    fs::path out2 = fs::temp_directory_path() / "crownfill_dataset_test2";
    fs::remove_all(out2);
    Manifest manifest2 = build_dataset(arches, config, 123, out2.string());
    REQUIRE(manifest2.entries.size() == manifest.entries.size());
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        SdfGrid a = load_sdfg((out / manifest.entries[i].context_file).string());
        SdfGrid b = load_sdfg((out2 / manifest2.entries[i].context_file).string());
        CHECK(a.values() == b.values());
    }
    // manifests byte-identical
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    CHECK(slurp(out / "manifest.json") == slurp(out2 / "manifest.json"));
    fs::remove_all(out);
    fs::remove_all(out2);
}
