#include "crownfill/augment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "crownfill/error.hpp"
#include "crownfill/mesh_sdf.hpp"
#include "crownfill/rng.hpp"

namespace fs = std::filesystem;

namespace crownfill {

VoxelBox occupancy_bbox(const SdfGrid& grid) {
    VoxelBox box;
    box.lo[0] = box.lo[1] = box.lo[2] = grid.resolution();
    box.hi[0] = box.hi[1] = box.hi[2] = -1;
    const int n = grid.resolution();
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (grid.at(i, j, k) < 0.0f) {
                    box.lo[0] = std::min(box.lo[0], i);
                    box.lo[1] = std::min(box.lo[1], j);
                    box.lo[2] = std::min(box.lo[2], k);
                    box.hi[0] = std::max(box.hi[0], i);
                    box.hi[1] = std::max(box.hi[1], j);
                    box.hi[2] = std::max(box.hi[2], k);
                }
    if (box.hi[0] < 0) box = VoxelBox{};
    return box;
}

void CompletionSample::validate() const {
    if (!context.same_spec(ground_truth))
        throw ValidationError("CompletionSample: context/ground_truth spec mismatch");
    if (antagonist && !antagonist->same_spec(ground_truth))
        throw ValidationError("CompletionSample: antagonist spec mismatch");
    if (tooth_bbox.empty()) throw ValidationError("CompletionSample: empty tooth bbox");
    const int n = ground_truth.resolution();
    for (int a = 0; a < 3; ++a)
        if (tooth_bbox.lo[a] < 0 || tooth_bbox.hi[a] >= n)
            throw ValidationError("CompletionSample: tooth bbox out of grid");
    // material is only removed, never added
    for (size_t idx = 0; idx < context.voxel_count(); ++idx)
        if (context.values()[idx] < ground_truth.values()[idx] - 1e-6f)
            throw ValidationError("CompletionSample: context adds material over ground truth");
}

void AugmentConfig::validate() const {
    if (max_primitives < 0 || max_primitives > 3)
        throw ValidationError("AugmentConfig: max_primitives must be in [0, 3]");
    if (!(size_min > 0.0) || size_min > size_max)
        throw ValidationError("AugmentConfig: need 0 < size_min <= size_max");
    if (variants_per_tooth < 1)
        throw ValidationError("AugmentConfig: variants_per_tooth must be >= 1");
    if (resolution < 2) throw ValidationError("AugmentConfig: resolution must be >= 2");
    noise.validate();
}

namespace {

Aabb world_bbox(const SdfGrid& grid, const VoxelBox& box) {
    Aabb out;
    out.expand(grid.voxel_center(box.lo[0], box.lo[1], box.lo[2]));
    out.expand(grid.voxel_center(box.hi[0], box.hi[1], box.hi[2]));
    return out;
}

Primitive random_primitive(Rng& rng, double size, const Vec3& center) {
    auto kind = static_cast<PrimitiveKind>(rng.uniform_int(0, 4));
    Primitive prim;
    switch (kind) {
        case PrimitiveKind::Sphere: prim = Primitive::sphere(size / 2); break;
        case PrimitiveKind::Cube: prim = Primitive::cube({size / 2, size / 2, size / 2}); break;
        case PrimitiveKind::Cylinder: prim = Primitive::cylinder(size / 3, size / 2); break;
        case PrimitiveKind::Capsule: prim = Primitive::capsule(size / 3, size / 3); break;
        case PrimitiveKind::Cone: prim = Primitive::cone(size / 2, size / 2); break;
    }
    double qw, qx, qy, qz;
    rng.random_quat(qw, qx, qy, qz);
    prim.with_pose(Mat3::from_quat(qw, qx, qy, qz), center);
    prim.with_scale({rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25)});
    return prim;
}

}  // namespace

DamageResult synthesize_damage(const SdfGrid& tooth_sdf, const std::vector<Vec3>& surface_points,
                               const AugmentConfig& config, uint64_t seed) {
    config.validate();
    VoxelBox occ = occupancy_bbox(tooth_sdf);
    if (occ.empty())
        throw ValidationError("synthesize_damage: tooth grid has no interior voxel");

    DamageResult result{tooth_sdf, {}, {}};
    if (config.max_primitives == 0) return result;
    if (surface_points.empty())
        throw ValidationError("synthesize_damage: no surface points to center primitives on");

    Rng rng(seed);
    int count = static_cast<int>(rng.uniform_int(1, config.max_primitives));

    Aabb tooth_box = world_bbox(tooth_sdf, occ);
    double diagonal = length(tooth_box.extents());

    // Trim region: the tooth's axis-aligned bbox, padded by half a voxel.
    Aabb trim = tooth_box;
    Vec3 pad{tooth_sdf.spacing() / 2, tooth_sdf.spacing() / 2, tooth_sdf.spacing() / 2};
    trim.lo -= pad;
    trim.hi += pad;
    SdfGrid trim_grid = sample_to_grid([&](const Vec3& p) { return trim.signed_dist(p); },
                                       tooth_sdf.resolution(), tooth_sdf.origin(),
                                       tooth_sdf.spacing());

    std::optional<SdfGrid> merged;
    for (int c = 0; c < count; ++c) {
        double size = rng.uniform(config.size_min, config.size_max) * diagonal;
        const Vec3& center = surface_points[rng.uniform_int(0, static_cast<int64_t>(surface_points.size()) - 1)];
        Primitive prim = random_primitive(rng, size, center);

        SdfGrid prim_grid = sample_to_grid(
            [&](const Vec3& p) { return eval_primitive(prim, p); }, tooth_sdf.resolution(),
            tooth_sdf.origin(), tooth_sdf.spacing());
        prim_grid = csg_intersection(prim_grid, trim_grid);

        SimplexNoiseParams noise = config.noise;
        noise.seed = mix_seed(seed, 100 + static_cast<uint64_t>(c));
        prim_grid = perturb_with_simplex(prim_grid, noise);

        merged = merged ? csg_union(*merged, prim_grid) : prim_grid;
        result.primitives.push_back(prim);
        result.noise_seeds.push_back(noise.seed);
    }

    result.damaged = csg_difference(tooth_sdf, *merged);
    return result;
}

CompletionSample build_sample(const LabeledArch& arch, int fdi,
                              const LabeledArch* antagonist_arch, const AugmentConfig& config,
                              uint64_t seed) {
    config.validate();
    ToothContext tc = extract_tooth_context(arch, fdi);

    const int n = config.resolution;
    const Vec3 origin{-1.0, -1.0, -1.0};
    const double spacing = 2.0 / (n - 1);

    SdfGrid tooth_sdf = mesh_to_sdf(tc.tooth, n, origin, spacing);
    SdfGrid rest_sdf = tc.rest.empty() ? SdfGrid(n, origin, spacing, kTruncation)
                                       : mesh_to_sdf(tc.rest, n, origin, spacing);

    std::vector<Vec3> points = sample_surface_points(tc.tooth, 4096, mix_seed(seed, 1));
    DamageResult damage = synthesize_damage(tooth_sdf, points, config, mix_seed(seed, 2));

    CompletionSample sample;
    // Damage touches only the tooth grid; neighbors and gingiva re-merge
    // untouched, so outside the primitive supports context == ground truth.
    sample.ground_truth = csg_union(rest_sdf, tooth_sdf);
    sample.context = csg_union(rest_sdf, damage.damaged);
    sample.tooth_bbox = occupancy_bbox(tooth_sdf);
    sample.meta.arch_id = arch.arch_id;
    sample.meta.fdi = fdi;
    sample.meta.seed = seed;
    sample.meta.primitives = damage.primitives;
    sample.meta.primitive_noise_seeds = damage.noise_seeds;

    if (antagonist_arch) {
        TriangleMesh opposing = antagonist_arch->mesh;
        tc.norm.apply_forward(opposing);
        // keep faces near the normalized grid domain
        Aabb domain;
        domain.expand({-1.5, -1.5, -1.5});
        domain.expand({1.5, 1.5, 1.5});
        TriangleMesh crop;
        std::vector<int> keep;
        for (size_t f = 0; f < opposing.faces.size(); ++f) {
            const auto& tri = opposing.faces[f];
            for (int c = 0; c < 3; ++c)
                if (domain.contains(opposing.vertices[tri[c]])) {
                    keep.push_back(static_cast<int>(f));
                    break;
                }
        }
        if (keep.empty()) {
            sample.antagonist = SdfGrid(n, origin, spacing, kTruncation);
        } else {
            TriangleMesh cropped;
            cropped.vertices = opposing.vertices;
            for (int f : keep) cropped.faces.push_back(opposing.faces[f]);
            sample.antagonist = mesh_to_sdf(cropped, n, origin, spacing);
        }
    }

    sample.validate();
    return sample;
}

namespace {

nlohmann::json primitive_to_json(const Primitive& p) {
    nlohmann::json j;
    j["kind"] = primitive_kind_name(p.kind);
    j["size"] = {p.size.x, p.size.y, p.size.z};
    j["translation"] = {p.translation.x, p.translation.y, p.translation.z};
    j["scale"] = {p.scale.x, p.scale.y, p.scale.z};
    nlohmann::json rot = nlohmann::json::array();
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) rot.push_back(p.rotation.col[c][r]);
    j["rotation"] = rot;
    return j;
}

void write_sample_meta(const CompletionSample& sample, const std::string& path) {
    nlohmann::json j;
    j["arch_id"] = sample.meta.arch_id;
    j["fdi"] = sample.meta.fdi;
    j["seed"] = sample.meta.seed;
    j["tooth_bbox"] = {{"lo", {sample.tooth_bbox.lo[0], sample.tooth_bbox.lo[1], sample.tooth_bbox.lo[2]}},
                       {"hi", {sample.tooth_bbox.hi[0], sample.tooth_bbox.hi[1], sample.tooth_bbox.hi[2]}}};
    nlohmann::json prims = nlohmann::json::array();
    for (size_t i = 0; i < sample.meta.primitives.size(); ++i) {
        nlohmann::json pj = primitive_to_json(sample.meta.primitives[i]);
        pj["noise_seed"] = sample.meta.primitive_noise_seeds[i];
        prims.push_back(pj);
    }
    j["primitives"] = prims;
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path);
    os << j.dump(1) << '\n';
}

}  // namespace

Manifest build_dataset(const std::vector<ArchPair>& arches, const AugmentConfig& config,
                       uint64_t master_seed, const std::string& out_dir) {
    config.validate();
    if (arches.empty()) throw ValidationError("build_dataset: empty arch list");
    fs::create_directories(out_dir);

    Manifest manifest;
    manifest.master_seed = master_seed;
    for (size_t a = 0; a < arches.size(); ++a) {
        const LabeledArch& arch = arches[a].arch;
        const LabeledArch* antagonist =
            arches[a].antagonist ? &*arches[a].antagonist : nullptr;
        for (int fdi : arch.tooth_fdis()) {
            for (int v = 0; v < config.variants_per_tooth; ++v) {
                uint64_t seed = mix_seed(mix_seed(master_seed, a * 64 + static_cast<uint64_t>(fdi)),
                                         static_cast<uint64_t>(v));
                std::string id = "a" + std::to_string(a) + "_t" + std::to_string(fdi) + "_v" +
                                 std::to_string(v);
                try {
                    CompletionSample sample = build_sample(arch, fdi, antagonist, config, seed);
                    ManifestEntry entry;
                    entry.id = id;
                    entry.arch_id = arch.arch_id;
                    entry.fdi = fdi;
                    entry.variant = v;
                    entry.seed = seed;
                    entry.context_file = id + ".ctx.sdfg";
                    entry.ground_truth_file = id + ".gt.sdfg";
                    entry.meta_file = id + ".meta.json";
                    save_sdfg(sample.context, (fs::path(out_dir) / entry.context_file).string());
                    save_sdfg(sample.ground_truth,
                              (fs::path(out_dir) / entry.ground_truth_file).string());
                    if (sample.antagonist) {
                        entry.antagonist_file = id + ".ant.sdfg";
                        save_sdfg(*sample.antagonist,
                                  (fs::path(out_dir) / entry.antagonist_file).string());
                    }
                    write_sample_meta(sample, (fs::path(out_dir) / entry.meta_file).string());
                    manifest.entries.push_back(entry);
                } catch (const std::exception& e) {
                    std::cerr << "[augment] skipping " << id << ": " << e.what() << "\n";
                }
            }
        }
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["master_seed"] = manifest.master_seed;
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json s;
        s["id"] = e.id;
        s["arch_id"] = e.arch_id;
        s["fdi"] = e.fdi;
        s["variant"] = e.variant;
        s["seed"] = e.seed;
        s["context"] = e.context_file;
        s["ground_truth"] = e.ground_truth_file;
        if (!e.antagonist_file.empty()) s["antagonist"] = e.antagonist_file;
        s["meta"] = e.meta_file;
        samples.push_back(s);
    }
    j["samples"] = samples;
    std::ofstream os(path);
    if (!os) throw IoError("save_manifest: cannot open " + path);
    os << j.dump(1) << '\n';
}

Manifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_manifest: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ValidationError("load_manifest: unparseable " + path + ": " + e.what());
    }
    Manifest manifest;
    manifest.master_seed = j.value("master_seed", 0ULL);
    for (const auto& s : j.at("samples")) {
        ManifestEntry e;
        e.id = s.at("id");
        e.arch_id = s.value("arch_id", "");
        e.fdi = s.value("fdi", 0);
        e.variant = s.value("variant", 0);
        e.seed = s.value("seed", 0ULL);
        e.context_file = s.at("context");
        e.ground_truth_file = s.at("ground_truth");
        e.antagonist_file = s.value("antagonist", "");
        e.meta_file = s.value("meta", "");
        manifest.entries.push_back(e);
    }
    return manifest;
}

CompletionSample load_sample(const ManifestEntry& entry, const std::string& base_dir) {
    CompletionSample sample;
    sample.context = load_sdfg((fs::path(base_dir) / entry.context_file).string());
    sample.ground_truth = load_sdfg((fs::path(base_dir) / entry.ground_truth_file).string());
    if (!entry.antagonist_file.empty())
        sample.antagonist = load_sdfg((fs::path(base_dir) / entry.antagonist_file).string());
    sample.meta.arch_id = entry.arch_id;
    sample.meta.fdi = entry.fdi;
    sample.meta.seed = entry.seed;

    if (!entry.meta_file.empty()) {
        std::ifstream is((fs::path(base_dir) / entry.meta_file).string());
        if (!is) throw IoError("load_sample: cannot open meta " + entry.meta_file);
        nlohmann::json j;
        is >> j;
        const auto& bb = j.at("tooth_bbox");
        for (int a = 0; a < 3; ++a) {
            sample.tooth_bbox.lo[a] = bb.at("lo")[a];
            sample.tooth_bbox.hi[a] = bb.at("hi")[a];
        }
    } else {
        sample.tooth_bbox = occupancy_bbox(sample.ground_truth);
    }
    sample.validate();
    return sample;
}

}  // namespace crownfill
