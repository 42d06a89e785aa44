#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crownfill/arch.hpp"
#include "crownfill/csg.hpp"
#include "crownfill/extract.hpp"
#include "crownfill/noise.hpp"
#include "crownfill/primitive.hpp"
#include "crownfill/sdf_grid.hpp"

namespace crownfill {

// Inclusive voxel index box.
struct VoxelBox {
    int lo[3] = {0, 0, 0};
    int hi[3] = {-1, -1, -1};

    bool empty() const { return hi[0] < lo[0] || hi[1] < lo[1] || hi[2] < lo[2]; }
    bool contains(int i, int j, int k) const {
        return i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1] && k >= lo[2] && k <= hi[2];
    }
    long long volume() const {
        if (empty()) return 0;
        return static_cast<long long>(hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
    }
};

// Bounding box of negative voxels; empty box when there are none.
VoxelBox occupancy_bbox(const SdfGrid& grid);

struct SampleMeta {
    std::string arch_id;
    int fdi = 0;
    uint64_t seed = 0;
    std::vector<Primitive> primitives;
    std::vector<uint64_t> primitive_noise_seeds;
};

// One training/eval unit: damaged context, clean target, optional antagonist.
struct CompletionSample {
    SdfGrid context;
    SdfGrid ground_truth;
    std::optional<SdfGrid> antagonist;
    VoxelBox tooth_bbox;
    SampleMeta meta;

    void validate() const;
};

struct AugmentConfig {
    int max_primitives = 3;        // 0 is a test hook producing no damage
    double size_min = 0.2;         // relative to the tooth bbox diagonal
    double size_max = 0.5;
    SimplexNoiseParams noise;      // amplitude/frequency; seeds are derived per primitive
    int variants_per_tooth = 1;
    int resolution = 32;

    void validate() const;
};

// Carves boolean damage out of a tooth grid: k random primitives, trimmed to
// the tooth bbox, simplex-perturbed, then subtracted. Deterministic in seed.
struct DamageResult {
    SdfGrid damaged;
    std::vector<Primitive> primitives;
    std::vector<uint64_t> noise_seeds;
};
DamageResult synthesize_damage(const SdfGrid& tooth_sdf, const std::vector<Vec3>& tooth_surface_points,
                               const AugmentConfig& config, uint64_t seed);

// Full per-tooth pipeline: extract, normalize, convert, damage, re-merge.
CompletionSample build_sample(const LabeledArch& arch, int fdi,
                              const LabeledArch* antagonist_arch, const AugmentConfig& config,
                              uint64_t seed);

struct ArchPair {
    LabeledArch arch;
    std::optional<LabeledArch> antagonist;
};

struct ManifestEntry {
    std::string id;
    std::string arch_id;
    int fdi = 0;
    int variant = 0;
    uint64_t seed = 0;
    std::string context_file;
    std::string ground_truth_file;
    std::string antagonist_file;  // empty when absent
    std::string meta_file;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    uint64_t master_seed = 0;
};

// Writes .sdfg triples + per-sample meta JSON + manifest.json under out_dir.
// Failed teeth are logged to stderr and skipped.
Manifest build_dataset(const std::vector<ArchPair>& arches, const AugmentConfig& config,
                       uint64_t master_seed, const std::string& out_dir);

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

// Loads the grids + meta referenced by a manifest entry (paths relative to base_dir).
CompletionSample load_sample(const ManifestEntry& entry, const std::string& base_dir);

}  // namespace crownfill
