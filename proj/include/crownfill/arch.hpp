#pragma once

#include <string>
#include <vector>

#include "crownfill/mesh.hpp"

namespace crownfill {

enum class Jaw { Upper, Lower };

const char* jaw_name(Jaw jaw);
Jaw jaw_from_name(const std::string& name);

bool is_valid_fdi(int code);  // 0 (gingiva) or FDI 11-18, 21-28, 31-38, 41-48

// Segmented dental arch: per-vertex FDI labels, 0 marking gingiva.
struct LabeledArch {
    TriangleMesh mesh;
    std::vector<int> labels;
    std::string arch_id;
    Jaw jaw = Jaw::Lower;

    void validate() const;
    // Distinct tooth labels present, ascending, gingiva excluded.
    std::vector<int> tooth_fdis() const;
};

// Reads an OBJ plus a sidecar JSON {"labels": [...], "jaw": "lower", "arch_id": ...}.
// Degenerate faces are dropped; their count lands in *dropped_faces when given.
LabeledArch load_arch(const std::string& mesh_path, const std::string& label_path,
                      int* dropped_faces = nullptr);

// Writes mesh_path (OBJ) and label_path (JSON sidecar).
void save_arch(const LabeledArch& arch, const std::string& mesh_path,
               const std::string& label_path);

// Deterministic procedural arch for dataset-free testing: 14 cusped
// superellipsoid teeth on a parabolic curve over a gingiva ridge.
LabeledArch generate_phantom_arch(uint64_t seed, Jaw jaw = Jaw::Lower);

}  // namespace crownfill
