#include "crownfill/extract.hpp"

#include <unordered_map>

#include "crownfill/error.hpp"

namespace crownfill {

namespace {

// Rebuilds a compact mesh from a face subset.
TriangleMesh subset_mesh(const TriangleMesh& mesh, const std::vector<int>& face_ids) {
    TriangleMesh out;
    std::unordered_map<int, int> remap;
    for (int f : face_ids) {
        std::array<int, 3> tri{};
        for (int c = 0; c < 3; ++c) {
            int v = mesh.faces[f][c];
            auto it = remap.find(v);
            if (it == remap.end()) {
                int nv = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[v]);
                remap.emplace(v, nv);
                tri[c] = nv;
            } else {
                tri[c] = it->second;
            }
        }
        out.faces.push_back(tri);
    }
    return out;
}

}  // namespace

ToothContext extract_tooth_context(const LabeledArch& arch, int fdi) {
    arch.validate();
    if (fdi == 0 || !is_valid_fdi(fdi))
        throw ValidationError("extract_tooth_context: invalid FDI " + std::to_string(fdi));

    std::vector<int> tooth_faces;
    Aabb tooth_box;
    for (size_t f = 0; f < arch.mesh.faces.size(); ++f) {
        const auto& tri = arch.mesh.faces[f];
        if (arch.labels[tri[0]] == fdi && arch.labels[tri[1]] == fdi && arch.labels[tri[2]] == fdi) {
            tooth_faces.push_back(static_cast<int>(f));
            for (int c = 0; c < 3; ++c) tooth_box.expand(arch.mesh.vertices[tri[c]]);
        }
    }
    if (tooth_faces.empty())
        throw ValidationError("extract_tooth_context: FDI " + std::to_string(fdi) +
                              " not present in arch " + arch.arch_id);

    // Window: 1.5x the tooth bbox side lengths, same center.
    Aabb window;
    Vec3 c = tooth_box.center(), h = tooth_box.extents() * 0.5 * 1.5;
    window.expand(c - h);
    window.expand(c + h);

    std::vector<int> context_faces, rest_faces;
    std::vector<bool> is_tooth_face(arch.mesh.faces.size(), false);
    for (int f : tooth_faces) is_tooth_face[f] = true;
    for (size_t f = 0; f < arch.mesh.faces.size(); ++f) {
        const auto& tri = arch.mesh.faces[f];
        bool inside = false;
        for (int corner = 0; corner < 3 && !inside; ++corner)
            inside = window.contains(arch.mesh.vertices[tri[corner]]);
        if (inside || is_tooth_face[f]) {
            context_faces.push_back(static_cast<int>(f));
            if (!is_tooth_face[f]) rest_faces.push_back(static_cast<int>(f));
        }
    }
    if (context_faces.empty())
        throw ValidationError("extract_tooth_context: empty context for FDI " +
                              std::to_string(fdi));

    ToothContext result;
    result.tooth = subset_mesh(arch.mesh, tooth_faces);
    result.context = subset_mesh(arch.mesh, context_faces);
    result.rest = subset_mesh(arch.mesh, rest_faces);

    Aabb context_box = result.context.bounds();
    Vec3 half = context_box.extents() * 0.5;
    double max_half = std::max(half.x, std::max(half.y, half.z));
    result.norm.center = context_box.center();
    result.norm.scale = max_half > 0.0 ? 0.9 / max_half : 1.0;

    result.norm.apply_forward(result.tooth);
    result.norm.apply_forward(result.context);
    result.norm.apply_forward(result.rest);
    return result;
}

}  // namespace crownfill
