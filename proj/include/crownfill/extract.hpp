#pragma once

#include "crownfill/arch.hpp"
#include "crownfill/mesh.hpp"

namespace crownfill {

// Isotropic similarity x' = scale * (x - center).
struct SimilarityTransform {
    double scale = 1.0;
    Vec3 center{0, 0, 0};

    Vec3 forward(const Vec3& p) const { return (p - center) * scale; }
    Vec3 inverse(const Vec3& p) const { return p / scale + center; }
    void apply_forward(TriangleMesh& mesh) const {
        for (Vec3& v : mesh.vertices) v = forward(v);
    }
};

struct ToothContext {
    TriangleMesh tooth;    // target tooth, normalized coordinates
    TriangleMesh context;  // tooth + neighbors + gingiva inside the window
    TriangleMesh rest;     // context minus the tooth faces
    SimilarityTransform norm;  // arch coordinates -> normalized coordinates
};

// Crops the tooth plus surrounding geometry inside a window of 1.5x the
// tooth bbox (centered on it) and maps the crop isotropically into
// [-0.9, 0.9]^3. Throws ValidationError when the FDI is absent or the
// context comes out empty.
ToothContext extract_tooth_context(const LabeledArch& arch, int fdi);

}  // namespace crownfill
