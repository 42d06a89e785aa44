#include <cmath>
#include <vector>

#include "crownfill/arch.hpp"
#include "crownfill/error.hpp"
#include "crownfill/rng.hpp"

namespace crownfill {

namespace {

double spow(double v, double e) {
    return v >= 0.0 ? std::pow(v, e) : -std::pow(-v, e);
}

struct ToothSpec {
    double a, b, c;      // half extents: mesiodistal, bucco-lingual, vertical
    double e1, e2;       // superellipsoid exponents (vertical, horizontal)
    int cusps;           // 1 canine, 2 incisor/premolar, 4 molar
    double cusp_height;
};

ToothSpec spec_for_tooth(int tooth_digit) {
    switch (tooth_digit) {
        case 1: return {1.9, 2.9, 5.0, 0.9, 0.7, 2, 0.5};
        case 2: return {2.0, 2.9, 5.0, 0.9, 0.7, 2, 0.5};
        case 3: return {2.2, 3.0, 5.2, 0.85, 0.9, 1, 1.2};
        case 4: return {2.5, 3.3, 4.8, 0.8, 0.8, 2, 1.0};
        case 5: return {2.5, 3.3, 4.8, 0.8, 0.8, 2, 1.0};
        case 6: return {2.9, 3.6, 4.6, 0.8, 0.75, 4, 1.1};
        default: return {2.8, 3.5, 4.6, 0.8, 0.75, 4, 1.0};
    }
}

// Closed superellipsoid with cusp bumps on the +z cap. Crown points +z.
TriangleMesh make_tooth(const ToothSpec& sp, Rng& rng) {
    const int nu = 14, nv = 18;
    TriangleMesh mesh;

    double ja = sp.a * rng.uniform(0.93, 1.07);
    double jb = sp.b * rng.uniform(0.93, 1.07);
    double jc = sp.c * rng.uniform(0.95, 1.05);

    std::vector<Vec3> cusp_centers;
    double ch = sp.cusp_height * rng.uniform(0.85, 1.15);
    if (sp.cusps == 1) {
        cusp_centers.push_back({0, 0, 0});
    } else if (sp.cusps == 2) {
        cusp_centers.push_back({0.42 * ja, 0, 0});
        cusp_centers.push_back({-0.42 * ja, 0, 0});
    } else {
        cusp_centers.push_back({0.42 * ja, 0.42 * jb, 0});
        cusp_centers.push_back({-0.42 * ja, 0.42 * jb, 0});
        cusp_centers.push_back({0.42 * ja, -0.42 * jb, 0});
        cusp_centers.push_back({-0.42 * ja, -0.42 * jb, 0});
    }
    double sigma = 0.38 * std::min(ja, jb);

    auto displace = [&](Vec3 v) {
        double zn = v.z / jc;
        if (zn > 0.45) {
            double w = (zn - 0.45) / 0.55;
            for (const Vec3& cc : cusp_centers) {
                double dx = v.x - cc.x, dy = v.y - cc.y;
                v.z += ch * w * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
        }
        return v;
    };

    const double pi = 3.14159265358979323846;
    int south = 0;
    mesh.vertices.push_back(displace({0, 0, -jc}));
    // interior rows
    std::vector<std::vector<int>> rows;
    for (int iu = 1; iu < nu; ++iu) {
        double eta = -pi / 2 + pi * iu / nu;
        double ce = std::cos(eta), se = std::sin(eta);
        std::vector<int> row;
        for (int iv = 0; iv < nv; ++iv) {
            double omega = 2 * pi * iv / nv;
            Vec3 v{ja * spow(ce, sp.e1) * spow(std::cos(omega), sp.e2),
                   jb * spow(ce, sp.e1) * spow(std::sin(omega), sp.e2),
                   jc * spow(se, sp.e1)};
            row.push_back(static_cast<int>(mesh.vertices.size()));
            mesh.vertices.push_back(displace(v));
        }
        rows.push_back(row);
    }
    int north = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(displace({0, 0, jc}));

    // south fan
    for (int iv = 0; iv < nv; ++iv)
        mesh.faces.push_back({south, rows[0][(iv + 1) % nv], rows[0][iv]});
    // bands
    for (size_t r = 0; r + 1 < rows.size(); ++r)
        for (int iv = 0; iv < nv; ++iv) {
            int a0 = rows[r][iv], a1 = rows[r][(iv + 1) % nv];
            int b0 = rows[r + 1][iv], b1 = rows[r + 1][(iv + 1) % nv];
            mesh.faces.push_back({a0, a1, b1});
            mesh.faces.push_back({a0, b1, b0});
        }
    // north fan
    const auto& top = rows.back();
    for (int iv = 0; iv < nv; ++iv)
        mesh.faces.push_back({north, top[iv], top[(iv + 1) % nv]});

    return mesh;
}

struct ArcCurve {
    // Dental-arch parabola sampled for arc-length walking.
    std::vector<double> ts, cum;
    double ax = 35.0, ay = 28.0;

    Vec3 pos(double t) const { return {ax * t, ay * (1.0 - t * t), 0.0}; }
    Vec3 tangent(double t) const { return normalized(Vec3{ax, -2.0 * ay * t, 0.0}); }

    ArcCurve() {
        const int n = 2000;
        ts.resize(n + 1);
        cum.resize(n + 1);
        cum[0] = 0;
        for (int i = 0; i <= n; ++i) ts[i] = -1.0 + 2.0 * i / n;
        for (int i = 1; i <= n; ++i)
            cum[i] = cum[i - 1] + length(pos(ts[i]) - pos(ts[i - 1]));
    }
    double total() const { return cum.back(); }
    double t_at_arclen(double s) const {
        size_t i = std::lower_bound(cum.begin(), cum.end(), s) - cum.begin();
        if (i == 0) return ts[0];
        if (i >= cum.size()) return ts.back();
        double f = (s - cum[i - 1]) / (cum[i] - cum[i - 1]);
        return ts[i - 1] + f * (ts[i] - ts[i - 1]);
    }
};

// Rounded-rectangle tube swept along the arch curve, capped at both ends.
TriangleMesh make_gingiva(const ArcCurve& curve, double z_top, double height, double half_width) {
    TriangleMesh mesh;
    const int sections = 56, ring_n = 12;
    const double pi = 3.14159265358979323846;
    double z_mid = z_top - height / 2;

    std::vector<std::vector<int>> rings;
    for (int s = 0; s < sections; ++s) {
        double t = -1.02 + 2.04 * s / (sections - 1);
        Vec3 c = curve.pos(t);
        c.z = z_mid;
        Vec3 tan = curve.tangent(t);
        Vec3 nrm{-tan.y, tan.x, 0.0};
        std::vector<int> ring;
        for (int r = 0; r < ring_n; ++r) {
            double phi = 2 * pi * r / ring_n;
            double u = half_width * spow(std::cos(phi), 0.7);
            double w = (height / 2) * spow(std::sin(phi), 0.7);
            ring.push_back(static_cast<int>(mesh.vertices.size()));
            mesh.vertices.push_back(c + nrm * u + Vec3{0, 0, w});
        }
        rings.push_back(ring);
    }
    for (int s = 0; s + 1 < sections; ++s)
        for (int r = 0; r < ring_n; ++r) {
            int a0 = rings[s][r], a1 = rings[s][(r + 1) % ring_n];
            int b0 = rings[s + 1][r], b1 = rings[s + 1][(r + 1) % ring_n];
            mesh.faces.push_back({a0, b1, a1});
            mesh.faces.push_back({a0, b0, b1});
        }
    // end caps
    for (int end = 0; end < 2; ++end) {
        const auto& ring = end == 0 ? rings.front() : rings.back();
        Vec3 c{0, 0, 0};
        for (int idx : ring) c += mesh.vertices[idx];
        c = c / ring_n;
        int ci = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(c);
        for (int r = 0; r < ring_n; ++r) {
            int a = ring[r], b = ring[(r + 1) % ring_n];
            if (end == 0) mesh.faces.push_back({ci, a, b});
            else mesh.faces.push_back({ci, b, a});
        }
    }
    return mesh;
}

void append_labeled(LabeledArch& arch, const TriangleMesh& part, int fdi) {
    int base = static_cast<int>(arch.mesh.vertices.size());
    arch.mesh.vertices.insert(arch.mesh.vertices.end(), part.vertices.begin(), part.vertices.end());
    arch.labels.insert(arch.labels.end(), part.vertices.size(), fdi);
    for (const auto& f : part.faces)
        arch.mesh.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

// Lower-jaw arch with crowns pointing up; occlusal tips near z = -0.5.
LabeledArch build_lower(uint64_t seed) {
    LabeledArch arch;
    arch.jaw = Jaw::Lower;
    Rng rng(seed);
    ArcCurve curve;

    // arch order: 37..31 then 41..47
    std::vector<int> fdis;
    for (int d = 7; d >= 1; --d) fdis.push_back(30 + d);
    for (int d = 1; d <= 7; ++d) fdis.push_back(40 + d);

    const double gap = 0.8;
    std::vector<ToothSpec> specs;
    double teeth_span = 0.0;
    for (int fdi : fdis) {
        specs.push_back(spec_for_tooth(fdi % 10));
        teeth_span += 2 * specs.back().a + gap;
    }
    double s0 = (curve.total() - teeth_span) / 2;

    double s_cursor = s0;
    for (size_t i = 0; i < fdis.size(); ++i) {
        const ToothSpec& sp = specs[i];
        double pitch = 2 * sp.a + gap;
        double s_center = s_cursor + pitch / 2;
        s_cursor += pitch;

        TriangleMesh tooth = make_tooth(sp, rng);
        double t = curve.t_at_arclen(s_center);
        Vec3 p = curve.pos(t);
        Vec3 tan = curve.tangent(t);
        double yaw = std::atan2(tan.y, tan.x) + rng.uniform(-0.06, 0.06);
        Mat3 rot = Mat3::from_axis_angle({0, 0, 1}, yaw);
        double tip = -0.5 + rng.uniform(-0.2, 0.2);
        double z_center = tip - (sp.c + sp.cusp_height * 1.2);
        tooth.apply(rot, {p.x, p.y, z_center}, 1.0);
        append_labeled(arch, tooth, fdis[i]);
    }

    append_labeled(arch, make_gingiva(curve, -9.0, 7.0, 4.8), 0);
    return arch;
}

}  // namespace

LabeledArch generate_phantom_arch(uint64_t seed, Jaw jaw) {
    if (jaw == Jaw::Lower) {
        LabeledArch arch = build_lower(mix_seed(seed, 0x10));
        arch.arch_id = "phantom-" + std::to_string(seed) + "-lower";
        arch.validate();
        return arch;
    }
    // Upper jaw: independently jittered lower arch mirrored about z=0,
    // winding flipped, FDI quadrants 3->2 and 4->1.
    LabeledArch arch = build_lower(mix_seed(seed, 0x20));
    for (Vec3& v : arch.mesh.vertices) v.z = -v.z;
    for (auto& f : arch.mesh.faces) std::swap(f[1], f[2]);
    for (int& code : arch.labels) {
        if (code == 0) continue;
        int quadrant = code / 10, digit = code % 10;
        code = (quadrant == 3 ? 20 : 10) + digit;
    }
    arch.jaw = Jaw::Upper;
    arch.arch_id = "phantom-" + std::to_string(seed) + "-upper";
    arch.validate();
    return arch;
}

}  // namespace crownfill
