#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crownfill/arch.hpp"
#include "crownfill/augment.hpp"
#include "crownfill/csg.hpp"
#include "crownfill/error.hpp"
#include "crownfill/extract.hpp"
#include "crownfill/marching_cubes.hpp"
#include "crownfill/mesh_sdf.hpp"
#include "crownfill/metrics.hpp"
#include "crownfill/trainer.hpp"

namespace py = pybind11;
using namespace crownfill;

namespace {

py::array_t<float> grid_values(const SdfGrid& grid) {
    const int n = grid.resolution();
    py::array_t<float> out({n, n, n});
    auto r = out.mutable_unchecked<3>();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) r(i, j, k) = grid.at(i, j, k);
    return out;
}

SdfGrid grid_from_array(py::array_t<float, py::array::forcecast> values,
                        std::tuple<double, double, double> origin, double spacing) {
    if (values.ndim() != 3 || values.shape(0) != values.shape(1) ||
        values.shape(1) != values.shape(2))
        throw ValidationError("values must be a cubic (n, n, n) array");
    const int n = static_cast<int>(values.shape(0));
    SdfGrid grid(n, {std::get<0>(origin), std::get<1>(origin), std::get<2>(origin)}, spacing);
    auto r = values.unchecked<3>();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                grid.at(i, j, k) = std::clamp(r(i, j, k), -kTruncation, kTruncation);
    return grid;
}

py::array_t<double> mesh_vertices(const TriangleMesh& mesh) {
    py::array_t<double> out({static_cast<py::ssize_t>(mesh.vertices.size()), py::ssize_t(3)});
    auto r = out.mutable_unchecked<2>();
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        r(i, 0) = mesh.vertices[i].x;
        r(i, 1) = mesh.vertices[i].y;
        r(i, 2) = mesh.vertices[i].z;
    }
    return out;
}

py::array_t<int> mesh_faces(const TriangleMesh& mesh) {
    py::array_t<int> out({static_cast<py::ssize_t>(mesh.faces.size()), py::ssize_t(3)});
    auto r = out.mutable_unchecked<2>();
    for (size_t i = 0; i < mesh.faces.size(); ++i)
        for (int c = 0; c < 3; ++c) r(i, c) = mesh.faces[i][c];
    return out;
}

TriangleMesh mesh_from_arrays(py::array_t<double, py::array::forcecast> vertices,
                              py::array_t<int, py::array::forcecast> faces) {
    if (vertices.ndim() != 2 || vertices.shape(1) != 3)
        throw ValidationError("vertices must be (n, 3)");
    if (faces.ndim() != 2 || faces.shape(1) != 3) throw ValidationError("faces must be (m, 3)");
    TriangleMesh mesh;
    auto v = vertices.unchecked<2>();
    auto f = faces.unchecked<2>();
    for (py::ssize_t i = 0; i < vertices.shape(0); ++i)
        mesh.vertices.push_back({v(i, 0), v(i, 1), v(i, 2)});
    for (py::ssize_t i = 0; i < faces.shape(0); ++i)
        mesh.faces.push_back({f(i, 0), f(i, 1), f(i, 2)});
    mesh.drop_degenerate_faces();
    return mesh;
}

std::vector<double> to_vector(py::array_t<double, py::array::forcecast> arr) {
    std::vector<double> out(arr.size());
    auto r = arr.unchecked();
    std::copy(arr.data(), arr.data() + arr.size(), out.begin());
    (void)r;
    return out;
}

py::dict report_to_dict(const MetricReport& r) {
    py::dict d;
    d["l1"] = r.l1;
    d["masked_l1"] = r.masked_l1;
    d["chamfer_x1e4"] = r.chamfer;
    d["masked_chamfer_x1e4"] = r.masked_chamfer;
    d["iou_pct"] = r.iou_pct;
    d["masked_iou_pct"] = r.masked_iou_pct;
    if (r.iou_antag_pred_pct) d["iou_antag_pred_pct"] = *r.iou_antag_pred_pct;
    if (r.iou_antag_gt_pct) d["iou_antag_gt_pct"] = *r.iou_antag_gt_pct;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SDF tooth-crown completion pipeline";
    m.attr("TRUNCATION") = kTruncation;

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<IoError>(m, "IoError");
    py::register_exception<ValidationError>(m, "ValidationErrorCpp");
    py::register_exception<NumericError>(m, "NumericError");

    py::class_<SdfGrid>(m, "SdfGrid")
        .def(py::init(&grid_from_array), py::arg("values"), py::arg("origin"), py::arg("spacing"))
        .def_property_readonly("resolution", &SdfGrid::resolution)
        .def_property_readonly("spacing", &SdfGrid::spacing)
        .def_property_readonly("origin",
                               [](const SdfGrid& g) {
                                   return py::make_tuple(g.origin().x, g.origin().y, g.origin().z);
                               })
        .def_property_readonly("values", &grid_values)
        .def("save", &save_sdfg, py::arg("path"))
        .def_static("load", &load_sdfg, py::arg("path"));

    py::class_<TriangleMesh>(m, "TriangleMesh")
        .def(py::init(&mesh_from_arrays), py::arg("vertices"), py::arg("faces"))
        .def_property_readonly("vertices", &mesh_vertices)
        .def_property_readonly("faces", &mesh_faces)
        .def("area", &TriangleMesh::area)
        .def("save_obj", [](const TriangleMesh& mesh, const std::string& p) { save_obj(mesh, p); })
        .def_static("load_obj", &load_obj, py::arg("path"));

    py::enum_<PrimitiveKind>(m, "PrimitiveKind")
        .value("sphere", PrimitiveKind::Sphere)
        .value("cube", PrimitiveKind::Cube)
        .value("cylinder", PrimitiveKind::Cylinder)
        .value("capsule", PrimitiveKind::Capsule)
        .value("cone", PrimitiveKind::Cone);

    py::class_<Primitive>(m, "Primitive")
        .def_static("sphere", &Primitive::sphere, py::arg("radius"))
        .def_static("cube",
                    [](double hx, double hy, double hz) { return Primitive::cube({hx, hy, hz}); })
        .def_static("cylinder", &Primitive::cylinder, py::arg("radius"), py::arg("half_height"))
        .def_static("capsule", &Primitive::capsule, py::arg("radius"), py::arg("half_height"))
        .def_static("cone", &Primitive::cone, py::arg("base_radius"), py::arg("half_height"))
        .def_readonly("kind", &Primitive::kind);

    m.def("eval_primitive",
          [](const Primitive& prim, double x, double y, double z) {
              return eval_primitive(prim, {x, y, z});
          });
    m.def(
        "sample_to_grid",
        [](const std::function<double(double, double, double)>& field, int resolution,
           std::tuple<double, double, double> origin, double spacing) {
            return sample_to_grid(
                [&](const Vec3& p) { return field(p.x, p.y, p.z); }, resolution,
                {std::get<0>(origin), std::get<1>(origin), std::get<2>(origin)}, spacing);
        },
        py::arg("field"), py::arg("resolution"), py::arg("origin"), py::arg("spacing"));

    m.def("csg_union", &csg_union);
    m.def("csg_intersection", &csg_intersection);
    m.def("csg_difference", &csg_difference);

    m.def("simplex_noise",
          [](double x, double y, double z, uint64_t seed) { return simplex_noise({x, y, z}, seed); },
          py::arg("x"), py::arg("y"), py::arg("z"), py::arg("seed"));

    py::class_<SimplexNoiseParams>(m, "SimplexNoiseParams")
        .def(py::init([](double amplitude, double frequency, uint64_t seed) {
                 SimplexNoiseParams p;
                 p.amplitude = amplitude;
                 p.frequency = frequency;
                 p.seed = seed;
                 p.validate();
                 return p;
             }),
             py::arg("amplitude") = 0.06, py::arg("frequency") = 2.8, py::arg("seed") = 0)
        .def_readwrite("amplitude", &SimplexNoiseParams::amplitude)
        .def_readwrite("frequency", &SimplexNoiseParams::frequency)
        .def_readwrite("seed", &SimplexNoiseParams::seed);

    m.def("perturb_with_simplex", &perturb_with_simplex, py::arg("grid"), py::arg("params"));

    m.def("mesh_to_sdf",
          [](const TriangleMesh& mesh, int resolution, std::tuple<double, double, double> origin,
             double spacing) {
              return mesh_to_sdf(mesh, resolution,
                                 {std::get<0>(origin), std::get<1>(origin), std::get<2>(origin)},
                                 spacing);
          },
          py::arg("mesh"), py::arg("resolution"), py::arg("origin"), py::arg("spacing"));
    m.def("marching_cubes", &marching_cubes, py::arg("grid"), py::arg("iso") = 0.0);

    py::enum_<Jaw>(m, "Jaw").value("upper", Jaw::Upper).value("lower", Jaw::Lower);

    py::class_<LabeledArch>(m, "LabeledArch")
        .def_readonly("mesh", &LabeledArch::mesh)
        .def_readonly("labels", &LabeledArch::labels)
        .def_readonly("arch_id", &LabeledArch::arch_id)
        .def_readonly("jaw", &LabeledArch::jaw)
        .def("tooth_fdis", &LabeledArch::tooth_fdis)
        .def("save", &save_arch, py::arg("mesh_path"), py::arg("label_path"));

    m.def("load_arch",
          [](const std::string& mesh_path, const std::string& label_path) {
              return load_arch(mesh_path, label_path);
          });
    m.def("generate_phantom_arch", &generate_phantom_arch, py::arg("seed"),
          py::arg("jaw") = Jaw::Lower);

    py::class_<SimilarityTransform>(m, "SimilarityTransform")
        .def_readonly("scale", &SimilarityTransform::scale)
        .def_property_readonly("center",
                               [](const SimilarityTransform& t) {
                                   return py::make_tuple(t.center.x, t.center.y, t.center.z);
                               });

    py::class_<ToothContext>(m, "ToothContext")
        .def_readonly("tooth", &ToothContext::tooth)
        .def_readonly("context", &ToothContext::context)
        .def_readonly("rest", &ToothContext::rest)
        .def_readonly("norm", &ToothContext::norm);

    m.def("extract_tooth_context", &extract_tooth_context, py::arg("arch"), py::arg("fdi"));

    py::class_<VoxelBox>(m, "VoxelBox")
        .def_property_readonly("lo",
                               [](const VoxelBox& b) {
                                   return py::make_tuple(b.lo[0], b.lo[1], b.lo[2]);
                               })
        .def_property_readonly("hi", [](const VoxelBox& b) {
            return py::make_tuple(b.hi[0], b.hi[1], b.hi[2]);
        });

    py::class_<AugmentConfig>(m, "AugmentConfig")
        .def(py::init<>())
        .def_readwrite("max_primitives", &AugmentConfig::max_primitives)
        .def_readwrite("size_min", &AugmentConfig::size_min)
        .def_readwrite("size_max", &AugmentConfig::size_max)
        .def_readwrite("noise", &AugmentConfig::noise)
        .def_readwrite("variants_per_tooth", &AugmentConfig::variants_per_tooth)
        .def_readwrite("resolution", &AugmentConfig::resolution);

    py::class_<CompletionSample>(m, "CompletionSample")
        .def_readonly("context", &CompletionSample::context)
        .def_readonly("ground_truth", &CompletionSample::ground_truth)
        .def_property_readonly("antagonist",
                               [](const CompletionSample& s) -> py::object {
                                   if (!s.antagonist) return py::none();
                                   return py::cast(*s.antagonist);
                               })
        .def_readonly("tooth_bbox", &CompletionSample::tooth_bbox);

    m.def("build_sample",
          [](const LabeledArch& arch, int fdi, const LabeledArch* antagonist,
             const AugmentConfig& config, uint64_t seed) {
              return build_sample(arch, fdi, antagonist, config, seed);
          },
          py::arg("arch"), py::arg("fdi"), py::arg("antagonist_arch") = nullptr,
          py::arg("config") = AugmentConfig{}, py::arg("seed") = 0);

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("T", &NoiseSchedule::T)
        .def_readonly("betas", &NoiseSchedule::betas)
        .def_readonly("alphas", &NoiseSchedule::alphas)
        .def_readonly("alpha_bars", &NoiseSchedule::alpha_bars);

    m.def("linear_schedule", &linear_schedule, py::arg("T"));

    py::class_<RespacedSchedule>(m, "RespacedSchedule")
        .def_readonly("chain", &RespacedSchedule::chain)
        .def_readonly("kept_indices", &RespacedSchedule::kept_indices);

    m.def("respace", &respace, py::arg("schedule"), py::arg("target_steps"));

    m.def("q_sample",
          [](py::array_t<double, py::array::forcecast> x0, int t,
             py::array_t<double, py::array::forcecast> eps, const NoiseSchedule& schedule) {
              return q_sample(to_vector(x0), t, to_vector(eps), schedule);
          });
    m.def("cfg_mix",
          [](py::array_t<double, py::array::forcecast> u,
             py::array_t<double, py::array::forcecast> c, double w) {
              return cfg_mix(to_vector(u), to_vector(c), w);
          });

    py::class_<SecondMomentResampler>(m, "SecondMomentResampler")
        .def(py::init<int, int>(), py::arg("T"), py::arg("history") = 10)
        .def("update", &SecondMomentResampler::update)
        .def("warmed_up", &SecondMomentResampler::warmed_up)
        .def("probabilities", &SecondMomentResampler::probabilities);

    py::class_<GuidanceConfig>(m, "GuidanceConfig")
        .def(py::init<>())
        .def_readwrite("w", &GuidanceConfig::w)
        .def_readwrite("dropout_p", &GuidanceConfig::dropout_p);

    py::class_<UNetConfig>(m, "UNetConfig")
        .def(py::init<>())
        .def_readwrite("resolution", &UNetConfig::resolution)
        .def_readwrite("base_channels", &UNetConfig::base_channels)
        .def_readwrite("channel_mults", &UNetConfig::channel_mults)
        .def_readwrite("time_embed_dim", &UNetConfig::time_embed_dim)
        .def_readwrite("proj_channels", &UNetConfig::proj_channels)
        .def_readwrite("norm_groups", &UNetConfig::norm_groups)
        .def_readwrite("antagonist_enabled", &UNetConfig::antagonist_enabled);

    py::class_<DenoiserNetwork>(m, "DenoiserNetwork")
        .def(py::init<const UNetConfig&, uint64_t>(), py::arg("config"), py::arg("seed"))
        .def_property_readonly("parameter_count",
                               [](const DenoiserNetwork& n) {
                                   return n.params().total_parameters();
                               })
        .def("eval_count", &DenoiserNetwork::eval_count);

    py::class_<AdamOptimizer>(m, "AdamOptimizer").def(py::init<double>(), py::arg("lr") = 1e-4);

    py::class_<Rng>(m, "Rng").def(py::init<uint64_t>(), py::arg("seed"));

    m.def("train_step",
          [](DenoiserNetwork& net, const CompletionSample& sample, const NoiseSchedule& schedule,
             const GuidanceConfig& guidance, SecondMomentResampler& resampler,
             AdamOptimizer& optimizer, Rng& rng) {
              return train_step(net, sample, schedule, guidance, resampler, optimizer, rng);
          },
          py::arg("network"), py::arg("sample"), py::arg("schedule"), py::arg("guidance"),
          py::arg("resampler"), py::arg("optimizer"), py::arg("rng"));

    m.def("complete",
          [](DenoiserNetwork& net, const NoiseSchedule& schedule, const SdfGrid& context,
             const SdfGrid* antagonist, int steps, double w, uint64_t seed) {
              return complete(net, schedule, context, antagonist, steps, w, seed);
          },
          py::arg("network"), py::arg("schedule"), py::arg("context"),
          py::arg("antagonist") = nullptr, py::arg("steps") = 100, py::arg("w") = 2.0,
          py::arg("seed") = 0);

    m.def("save_checkpoint",
          [](DenoiserNetwork& net, const NoiseSchedule& schedule, const GuidanceConfig& guidance,
             const std::string& path) { save_checkpoint(net, schedule, guidance, kDataScale, path); });
    m.def("load_network", [](const std::string& path) {
        Checkpoint ckpt = load_checkpoint(path);
        return py::make_tuple(py::cast(restore_network(ckpt)), py::cast(ckpt.schedule));
    });

    m.def("l1_volume",
          [](const SdfGrid& pred, const SdfGrid& gt) { return l1_volume(pred, gt); });
    m.def("l1_volume_masked", [](const SdfGrid& pred, const SdfGrid& gt, const VoxelBox& box) {
        return l1_volume(pred, gt, box);
    });
    m.def("iou_voxel", [](const SdfGrid& pred, const SdfGrid& gt) { return iou_voxel(pred, gt); });
    m.def("iou_voxel_masked", [](const SdfGrid& pred, const SdfGrid& gt, const VoxelBox& box) {
        return iou_voxel(pred, gt, box);
    });
    m.def("chamfer", &chamfer, py::arg("mesh_a"), py::arg("mesh_b"), py::arg("n_samples") = 10000,
          py::arg("seed") = 7);
    m.def("antagonist_interference", &antagonist_interference);
    m.def("evaluate_sample",
          [](const SdfGrid& pred, const CompletionSample& sample, int n_chamfer) {
              return report_to_dict(evaluate_sample(pred, sample, n_chamfer));
          },
          py::arg("pred"), py::arg("sample"), py::arg("n_chamfer_samples") = 10000);
}
