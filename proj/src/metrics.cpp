#include "crownfill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crownfill/error.hpp"
#include "crownfill/marching_cubes.hpp"

namespace crownfill {

namespace {

void check_specs(const SdfGrid& a, const SdfGrid& b, const char* who) {
    if (!a.same_spec(b)) throw ValidationError(std::string(who) + ": grid spec mismatch");
}

VoxelBox full_box(const SdfGrid& grid) {
    VoxelBox box;
    box.lo[0] = box.lo[1] = box.lo[2] = 0;
    box.hi[0] = box.hi[1] = box.hi[2] = grid.resolution() - 1;
    return box;
}

}  // namespace

double l1_volume(const SdfGrid& pred, const SdfGrid& gt, const std::optional<VoxelBox>& mask) {
    check_specs(pred, gt, "l1_volume");
    VoxelBox box = mask ? *mask : full_box(pred);
    if (box.empty()) throw ValidationError("l1_volume: empty mask");
    const int n = pred.resolution();
    for (int a = 0; a < 3; ++a)
        if (box.lo[a] < 0 || box.hi[a] >= n)
            throw ValidationError("l1_volume: mask out of grid");
    double acc = 0.0;
    for (int k = box.lo[2]; k <= box.hi[2]; ++k)
        for (int j = box.lo[1]; j <= box.hi[1]; ++j)
            for (int i = box.lo[0]; i <= box.hi[0]; ++i)
                acc += std::fabs(static_cast<double>(pred.at(i, j, k)) -
                                 static_cast<double>(gt.at(i, j, k)));
    return acc / static_cast<double>(box.volume());
}

double iou_voxel(const SdfGrid& pred, const SdfGrid& gt, const std::optional<VoxelBox>& mask) {
    check_specs(pred, gt, "iou_voxel");
    VoxelBox box = mask ? *mask : full_box(pred);
    if (box.empty()) throw ValidationError("iou_voxel: empty mask");
    long long inter = 0, uni = 0;
    for (int k = box.lo[2]; k <= box.hi[2]; ++k)
        for (int j = box.lo[1]; j <= box.hi[1]; ++j)
            for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
                bool p = pred.at(i, j, k) < 0.0f;
                bool g = gt.at(i, j, k) < 0.0f;
                inter += (p && g) ? 1 : 0;
                uni += (p || g) ? 1 : 0;
            }
    if (uni == 0) return 100.0;  // both empty: perfect agreement
    return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

double antagonist_interference(const SdfGrid& tooth, const SdfGrid& antagonist) {
    check_specs(tooth, antagonist, "antagonist_interference");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < tooth.voxel_count(); ++i) {
        bool a = tooth.values()[i] < 0.0f;
        bool b = antagonist.values()[i] < 0.0f;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 0.0;  // no occupancy anywhere: no interference
    return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

PointKdTree::PointKdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    if (pts_.empty()) throw ValidationError("PointKdTree: no points");
    nodes_.reserve(2 * pts_.size() / 8 + 4);
    build(0, static_cast<int>(pts_.size()));
}

int PointKdTree::build(int begin, int end) {
    int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const int leaf = 8;
    if (end - begin <= leaf) {
        nodes_[idx].begin = begin;
        nodes_[idx].end = end;
        return idx;
    }
    Aabb box;
    for (int i = begin; i < end; ++i) box.expand(pts_[i]);
    Vec3 ext = box.extents();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(pts_.begin() + begin, pts_.begin() + mid, pts_.begin() + end,
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
    nodes_[idx].axis = axis;
    nodes_[idx].split = pts_[mid][axis];
    int l = build(begin, mid);
    int r = build(mid, end);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
}

void PointKdTree::query(int node, const Vec3& q, double& best) const {
    const Node& nd = nodes_[node];
    if (nd.left < 0) {
        for (int i = nd.begin; i < nd.end; ++i)
            best = std::min(best, length_sq(q - pts_[i]));
        return;
    }
    double delta = q[nd.axis] - nd.split;
    int near = delta < 0.0 ? nd.left : nd.right;
    int far = delta < 0.0 ? nd.right : nd.left;
    query(near, q, best);
    if (delta * delta < best) query(far, q, best);
}

double PointKdTree::nearest_dist_sq(const Vec3& query_point) const {
    double best = std::numeric_limits<double>::infinity();
    query(0, query_point, best);
    return best;
}

double chamfer(const TriangleMesh& mesh_a, const TriangleMesh& mesh_b, int n_samples,
               uint64_t seed) {
    if (mesh_a.empty() || mesh_b.empty())
        throw ValidationError("chamfer: empty mesh");
    if (n_samples < 1) throw ValidationError("chamfer: n_samples must be >= 1");

    // Each mesh is sampled with the same fresh seed, so the formula is
    // symmetric to the bit: chamfer(a, b) == chamfer(b, a).
    std::vector<Vec3> pa = sample_surface_points(mesh_a, n_samples, seed);
    std::vector<Vec3> pb = sample_surface_points(mesh_b, n_samples, seed);
    if (pa.empty() || pb.empty()) throw ValidationError("chamfer: degenerate mesh area");

    PointKdTree ta(pa), tb(pb);
    double ab = 0.0, ba = 0.0;
#pragma omp parallel sections
    {
#pragma omp section
        {
            double acc = 0.0;
            for (const Vec3& p : pa) acc += tb.nearest_dist_sq(p);
            ab = acc / static_cast<double>(pa.size());
        }
#pragma omp section
        {
            double acc = 0.0;
            for (const Vec3& p : pb) acc += ta.nearest_dist_sq(p);
            ba = acc / static_cast<double>(pb.size());
        }
    }
    return (ab + ba) / 2.0;
}

MetricReport evaluate_sample(const SdfGrid& pred, const CompletionSample& sample,
                             int n_chamfer_samples) {
    check_specs(pred, sample.ground_truth, "evaluate_sample");

    MetricReport report;
    report.l1 = l1_volume(pred, sample.ground_truth);
    report.masked_l1 = l1_volume(pred, sample.ground_truth, sample.tooth_bbox);
    report.iou_pct = iou_voxel(pred, sample.ground_truth);
    report.masked_iou_pct = iou_voxel(pred, sample.ground_truth, sample.tooth_bbox);

    TriangleMesh pred_mesh = marching_cubes(pred);
    TriangleMesh gt_mesh = marching_cubes(sample.ground_truth);
    report.chamfer = 1e4 * chamfer(pred_mesh, gt_mesh, n_chamfer_samples);

    Aabb mask_world;
    mask_world.expand(pred.voxel_center(sample.tooth_bbox.lo[0], sample.tooth_bbox.lo[1],
                                        sample.tooth_bbox.lo[2]));
    mask_world.expand(pred.voxel_center(sample.tooth_bbox.hi[0], sample.tooth_bbox.hi[1],
                                        sample.tooth_bbox.hi[2]));
    TriangleMesh pred_crop = clip_to_box(pred_mesh, mask_world);
    TriangleMesh gt_crop = clip_to_box(gt_mesh, mask_world);
    report.masked_chamfer = 1e4 * chamfer(pred_crop, gt_crop, n_chamfer_samples);

    if (sample.antagonist) {
        report.iou_antag_pred_pct = antagonist_interference(pred, *sample.antagonist);
        report.iou_antag_gt_pct = antagonist_interference(sample.ground_truth, *sample.antagonist);
    }
    return report;
}

std::string report_to_json(const MetricReport& report, const std::string& sample_id) {
    nlohmann::json j;
    j["id"] = sample_id;
    j["l1"] = report.l1;
    j["masked_l1"] = report.masked_l1;
    j["chamfer_x1e4"] = report.chamfer;
    j["masked_chamfer_x1e4"] = report.masked_chamfer;
    j["iou_pct"] = report.iou_pct;
    j["masked_iou_pct"] = report.masked_iou_pct;
    if (report.iou_antag_pred_pct) j["iou_antag_pred_pct"] = *report.iou_antag_pred_pct;
    if (report.iou_antag_gt_pct) j["iou_antag_gt_pct"] = *report.iou_antag_gt_pct;
    return j.dump();
}

void write_reports_jsonl(const std::vector<std::pair<std::string, MetricReport>>& reports,
                         const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("write_reports_jsonl: cannot open " + path);
    for (const auto& [id, report] : reports) os << report_to_json(report, id) << '\n';
    if (!os) throw IoError("write_reports_jsonl: write failed for " + path);
}

namespace {

AggregateRow make_row(const std::vector<double>& values) {
    AggregateRow row;
    row.count = static_cast<int>(values.size());
    if (values.empty()) return row;
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = sum / values.size();
    double var = 0.0;
    for (double v : values) var += (v - row.mean) * (v - row.mean);
    row.stddev = values.size() > 1 ? std::sqrt(var / values.size()) : 0.0;
    return row;
}

}  // namespace

AggregateTable aggregate_reports(const std::vector<std::pair<std::string, MetricReport>>& reports) {
    std::vector<double> l1, ml1, cd, mcd, iou, miou, ap, ag;
    for (const auto& [id, r] : reports) {
        l1.push_back(r.l1);
        ml1.push_back(r.masked_l1);
        cd.push_back(r.chamfer);
        mcd.push_back(r.masked_chamfer);
        iou.push_back(r.iou_pct);
        miou.push_back(r.masked_iou_pct);
        if (r.iou_antag_pred_pct) ap.push_back(*r.iou_antag_pred_pct);
        if (r.iou_antag_gt_pct) ag.push_back(*r.iou_antag_gt_pct);
    }
    AggregateTable table;
    table.l1 = make_row(l1);
    table.masked_l1 = make_row(ml1);
    table.chamfer = make_row(cd);
    table.masked_chamfer = make_row(mcd);
    table.iou = make_row(iou);
    table.masked_iou = make_row(miou);
    table.iou_antag_pred = make_row(ap);
    table.iou_antag_gt = make_row(ag);
    return table;
}

std::string aggregate_to_text(const AggregateTable& t) {
    std::ostringstream os;
    auto line = [&](const char* name, const AggregateRow& row, const char* unit) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-18s %10.4f +- %.4f %s (n=%d)\n", name, row.mean,
                      row.stddev, unit, row.count);
        os << buf;
    };
    line("L1", t.l1, "");
    line("mL1", t.masked_l1, "");
    line("CD (x1e4)", t.chamfer, "");
    line("mCD (x1e4)", t.masked_chamfer, "");
    line("IoU", t.iou, "%");
    line("mIoU", t.masked_iou, "%");
    if (t.iou_antag_pred.count > 0) line("IoU Antag_pred", t.iou_antag_pred, "%");
    if (t.iou_antag_gt.count > 0) line("IoU Antag_gt", t.iou_antag_gt, "%");
    return os.str();
}

std::string aggregate_to_json(const AggregateTable& t) {
    nlohmann::json j;
    auto put = [&](const char* name, const AggregateRow& row) {
        if (row.count > 0)
            j[name] = {{"mean", row.mean}, {"stddev", row.stddev}, {"count", row.count}};
    };
    put("l1", t.l1);
    put("masked_l1", t.masked_l1);
    put("chamfer_x1e4", t.chamfer);
    put("masked_chamfer_x1e4", t.masked_chamfer);
    put("iou_pct", t.iou);
    put("masked_iou_pct", t.masked_iou);
    put("iou_antag_pred_pct", t.iou_antag_pred);
    put("iou_antag_gt_pct", t.iou_antag_gt);
    return j.dump(1);
}

}  // namespace crownfill
