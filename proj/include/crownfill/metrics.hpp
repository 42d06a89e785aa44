#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crownfill/augment.hpp"
#include "crownfill/mesh.hpp"
#include "crownfill/sdf_grid.hpp"

namespace crownfill {

// Six-metric record for one completion. Chamfer fields carry the x1e4
// reporting convention; IoU fields are percentages.
struct MetricReport {
    double l1 = 0.0;
    double masked_l1 = 0.0;
    double chamfer = 0.0;
    double masked_chamfer = 0.0;
    double iou_pct = 0.0;
    double masked_iou_pct = 0.0;
    std::optional<double> iou_antag_pred_pct;
    std::optional<double> iou_antag_gt_pct;
};

// Mean |pred - gt| over the grid (or the mask box only), 64-bit accumulation.
double l1_volume(const SdfGrid& pred, const SdfGrid& gt,
                 const std::optional<VoxelBox>& mask = std::nullopt);

// 100 * |pred_occ & gt_occ| / |pred_occ | gt_occ| with occupancy = value < 0;
// 100 when both occupancies are empty.
double iou_voxel(const SdfGrid& pred, const SdfGrid& gt,
                 const std::optional<VoxelBox>& mask = std::nullopt);

// Symmetric mean squared nearest-point distance between area-uniform surface
// samples (n per mesh); raw units, the x1e4 scaling happens at reporting.
double chamfer(const TriangleMesh& mesh_a, const TriangleMesh& mesh_b, int n_samples,
               uint64_t seed = 7);

// 100 * |tooth_occ & antag_occ| / |tooth_occ | antag_occ|; 0 on empty union.
double antagonist_interference(const SdfGrid& tooth, const SdfGrid& antagonist);

// Full suite against a sample: masked variants use sample.tooth_bbox, meshes
// come from marching cubes at iso 0, antagonist metrics only when present.
MetricReport evaluate_sample(const SdfGrid& pred, const CompletionSample& sample,
                             int n_chamfer_samples = 10000);

// JSON object for one report / JSONL writer / aggregate table.
std::string report_to_json(const MetricReport& report, const std::string& sample_id);
void write_reports_jsonl(const std::vector<std::pair<std::string, MetricReport>>& reports,
                         const std::string& path);

struct AggregateRow {
    double mean = 0.0, stddev = 0.0;
    int count = 0;
};
struct AggregateTable {
    AggregateRow l1, masked_l1, chamfer, masked_chamfer, iou, masked_iou, iou_antag_pred,
        iou_antag_gt;
};
AggregateTable aggregate_reports(const std::vector<std::pair<std::string, MetricReport>>& reports);
std::string aggregate_to_text(const AggregateTable& table);
std::string aggregate_to_json(const AggregateTable& table);

// Nearest-neighbor index over points (kd-tree, median split).
class PointKdTree {
public:
    explicit PointKdTree(std::vector<Vec3> points);
    double nearest_dist_sq(const Vec3& query) const;

private:
    struct Node {
        int left = -1, right = -1;
        int begin = 0, end = 0;
        int axis = 0;
        double split = 0.0;
    };
    int build(int begin, int end);
    void query(int node, const Vec3& q, double& best) const;

    std::vector<Vec3> pts_;
    std::vector<Node> nodes_;
};

}  // namespace crownfill
