#include "dufo/raycast.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dufo/voidregion.hpp"

namespace dufo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 6-connected grid walk along a segment. The parameter t is metric distance
// from the origin. Termination is index-based (per-axis step budgets toward
// the endpoint voxel), so floating-point drift in the boundary parameters
// cannot make the walk over- or undershoot. Ties at corner crossings resolve
// x before y before z.
class Walker {
 public:
  Walker(const Eigen::Vector3d& origin, const Eigen::Vector3d& endpoint, double v)
      : key_(voxel_key(origin, v)) {
    const VoxelKey end = voxel_key(endpoint, v);
    steps_left_[0] = std::llabs(end.ix - key_.ix);
    steps_left_[1] = std::llabs(end.iy - key_.iy);
    steps_left_[2] = std::llabs(end.iz - key_.iz);
    const Eigen::Vector3d d = endpoint - origin;
    const double len = d.norm();
    if (len > 0.0) {
      const Eigen::Vector3d u = d / len;
      const std::int64_t idx[3] = {key_.ix, key_.iy, key_.iz};
      for (int a = 0; a < 3; ++a) {
        if (u[a] > 0.0) {
          step_[a] = 1;
          t_next_[a] = (static_cast<double>(idx[a] + 1) * v - origin[a]) / u[a];
          t_delta_[a] = v / u[a];
        } else if (u[a] < 0.0) {
          step_[a] = -1;
          t_next_[a] = (static_cast<double>(idx[a]) * v - origin[a]) / u[a];
          t_delta_[a] = -v / u[a];
        }
      }
    }
  }

  const VoxelKey& key() const { return key_; }

  /// True once the endpoint voxel is reached.
  bool done() const {
    return steps_left_[0] == 0 && steps_left_[1] == 0 && steps_left_[2] == 0;
  }

  /// Metric parameter at which the current voxel is left on the way to the
  /// endpoint; +inf for the endpoint voxel itself.
  double exit_param() const {
    double t = kInf;
    for (int a = 0; a < 3; ++a)
      if (steps_left_[a] > 0 && t_next_[a] < t) t = t_next_[a];
    return t;
  }

  /// One step toward the endpoint voxel. Only valid while !done().
  void step() {
    int axis = -1;
    double best = kInf;
    for (int a = 0; a < 3; ++a)
      if (steps_left_[a] > 0 && t_next_[a] < best) {
        best = t_next_[a];
        axis = a;
      }
    advance(axis);
    --steps_left_[axis];
  }

  /// One step past the endpoint, continuing the same walk. Returns false for
  /// rays with no direction (degenerate).
  bool step_beyond() {
    int axis = -1;
    double best = kInf;
    for (int a = 0; a < 3; ++a)
      if (step_[a] != 0 && t_next_[a] < best) {
        best = t_next_[a];
        axis = a;
      }
    if (axis < 0) return false;
    advance(axis);
    return true;
  }

 private:
  void advance(int axis) {
    switch (axis) {
      case 0: key_.ix += step_[0]; break;
      case 1: key_.iy += step_[1]; break;
      default: key_.iz += step_[2]; break;
    }
    t_next_[axis] += t_delta_[axis];
  }

  VoxelKey key_;
  std::int64_t steps_left_[3] = {0, 0, 0};
  int step_[3] = {0, 0, 0};
  double t_next_[3] = {kInf, kInf, kInf};
  double t_delta_[3] = {kInf, kInf, kInf};
};

}  // namespace

std::vector<VoxelKey> traverse(const Ray& r, double voxel_size) {
  Walker w(r.origin, r.endpoint, voxel_size);  // validates inputs
  std::vector<VoxelKey> out;
  while (!w.done()) {
    out.push_back(w.key());
    w.step();
  }
  out.push_back(w.key());
  return out;
}

void integrate_ray(ScanScratch& s, const Ray& r, const Params& p) {
  p.validate();
  Walker w(r.origin, r.endpoint, p.voxel_size);
  if (w.done()) {
    // Origin and endpoint share a voxel: a hit with no usable direction.
    s.merge(w.key(), VoxelState::Hit);
    return;
  }
  const double range = (r.endpoint - r.origin).norm();
  const double hit_from = range - p.d_s;
  while (!w.done()) {
    s.merge(w.key(), w.exit_param() > hit_from ? VoxelState::Hit
                                               : VoxelState::Intersected);
    w.step();
  }
  s.merge(w.key(), VoxelState::Hit);  // endpoint voxel, unconditionally
  for (int i = p.effective_hit_extension(); i > 0; --i) {
    if (!w.step_beyond()) break;
    s.merge(w.key(), VoxelState::Hit);
  }
}

void integrate_scan(VoidMap& map, const PosedScan& scan) {
  try {
    scan.pose.validate();
  } catch (const InvalidInputError& e) {
    throw InvalidInputError("scan " + std::to_string(scan.scan_id) + ": " + e.what());
  }
  if (scan.points.empty()) return;

  const Params& p = map.params();
  ScanScratch scratch(p.voxel_size);
  const Eigen::Vector3d origin = scan.pose.translation;
  for (const Eigen::Vector3d& point : scan.points) {
    if (!point.allFinite()) continue;
    if (p.max_range && point.norm() > *p.max_range) continue;
    const Eigen::Vector3d endpoint = scan.pose.apply(point);
    if (!endpoint.allFinite()) continue;
    integrate_ray(scratch, Ray{origin, endpoint}, p);
  }
  for (const VoxelKey& k : classify_voids(scratch, p.d_p)) mark_void(map, k);
}

}  // namespace dufo
