#include "dufo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include "dufo/raycast.hpp"

namespace dufo {

namespace {

/// Hardware concurrency, capped by DUFO_THREADS when set to a positive
/// integer (malformed values are ignored).
unsigned worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("DUFO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      n = static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return n;
}

/// Label one scan against an immutable map. Points are fanned out across
/// workers; each worker writes a disjoint label range, so the result does not
/// depend on scheduling.
ScanLabels label_scan(const VoidMap& m, const PosedScan& scan, unsigned workers) {
  ScanLabels out;
  out.scan_id = scan.scan_id;
  std::vector<Eigen::Vector3d> world;
  world.reserve(scan.points.size());
  out.retained_indices.reserve(scan.points.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (!scan.points[i].allFinite()) continue;
    Eigen::Vector3d w = scan.pose.apply(scan.points[i]);
    if (!w.allFinite()) continue;
    out.retained_indices.push_back(i);
    world.push_back(std::move(w));
  }
  const std::size_t n = world.size();
  out.labels.assign(n, PointLabel::Static);
  const auto classify_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out.labels[i] = classify_point(m, world[i]);
  };
  if (workers <= 1 || n < 8192) {
    classify_range(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    if (begin >= n) break;
    pool.emplace_back(classify_range, begin, std::min(n, begin + chunk));
  }
  for (std::thread& t : pool) t.join();
  return out;
}

double timed_integrate(VoidMap& map, const PosedScan& scan) {
  const auto t0 = std::chrono::steady_clock::now();
  integrate_scan(map, scan);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PointLabel classify_point(const VoidMap& m, const Eigen::Vector3d& world_point) {
  return m.contains(voxel_key(world_point, m.voxel_size())) ? PointLabel::Dynamic
                                                            : PointLabel::Static;
}

PipelineResult run_offline(const std::vector<PosedScan>& scans, const Params& p) {
  p.validate();
  if (scans.empty()) throw InvalidInputError("run_offline: need at least one scan");
  PipelineResult res{VoidMap(p), {}, {}};
  res.integrate_seconds.reserve(scans.size());
  for (const PosedScan& scan : scans)
    res.integrate_seconds.push_back(timed_integrate(res.void_map, scan));
  const unsigned workers = worker_count();
  res.labels.reserve(scans.size());
  for (const PosedScan& scan : scans)
    res.labels.push_back(label_scan(res.void_map, scan, workers));
  return res;
}

PipelineResult run_online(const std::vector<PosedScan>& scans, const Params& p,
                          OnlineOrder order) {
  p.validate();
  if (scans.empty()) throw InvalidInputError("run_online: need at least one scan");
  PipelineResult res{VoidMap(p), {}, {}};
  res.integrate_seconds.reserve(scans.size());
  res.labels.reserve(scans.size());
  const unsigned workers = worker_count();
  for (const PosedScan& scan : scans) {
    if (order == OnlineOrder::ClassifyFirst) {
      res.labels.push_back(label_scan(res.void_map, scan, workers));
      res.integrate_seconds.push_back(timed_integrate(res.void_map, scan));
    } else {
      res.integrate_seconds.push_back(timed_integrate(res.void_map, scan));
      res.labels.push_back(label_scan(res.void_map, scan, workers));
    }
  }
  return res;
}

CleanedCloud export_cleaned(const std::vector<PosedScan>& scans,
                            const LabeledSequence& labels) {
  if (scans.size() != labels.size())
    throw InvalidInputError("export_cleaned: scan/label sequence lengths differ");
  CleanedCloud out;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const PosedScan& scan = scans[s];
    const ScanLabels& sl = labels[s];
    if (sl.scan_id != scan.scan_id)
      throw InvalidInputError("export_cleaned: scan_id mismatch at position " +
                              std::to_string(s));
    if (sl.labels.size() != sl.retained_indices.size())
      throw InvalidInputError("export_cleaned: misaligned labels for scan " +
                              std::to_string(sl.scan_id));
    for (std::size_t i = 0; i < sl.labels.size(); ++i) {
      const std::size_t raw = sl.retained_indices[i];
      if (raw >= scan.points.size())
        throw InvalidInputError("export_cleaned: retained index out of range in scan " +
                                std::to_string(sl.scan_id));
      const Eigen::Vector3d w = scan.pose.apply(scan.points[raw]);
      (sl.labels[i] == PointLabel::Dynamic ? out.dynamic_points : out.static_points)
          .push_back(w);
    }
  }
  return out;
}

}  // namespace dufo
