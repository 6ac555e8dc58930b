#include "dufo/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace dufo {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename T, typename Mix>
T interpolate(const std::vector<std::pair<double, T>>& wps, double s, Mix mix) {
  if (s <= wps.front().first) return wps.front().second;
  if (s >= wps.back().first) return wps.back().second;
  for (std::size_t i = 1; i < wps.size(); ++i) {
    if (s > wps[i].first) continue;
    const double t = (s - wps[i - 1].first) / (wps[i].first - wps[i - 1].first);
    return mix(wps[i - 1].second, wps[i].second, t);
  }
  return wps.back().second;
}

/// Parameter of the first surface of b along o + t*u, t > ~0; for an origin
/// inside the box that is the exit surface. nullopt when the ray misses.
std::optional<double> ray_box_entry(const Eigen::Vector3d& o, const Eigen::Vector3d& u,
                                    const Box& b) {
  double t0 = 0.0, t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (u[a] == 0.0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
    } else {
      double ta = (b.min[a] - o[a]) / u[a];
      double tb = (b.max[a] - o[a]) / u[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return std::nullopt;
    }
  }
  constexpr double eps = 1e-9;
  if (t1 < eps) return std::nullopt;
  return t0 > eps ? std::optional<double>(t0) : std::optional<double>(t1);
}

}  // namespace

Box MovingBox::at(double scan_index) const {
  const Eigen::Vector3d c = interpolate(
      waypoints, scan_index,
      [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, double t) {
        return Eigen::Vector3d((1.0 - t) * a + t * b);
      });
  return Box{c - 0.5 * size, c + 0.5 * size};
}

Pose SensorPath::at(double scan_index) const {
  return interpolate(waypoints, scan_index, [](const Pose& a, const Pose& b, double t) {
    Pose p;
    p.translation = (1.0 - t) * a.translation + t * b.translation;
    p.rotation = a.rotation.slerp(t, b.rotation);
    return p;
  });
}

void SceneSpec::validate() const {
  const auto fail = [](const std::string& msg) { throw InvalidInputError("scene spec: " + msg); };
  if (scan_count < 1) fail("scans must be >= 1");
  if (azimuth_count < 1) fail("azimuth_count must be >= 1");
  if (elevation_count < 1) fail("elevation_count must be >= 1");
  if (!(azimuth_max_deg >= azimuth_min_deg)) fail("azimuth_max_deg must be >= azimuth_min_deg");
  if (!(elevation_max_deg >= elevation_min_deg))
    fail("elevation_max_deg must be >= elevation_min_deg");
  if (elevation_min_deg < -90.0 || elevation_max_deg > 90.0)
    fail("elevation range must lie within [-90, 90]");
  if (!(pose_noise_sigma >= 0.0) || !std::isfinite(pose_noise_sigma))
    fail("pose_noise_sigma must be >= 0");
  if (!(range_noise_sigma >= 0.0) || !std::isfinite(range_noise_sigma))
    fail("range_noise_sigma must be >= 0");
  if (max_range && !(*max_range > 0.0)) fail("max_range must be > 0");
  for (std::size_t i = 0; i < static_boxes.size(); ++i)
    if (static_boxes[i].degenerate())
      fail("static_box " + std::to_string(i + 1) + ": min must be strictly below max per axis");
  for (std::size_t i = 0; i < dynamic_boxes.size(); ++i) {
    const MovingBox& d = dynamic_boxes[i];
    const std::string name = "dynamic_box " + std::to_string(i + 1);
    if (!(d.size.minCoeff() > 0.0)) fail(name + ": size must be positive per axis");
    if (d.waypoints.empty()) fail(name + ": needs at least one 'at' waypoint");
    for (std::size_t w = 1; w < d.waypoints.size(); ++w)
      if (!(d.waypoints[w].first > d.waypoints[w - 1].first))
        fail(name + ": waypoint scan indices must be strictly increasing");
  }
  if (sensor.waypoints.empty()) fail("sensor: needs at least one waypoint");
  for (std::size_t w = 1; w < sensor.waypoints.size(); ++w)
    if (!(sensor.waypoints[w].first > sensor.waypoints[w - 1].first))
      fail("sensor: waypoint scan indices must be strictly increasing");
  if (static_boxes.empty() && dynamic_boxes.empty() && !max_range)
    fail("no boxes and no max_range; rays would never terminate");
}

std::vector<PosedScan> generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double az_step =
      (spec.azimuth_max_deg - spec.azimuth_min_deg) / spec.azimuth_count;
  const double el_step =
      (spec.elevation_max_deg - spec.elevation_min_deg) / spec.elevation_count;

  std::vector<PosedScan> out;
  out.reserve(spec.scan_count);
  for (std::size_t k = 0; k < spec.scan_count; ++k) {
    const double s = static_cast<double>(k);
    const Pose reported = spec.sensor.at(s);
    Pose true_pose = reported;
    if (spec.pose_noise_sigma > 0.0)
      for (int a = 0; a < 3; ++a)
        true_pose.translation[a] += spec.pose_noise_sigma * gauss(rng);

    std::vector<std::pair<Box, bool>> boxes;
    boxes.reserve(spec.static_boxes.size() + spec.dynamic_boxes.size());
    for (const Box& b : spec.static_boxes) boxes.emplace_back(b, false);
    for (const MovingBox& d : spec.dynamic_boxes) boxes.emplace_back(d.at(s), true);

    PosedScan scan;
    scan.scan_id = k;
    scan.pose = reported;
    scan.points.reserve(spec.rays_per_scan());
    scan.gt_labels.reserve(spec.rays_per_scan());
    for (int j = 0; j < spec.elevation_count; ++j) {
      const double el = (spec.elevation_min_deg + (j + 0.5) * el_step) * kPi / 180.0;
      for (int i = 0; i < spec.azimuth_count; ++i) {
        const double az = (spec.azimuth_min_deg + (i + 0.5) * az_step) * kPi / 180.0;
        const Eigen::Vector3d dir_sensor(std::cos(el) * std::cos(az),
                                         std::cos(el) * std::sin(az), std::sin(el));
        const Eigen::Vector3d dir_world = true_pose.rotation * dir_sensor;

        double best = kInf;
        bool dynamic = false;
        for (const auto& [box, flag] : boxes) {
          const std::optional<double> t = ray_box_entry(true_pose.translation, dir_world, box);
          if (t && *t < best) {
            best = *t;
            dynamic = flag;
          }
        }
        if (best == kInf) continue;                          // no return
        if (spec.max_range && best > *spec.max_range) continue;
        double range = best;
        if (spec.range_noise_sigma > 0.0)
          range = std::max(1e-6, range + spec.range_noise_sigma * gauss(rng));
        const Eigen::Vector3d p_world = true_pose.translation + range * dir_world;
        scan.points.push_back(reported.apply_inverse(p_world));
        scan.gt_labels.push_back(dynamic ? 1 : 0);
      }
    }
    out.push_back(std::move(scan));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene spec text format

namespace {

struct SpecParser {
  std::string path;
  SceneSpec spec;
  std::set<std::string> seen_top;
  bool have_sensor = false;

  enum class Section { Top, StaticBox, DynamicBox, Sensor } section = Section::Top;
  std::size_t section_line = 0;
  // staged values for the section being parsed
  std::optional<Eigen::Vector3d> box_min, box_max, dyn_size;
  std::vector<std::pair<double, Eigen::Vector3d>> dyn_waypoints;
  std::vector<std::pair<double, Pose>> sensor_waypoints;

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw ParseError(path, line, msg);
  }

  Eigen::Vector3d vec3(const std::string& value, std::size_t line) {
    std::istringstream iss(value);
    double x, y, z;
    std::string rest;
    if (!(iss >> x >> y >> z) || (iss >> rest))
      fail(line, "expected three numbers, got '" + value + "'");
    return {x, y, z};
  }

  std::vector<double> numbers(const std::string& value, std::size_t n, std::size_t line) {
    std::istringstream iss(value);
    std::vector<double> v(n);
    std::string rest;
    for (double& x : v)
      if (!(iss >> x)) fail(line, "expected " + std::to_string(n) + " numbers");
    if (iss >> rest) fail(line, "expected " + std::to_string(n) + " numbers");
    return v;
  }

  void close_section(std::size_t line) {
    switch (section) {
      case Section::Top:
        break;
      case Section::StaticBox:
        if (!box_min || !box_max) fail(section_line, "[static_box] needs min and max");
        spec.static_boxes.push_back(Box{*box_min, *box_max});
        break;
      case Section::DynamicBox: {
        if (!dyn_size) fail(section_line, "[dynamic_box] needs size");
        if (dyn_waypoints.empty()) fail(section_line, "[dynamic_box] needs at least one at");
        MovingBox d;
        d.size = *dyn_size;
        d.waypoints = std::move(dyn_waypoints);
        std::stable_sort(d.waypoints.begin(), d.waypoints.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        spec.dynamic_boxes.push_back(std::move(d));
        break;
      }
      case Section::Sensor:
        if (sensor_waypoints.empty()) fail(section_line, "[sensor] needs at least one at or pose");
        spec.sensor.waypoints = std::move(sensor_waypoints);
        std::stable_sort(spec.sensor.waypoints.begin(), spec.sensor.waypoints.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        break;
    }
    box_min.reset();
    box_max.reset();
    dyn_size.reset();
    dyn_waypoints.clear();
    sensor_waypoints.clear();
    (void)line;
  }

  void open_section(const std::string& name, std::size_t line) {
    close_section(line);
    section_line = line;
    if (name == "[static_box]") {
      section = Section::StaticBox;
    } else if (name == "[dynamic_box]") {
      section = Section::DynamicBox;
    } else if (name == "[sensor]") {
      if (have_sensor) fail(line, "duplicate [sensor] section");
      have_sensor = true;
      section = Section::Sensor;
    } else {
      fail(line, "unknown section '" + name + "'");
    }
  }

  void top_key(const std::string& key, const std::string& value, std::size_t line) {
    if (!seen_top.insert(key).second) fail(line, "duplicate key '" + key + "'");
    const auto as_double = [&] {
      std::istringstream iss(value);
      double v;
      std::string rest;
      if (!(iss >> v) || (iss >> rest)) fail(line, "expected a number for '" + key + "'");
      return v;
    };
    if (key == "scans") {
      const double v = as_double();
      if (v < 1 || v != std::floor(v)) fail(line, "scans must be a positive integer");
      spec.scan_count = static_cast<std::size_t>(v);
    } else if (key == "azimuth_count") {
      spec.azimuth_count = static_cast<int>(as_double());
    } else if (key == "elevation_count") {
      spec.elevation_count = static_cast<int>(as_double());
    } else if (key == "azimuth_min_deg") {
      spec.azimuth_min_deg = as_double();
    } else if (key == "azimuth_max_deg") {
      spec.azimuth_max_deg = as_double();
    } else if (key == "elevation_min_deg") {
      spec.elevation_min_deg = as_double();
    } else if (key == "elevation_max_deg") {
      spec.elevation_max_deg = as_double();
    } else if (key == "pose_noise_sigma") {
      spec.pose_noise_sigma = as_double();
    } else if (key == "range_noise_sigma") {
      spec.range_noise_sigma = as_double();
    } else if (key == "seed") {
      const double v = as_double();
      if (v < 0 || v != std::floor(v)) fail(line, "seed must be a non-negative integer");
      spec.seed = static_cast<std::uint64_t>(v);
    } else if (key == "max_range") {
      spec.max_range = as_double();
    } else {
      fail(line, "unknown key '" + key + "'");
    }
  }

  void section_key(const std::string& key, const std::string& value, std::size_t line) {
    switch (section) {
      case Section::StaticBox:
        if (key == "min") box_min = vec3(value, line);
        else if (key == "max") box_max = vec3(value, line);
        else fail(line, "unknown key '" + key + "' in [static_box]");
        break;
      case Section::DynamicBox:
        if (key == "size") {
          dyn_size = vec3(value, line);
        } else if (key == "at") {
          const std::vector<double> v = numbers(value, 4, line);
          dyn_waypoints.emplace_back(v[0], Eigen::Vector3d(v[1], v[2], v[3]));
        } else {
          fail(line, "unknown key '" + key + "' in [dynamic_box]");
        }
        break;
      case Section::Sensor:
        if (key == "at") {
          const std::vector<double> v = numbers(value, 4, line);
          Pose p;
          p.translation = Eigen::Vector3d(v[1], v[2], v[3]);
          sensor_waypoints.emplace_back(v[0], p);
        } else if (key == "pose") {
          const std::vector<double> v = numbers(value, 8, line);
          Pose p;
          p.translation = Eigen::Vector3d(v[1], v[2], v[3]);
          Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);  // file order is w-last
          const double n = q.norm();
          if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-3)
            fail(line, "quaternion norm not unit within 1e-3");
          q.normalize();
          p.rotation = q;
          sensor_waypoints.emplace_back(v[0], p);
        } else {
          fail(line, "unknown key '" + key + "' in [sensor]");
        }
        break;
      case Section::Top:
        break;  // unreachable
    }
  }
};

}  // namespace

SceneSpec read_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  SpecParser p;
  p.path = path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r");
    const std::string text = line.substr(b, e - b + 1);

    if (text.front() == '[') {
      p.open_section(text, line_no);
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) p.fail(line_no, "expected key = value or a [section]");
    std::string key = text.substr(0, eq);
    std::string value = text.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    if (p.section == SpecParser::Section::Top)
      p.top_key(key, value, line_no);
    else
      p.section_key(key, value, line_no);
  }
  p.close_section(line_no);
  p.spec.validate();
  return p.spec;
}

// ---------------------------------------------------------------------------
// Dense oracle

namespace {

using DenseKey = std::array<std::int64_t, 3>;

DenseKey dense_floor(const Eigen::Vector3d& p, double v) {
  return {static_cast<std::int64_t>(std::floor(p.x() / v)),
          static_cast<std::int64_t>(std::floor(p.y() / v)),
          static_cast<std::int64_t>(std::floor(p.z() / v))};
}

struct DensePiece {
  DenseKey key;
  double exit;
};

/// Boundary-crossing parameters of the segment in (t_lo, t_hi), plus both ends.
std::vector<double> breakpoints(const Eigen::Vector3d& o, const Eigen::Vector3d& u,
                                double t_lo, double t_hi, double v) {
  std::vector<double> ts{t_lo, t_hi};
  for (int a = 0; a < 3; ++a) {
    if (u[a] == 0.0) continue;
    const double c0 = o[a] + t_lo * u[a];
    const double c1 = o[a] + t_hi * u[a];
    const double lo = std::min(c0, c1), hi = std::max(c0, c1);
    const std::int64_t i0 = static_cast<std::int64_t>(std::ceil(lo / v));
    const std::int64_t i1 = static_cast<std::int64_t>(std::floor(hi / v));
    for (std::int64_t i = i0; i <= i1; ++i) {
      const double t = (v * static_cast<double>(i) - o[a]) / u[a];
      if (t > t_lo && t < t_hi) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

/// All voxels the segment [o, e] visits with their exit parameters (the last
/// one, the endpoint's voxel, gets +inf). Evaluates floor() at the midpoint
/// of every constant piece between boundary crossings.
std::vector<DensePiece> segment_pieces(const Eigen::Vector3d& o, const Eigen::Vector3d& e,
                                       double v) {
  const DenseKey ko = dense_floor(o, v);
  const DenseKey ke = dense_floor(e, v);
  if (ko == ke) return {{ko, kInf}};
  const double T = (e - o).norm();
  const Eigen::Vector3d u = (e - o) / T;

  std::vector<DensePiece> pieces;
  const std::vector<double> ts = breakpoints(o, u, 0.0, T, v);
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    if (!(ts[i + 1] > ts[i])) continue;
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const DenseKey k = dense_floor(o + tm * u, v);
    if (!pieces.empty() && pieces.back().key == k)
      pieces.back().exit = ts[i + 1];
    else
      pieces.push_back({k, ts[i + 1]});
  }
  if (pieces.empty() || pieces.front().key != ko)
    pieces.insert(pieces.begin(), {ko, 0.0});
  if (pieces.back().key != ke) pieces.push_back({ke, T});
  pieces.back().exit = kInf;
  return pieces;
}

/// Up to `count` distinct voxels past the endpoint, continuing the segment.
std::vector<DenseKey> extension_keys(const Eigen::Vector3d& o, const Eigen::Vector3d& e,
                                     double v, int count) {
  const DenseKey ko = dense_floor(o, v);
  const DenseKey ke = dense_floor(e, v);
  if (count <= 0 || ko == ke) return {};
  const double T = (e - o).norm();
  const Eigen::Vector3d u = (e - o) / T;
  const double t_far = T + count * v * std::sqrt(3.0) * 1.001 + v;

  std::vector<DenseKey> out;
  const std::vector<double> ts = breakpoints(o, u, T, t_far, v);
  for (std::size_t i = 0; i + 1 < ts.size() && static_cast<int>(out.size()) < count; ++i) {
    if (!(ts[i + 1] > ts[i])) continue;
    const DenseKey k = dense_floor(o + 0.5 * (ts[i] + ts[i + 1]) * u, v);
    if (k == ke) continue;
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  return out;
}

class DenseGrid {
 public:
  DenseGrid(const IndexBounds& bounds)
      : lo_(bounds.lo),
        nx_(bounds.hi.ix - bounds.lo.ix + 1),
        ny_(bounds.hi.iy - bounds.lo.iy + 1),
        nz_(bounds.hi.iz - bounds.lo.iz + 1),
        cells_(static_cast<std::size_t>(nx_ * ny_ * nz_), 0) {}

  void reset() { std::fill(cells_.begin(), cells_.end(), 0); }

  void mark(const DenseKey& k, std::uint8_t state) {
    const std::int64_t x = k[0] - lo_.ix, y = k[1] - lo_.iy, z = k[2] - lo_.iz;
    if (x < 0 || x >= nx_ || y < 0 || y >= ny_ || z < 0 || z >= nz_)
      throw InvalidInputError("oracle_voids: a ray marks a voxel outside bounds");
    std::uint8_t& c = cells_[static_cast<std::size_t>((x * ny_ + y) * nz_ + z)];
    if (state > c) c = state;
  }

  std::uint8_t at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    if (x < 0 || x >= nx_ || y < 0 || y >= ny_ || z < 0 || z >= nz_) return 0;
    return cells_[static_cast<std::size_t>((x * ny_ + y) * nz_ + z)];
  }

  std::int64_t nx() const { return nx_; }
  std::int64_t ny() const { return ny_; }
  std::int64_t nz() const { return nz_; }
  const VoxelKey& lo() const { return lo_; }

 private:
  VoxelKey lo_;
  std::int64_t nx_, ny_, nz_;
  std::vector<std::uint8_t> cells_;
};

}  // namespace

std::vector<VoxelKey> oracle_voids(const std::vector<PosedScan>& scans, const Params& p,
                                   const IndexBounds& bounds) {
  p.validate();
  if (!bounds.valid) throw InvalidInputError("oracle_voids: invalid bounds");
  constexpr std::uint64_t kMaxCells = 10'000'000;
  if (bounds.voxel_count() > kMaxCells)
    throw InvalidInputError("oracle_voids: bounds exceed " + std::to_string(kMaxCells) +
                            " voxels");

  const double v = p.voxel_size;
  const int ext = p.effective_hit_extension();
  DenseGrid grid(bounds);
  std::vector<std::uint8_t> is_void(
      static_cast<std::size_t>(grid.nx() * grid.ny() * grid.nz()), 0);

  for (const PosedScan& scan : scans) {
    scan.pose.validate();
    if (scan.points.empty()) continue;
    grid.reset();
    const Eigen::Vector3d origin = scan.pose.translation;
    for (const Eigen::Vector3d& point : scan.points) {
      if (!point.allFinite()) continue;
      if (p.max_range && point.norm() > *p.max_range) continue;
      const Eigen::Vector3d endpoint = scan.pose.apply(point);
      if (!endpoint.allFinite()) continue;
      const double range = (endpoint - origin).norm();
      const double hit_from = range - p.d_s;
      for (const DensePiece& piece : segment_pieces(origin, endpoint, v))
        grid.mark(piece.key, piece.exit > hit_from ? 2 : 1);
      for (const DenseKey& k : extension_keys(origin, endpoint, v, ext))
        grid.mark(k, 2);
    }
    // full triple loop; cells outside the array count as unobserved
    const std::int64_t r = p.d_p;
    for (std::int64_t x = 0; x < grid.nx(); ++x)
      for (std::int64_t y = 0; y < grid.ny(); ++y)
        for (std::int64_t z = 0; z < grid.nz(); ++z) {
          if (grid.at(x, y, z) != 1) continue;
          bool observed = true;
          for (std::int64_t dx = -r; dx <= r && observed; ++dx)
            for (std::int64_t dy = -r; dy <= r && observed; ++dy)
              for (std::int64_t dz = -r; dz <= r && observed; ++dz) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                if (grid.at(x + dx, y + dy, z + dz) == 0) observed = false;
              }
          if (observed)
            is_void[static_cast<std::size_t>((x * grid.ny() + y) * grid.nz() + z)] = 1;
        }
  }

  std::vector<VoxelKey> out;
  std::size_t idx = 0;
  for (std::int64_t x = 0; x < grid.nx(); ++x)
    for (std::int64_t y = 0; y < grid.ny(); ++y)
      for (std::int64_t z = 0; z < grid.nz(); ++z, ++idx)
        if (is_void[idx])
          out.push_back({grid.lo().ix + x, grid.lo().iy + y, grid.lo().iz + z});
  return out;  // loop order is already lexicographic (ix, iy, iz)
}

}  // namespace dufo
