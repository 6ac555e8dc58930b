#include "dufo/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace dufo {

// The binary PCD contract is little-endian; this code memcpys raw floats.
static_assert(std::endian::native == std::endian::little,
              "binary PCD support requires a little-endian host");

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.empty() || errno == ERANGE)
    throw ParseError(path, line, "expected a number, got '" + tok + "'");
  return v;
}

long long parse_int(const std::string& tok, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || tok.empty() || errno == ERANGE)
    throw ParseError(path, line, "expected an integer, got '" + tok + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& tok, const std::string& path,
                         std::size_t line) {
  if (tok.empty() || tok[0] == '-')
    throw ParseError(path, line, "expected a non-negative integer, got '" + tok + "'");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || errno == ERANGE)
    throw ParseError(path, line, "expected a non-negative integer, got '" + tok + "'");
  return v;
}

float parse_float(const std::string& tok, const std::string& path, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const float v = std::strtof(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.empty())
    throw ParseError(path, line, "expected a number, got '" + tok + "'");
  return v;
}

/// Quaternion from (w, x, y, z) with the load-time tolerance rule: unit
/// within 1e-3, then renormalized exactly.
Eigen::Quaterniond checked_quaternion(double w, double x, double y, double z,
                                      const std::string& path, std::size_t line) {
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-3)
    throw ParseError(path, line,
                     "quaternion norm " + std::to_string(n) + " not unit within 1e-3");
  q.normalize();
  return q;
}

struct PcdHeader {
  std::vector<std::string> fields;
  std::vector<int> sizes;
  std::vector<char> types;
  std::vector<int> counts;
  std::int64_t width = -1;
  std::int64_t height = -1;
  std::int64_t points = -1;
  std::optional<Pose> viewpoint;
  std::string data_mode;
  std::size_t fields_line = 0;
  std::size_t data_line = 0;
};

PcdHeader read_pcd_header(std::istream& in, const std::string& path,
                          std::size_t& line_no) {
  PcdHeader h;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> tok = split_ws(line);
    const std::string& key = tok[0];
    if (key == "VERSION") {
      if (tok.size() != 2 || (tok[1] != "0.7" && tok[1] != ".7"))
        throw UnsupportedFeatureError(path + ":" + std::to_string(line_no) +
                                      ": only PCD version 0.7 is supported");
    } else if (key == "FIELDS" || key == "COLUMNS") {
      h.fields.assign(tok.begin() + 1, tok.end());
      h.fields_line = line_no;
    } else if (key == "SIZE") {
      for (std::size_t i = 1; i < tok.size(); ++i)
        h.sizes.push_back(static_cast<int>(parse_int(tok[i], path, line_no)));
    } else if (key == "TYPE") {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i].size() != 1)
          throw ParseError(path, line_no, "bad TYPE entry '" + tok[i] + "'");
        h.types.push_back(tok[i][0]);
      }
    } else if (key == "COUNT") {
      for (std::size_t i = 1; i < tok.size(); ++i)
        h.counts.push_back(static_cast<int>(parse_int(tok[i], path, line_no)));
    } else if (key == "WIDTH") {
      if (tok.size() != 2) throw ParseError(path, line_no, "WIDTH needs one value");
      h.width = parse_int(tok[1], path, line_no);
    } else if (key == "HEIGHT") {
      if (tok.size() != 2) throw ParseError(path, line_no, "HEIGHT needs one value");
      h.height = parse_int(tok[1], path, line_no);
    } else if (key == "VIEWPOINT") {
      if (tok.size() != 8)
        throw ParseError(path, line_no, "VIEWPOINT needs tx ty tz qw qx qy qz");
      double v[7];
      for (int i = 0; i < 7; ++i) v[i] = parse_double(tok[i + 1], path, line_no);
      Pose p;
      p.translation = Eigen::Vector3d(v[0], v[1], v[2]);
      p.rotation = checked_quaternion(v[3], v[4], v[5], v[6], path, line_no);
      h.viewpoint = p;
    } else if (key == "POINTS") {
      if (tok.size() != 2) throw ParseError(path, line_no, "POINTS needs one value");
      h.points = parse_int(tok[1], path, line_no);
    } else if (key == "DATA") {
      if (tok.size() != 2) throw ParseError(path, line_no, "DATA needs one mode");
      h.data_mode = tok[1];
      h.data_line = line_no;
      return h;
    } else {
      throw ParseError(path, line_no, "unknown header keyword '" + key + "'");
    }
  }
  throw ParseError(path, line_no, "header ended without a DATA line");
}

struct PcdLayout {
  int col_x = -1, col_y = -1, col_z = -1, col_label = -1;  // ascii column index
  std::size_t off_x = 0, off_y = 0, off_z = 0, off_label = 0;  // binary byte offset
  int label_size = 0;
  char label_type = 0;
  std::size_t stride = 0;
  int columns = 0;
  std::int64_t points = 0;
};

PcdLayout check_layout(const PcdHeader& h, const std::string& path) {
  const std::size_t n = h.fields.size();
  const std::size_t line = h.fields_line;
  if (n == 0) throw ParseError(path, h.data_line, "missing FIELDS");
  if (h.sizes.size() != n) throw ParseError(path, line, "SIZE/FIELDS length mismatch");
  if (h.types.size() != n) throw ParseError(path, line, "TYPE/FIELDS length mismatch");
  std::vector<int> counts = h.counts;
  if (counts.empty()) counts.assign(n, 1);
  if (counts.size() != n) throw ParseError(path, line, "COUNT/FIELDS length mismatch");

  PcdLayout lay;
  if (h.points >= 0) {
    lay.points = h.points;
    if (h.width >= 0 && h.height >= 0 && h.width * h.height != h.points)
      throw ParseError(path, line, "WIDTH*HEIGHT does not match POINTS");
  } else if (h.width >= 0 && h.height >= 0) {
    lay.points = h.width * h.height;
  } else {
    throw ParseError(path, h.data_line, "missing POINTS (or WIDTH and HEIGHT)");
  }

  std::size_t offset = 0;
  int column = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] < 1) throw ParseError(path, line, "COUNT entries must be >= 1");
    const std::string& f = h.fields[i];
    if (f == "x" || f == "y" || f == "z") {
      if (h.types[i] != 'F' || h.sizes[i] != 4 || counts[i] != 1)
        throw ParseError(path, line, "field '" + f + "' must be a 4-byte float, count 1");
      int* col = f == "x" ? &lay.col_x : f == "y" ? &lay.col_y : &lay.col_z;
      std::size_t* off = f == "x" ? &lay.off_x : f == "y" ? &lay.off_y : &lay.off_z;
      *col = column;
      *off = offset;
    } else if (f == "label") {
      if ((h.types[i] != 'I' && h.types[i] != 'U') ||
          (h.sizes[i] != 1 && h.sizes[i] != 2 && h.sizes[i] != 4) || counts[i] != 1)
        throw ParseError(path, line, "field 'label' must be a 1/2/4-byte integer, count 1");
      lay.col_label = column;
      lay.off_label = offset;
      lay.label_size = h.sizes[i];
      lay.label_type = h.types[i];
    }
    offset += static_cast<std::size_t>(h.sizes[i]) * counts[i];
    column += counts[i];
  }
  if (lay.col_x < 0 || lay.col_y < 0 || lay.col_z < 0)
    throw ParseError(path, line, "FIELDS must contain x, y and z");
  lay.stride = offset;
  lay.columns = column;
  return lay;
}

std::uint8_t checked_label(long long v, const std::string& where) {
  if (v != 0 && v != 1)
    throw ParseError(where + ": label value " + std::to_string(v) +
                     " (must be 0 static or 1 dynamic)");
  return static_cast<std::uint8_t>(v);
}

long long label_from_bytes(const char* p, int size, char type) {
  switch (size) {
    case 1: {
      if (type == 'U') { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
      std::int8_t v; std::memcpy(&v, p, 1); return v;
    }
    case 2: {
      if (type == 'U') { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
      std::int16_t v; std::memcpy(&v, p, 2); return v;
    }
    default: {
      if (type == 'U') { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
      std::int32_t v; std::memcpy(&v, p, 4); return v;
    }
  }
}

}  // namespace

CloudFile read_pcd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::size_t line_no = 0;
  const PcdHeader h = read_pcd_header(in, path, line_no);
  const PcdLayout lay = check_layout(h, path);

  CloudFile cloud;
  cloud.viewpoint = h.viewpoint;
  cloud.points.reserve(static_cast<std::size_t>(lay.points));
  const bool want_label = lay.col_label >= 0;
  if (want_label) cloud.labels.reserve(static_cast<std::size_t>(lay.points));

  if (h.data_mode == "ascii") {
    std::string line;
    for (std::int64_t i = 0; i < lay.points; ++i) {
      if (!std::getline(in, line))
        throw ParseError(path, line_no, "expected " + std::to_string(lay.points) +
                                            " data lines, got " + std::to_string(i));
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::vector<std::string> tok = split_ws(line);
      if (static_cast<int>(tok.size()) != lay.columns)
        throw ParseError(path, line_no,
                         "expected " + std::to_string(lay.columns) + " columns, got " +
                             std::to_string(tok.size()));
      cloud.points.emplace_back(parse_float(tok[lay.col_x], path, line_no),
                                parse_float(tok[lay.col_y], path, line_no),
                                parse_float(tok[lay.col_z], path, line_no));
      if (want_label)
        cloud.labels.push_back(checked_label(
            parse_int(tok[lay.col_label], path, line_no),
            path + ":" + std::to_string(line_no)));
    }
  } else if (h.data_mode == "binary") {
    const std::size_t total = lay.stride * static_cast<std::size_t>(lay.points);
    std::vector<char> buf(total);
    in.read(buf.data(), static_cast<std::streamsize>(total));
    if (static_cast<std::size_t>(in.gcount()) != total)
      throw ParseError(path, h.data_line,
                       "truncated binary payload: expected " + std::to_string(total) +
                           " bytes, got " + std::to_string(in.gcount()));
    for (std::int64_t i = 0; i < lay.points; ++i) {
      const char* rec = buf.data() + static_cast<std::size_t>(i) * lay.stride;
      float x, y, z;
      std::memcpy(&x, rec + lay.off_x, 4);
      std::memcpy(&y, rec + lay.off_y, 4);
      std::memcpy(&z, rec + lay.off_z, 4);
      cloud.points.emplace_back(x, y, z);
      if (want_label)
        cloud.labels.push_back(
            checked_label(label_from_bytes(rec + lay.off_label, lay.label_size,
                                           lay.label_type),
                          path + ": point " + std::to_string(i)));
    }
  } else if (h.data_mode == "binary_compressed") {
    throw UnsupportedFeatureError(path + ": DATA binary_compressed is not supported");
  } else {
    throw ParseError(path, h.data_line, "unknown DATA mode '" + h.data_mode + "'");
  }
  return cloud;
}

void write_pcd(const std::string& path, const CloudFile& cloud, PcdMode mode) {
  const bool with_label = !cloud.labels.empty();
  if (with_label && cloud.labels.size() != cloud.points.size())
    throw InvalidInputError("write_pcd: labels/points length mismatch");
  for (std::uint8_t l : cloud.labels)
    if (l > 1) throw InvalidInputError("write_pcd: label values must be 0 or 1");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  const Pose vp = cloud.viewpoint.value_or(Pose{});
  const std::size_t n = cloud.points.size();
  char buf[256];
  out << "# .PCD v0.7 - Point Cloud Data file format\n";
  out << "VERSION 0.7\n";
  out << (with_label ? "FIELDS x y z label\n" : "FIELDS x y z\n");
  out << (with_label ? "SIZE 4 4 4 4\n" : "SIZE 4 4 4\n");
  out << (with_label ? "TYPE F F F U\n" : "TYPE F F F\n");
  out << (with_label ? "COUNT 1 1 1 1\n" : "COUNT 1 1 1\n");
  out << "WIDTH " << n << "\n";
  out << "HEIGHT 1\n";
  std::snprintf(buf, sizeof(buf), "VIEWPOINT %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                vp.translation.x(), vp.translation.y(), vp.translation.z(),
                vp.rotation.w(), vp.rotation.x(), vp.rotation.y(), vp.rotation.z());
  out << buf;
  out << "POINTS " << n << "\n";
  out << (mode == PcdMode::Ascii ? "DATA ascii\n" : "DATA binary\n");

  if (mode == PcdMode::Ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3f& p = cloud.points[i];
      // 9 significant digits reparse to the identical float32
      if (with_label)
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %u\n", p.x(), p.y(), p.z(),
                      static_cast<unsigned>(cloud.labels[i]));
      else
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
      out << buf;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float xyz[3] = {cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      if (with_label) {
        const std::uint32_t l = cloud.labels[i];
        out.write(reinterpret_cast<const char*>(&l), sizeof(l));
      }
    }
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

PoseTable read_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  PoseTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::vector<std::string> tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 8)
      throw ParseError(path, line_no,
                       "expected 8 fields (scan_id tx ty tz qx qy qz qw), got " +
                           std::to_string(tok.size()));
    const std::uint64_t id = parse_uint(tok[0], path, line_no);
    double v[7];
    for (int i = 0; i < 7; ++i) {
      v[i] = parse_double(tok[i + 1], path, line_no);
      if (!std::isfinite(v[i]))
        throw ParseError(path, line_no, "non-finite pose value '" + tok[i + 1] + "'");
    }
    Pose p;
    p.translation = Eigen::Vector3d(v[0], v[1], v[2]);
    p.rotation = checked_quaternion(v[6], v[3], v[4], v[5], path, line_no);  // file is w-last
    if (!table.poses.emplace(id, p).second)
      throw ParseError(path, line_no, "duplicate scan_id " + std::to_string(id));
  }
  return table;
}

void write_poses(const std::string& path, const PoseTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# scan_id tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const auto& [id, p] : table.poses) {
    std::snprintf(buf, sizeof(buf), "%llu %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  static_cast<unsigned long long>(id), p.translation.x(),
                  p.translation.y(), p.translation.z(), p.rotation.x(), p.rotation.y(),
                  p.rotation.z(), p.rotation.w());
    out << buf;
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::vector<PosedScan> load_sequence(const std::string& dir, const LoadOptions& opts) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

  std::map<std::uint64_t, fs::path> files;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".pcd") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() ||
        !std::all_of(stem.begin(), stem.end(),
                     [](unsigned char c) { return std::isdigit(c); }))
      continue;
    errno = 0;
    const std::uint64_t id = std::strtoull(stem.c_str(), nullptr, 10);
    if (errno == ERANGE)
      throw IoError("scan id out of range: " + entry.path().string());
    const auto [it, inserted] = files.emplace(id, entry.path());
    if (!inserted)
      throw IoError("duplicate scan id " + std::to_string(id) + ": " +
                    it->second.string() + " and " + entry.path().string());
  }
  if (files.empty()) throw IoError("no .pcd scans found in " + dir);

  PoseTable table;
  if (opts.pose_source == PoseSource::File) {
    const std::string pose_path =
        opts.pose_file ? *opts.pose_file : (fs::path(dir) / "poses.txt").string();
    table = read_poses(pose_path);
  }

  std::vector<PosedScan> scans;
  scans.reserve(files.size());
  for (const auto& [id, path] : files) {
    CloudFile cloud = read_pcd(path.string());
    PosedScan scan;
    scan.scan_id = id;
    if (opts.pose_source == PoseSource::File) {
      const auto it = table.poses.find(id);
      if (it == table.poses.end())
        throw IoError("no pose for scan " + path.filename().string());
      scan.pose = it->second;
    } else {
      if (!cloud.viewpoint)
        throw IoError("no VIEWPOINT pose in scan " + path.filename().string());
      scan.pose = *cloud.viewpoint;
    }
    scan.points.reserve(cloud.points.size());
    for (const Eigen::Vector3f& p : cloud.points) {
      Eigen::Vector3d pd = p.cast<double>();
      if (opts.world_frame) pd = scan.pose.apply_inverse(pd);
      scan.points.push_back(pd);
    }
    scan.gt_labels = std::move(cloud.labels);
    scans.push_back(std::move(scan));
  }
  return scans;
}

Config read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Config cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ParseError(path, line_no, "duplicate key '" + key + "'");

    if (key == "voxel_size") {
      cfg.voxel_size = parse_double(value, path, line_no);
      if (!(*cfg.voxel_size > 0.0))
        throw ParseError(path, line_no, "voxel_size must be > 0");
    } else if (key == "d_s") {
      cfg.d_s = parse_double(value, path, line_no);
      if (!(*cfg.d_s >= 0.0)) throw ParseError(path, line_no, "d_s must be >= 0");
    } else if (key == "d_p") {
      cfg.d_p = static_cast<int>(parse_int(value, path, line_no));
      if (*cfg.d_p < 0) throw ParseError(path, line_no, "d_p must be >= 0");
    } else if (key == "max_range") {
      cfg.max_range = parse_double(value, path, line_no);
      if (!(*cfg.max_range > 0.0))
        throw ParseError(path, line_no, "max_range must be > 0");
    } else if (key == "mode") {
      if (value != "offline" && value != "online")
        throw ParseError(path, line_no, "mode must be offline or online");
      cfg.mode = value;
    } else if (key == "hit_extension") {
      cfg.hit_extension = static_cast<int>(parse_int(value, path, line_no));
      if (*cfg.hit_extension < 0)
        throw ParseError(path, line_no, "hit_extension must be >= 0");
    } else if (key == "online_order") {
      if (value != "classify_first" && value != "integrate_first")
        throw ParseError(path, line_no,
                         "online_order must be classify_first or integrate_first");
      cfg.online_order = value;
    } else {
      throw ParseError(path, line_no, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

}  // namespace dufo
