#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <dufo/errors.hpp>
#include <dufo/io.hpp>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using namespace dufo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() / ("dufo_io_test_" + std::to_string(::getpid()) +
                                        "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

void write_bytes(const std::string& path, const std::string& header,
                 const std::vector<char>& payload) {
  std::ofstream out(path, std::ios::binary);
  out << header;
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

bool same_float_bits(const std::vector<Eigen::Vector3f>& a,
                     const std::vector<Eigen::Vector3f>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(Eigen::Vector3f)) == 0;
}

CloudFile random_cloud(std::size_t n, std::uint64_t seed, bool with_labels) {
  CloudFile c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> coord(-100.0f, 100.0f);
  std::uniform_int_distribution<int> bit(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(coord(rng), coord(rng), coord(rng));
    if (with_labels) c.labels.push_back(static_cast<std::uint8_t>(bit(rng)));
  }
  return c;
}

std::string has_line(const std::exception& e, int line) {
  const std::string what = e.what();
  const std::string tag = ":" + std::to_string(line) + ":";
  return what.find(tag) != std::string::npos ? "" : what;
}

}  // namespace

TEST_CASE("pcd ascii round trip preserves float32 values, labels and viewpoint") {
  TempDir tmp;
  CloudFile c;
  c.points = {{0.1f, -0.0f, 3.25f},
              {1e-38f, 3.4028235e38f, -7.062499523162842f},
              {123.456789f, -0.001f, 0.0f}};
  c.labels = {0, 1, 0};
  Pose vp;
  vp.translation = {1.5, -2.25, 0.125};
  vp.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()));
  c.viewpoint = vp;

  const std::string path = tmp.file("a.pcd");
  write_pcd(path, c, PcdMode::Ascii);
  const CloudFile r = read_pcd(path);

  CHECK(same_float_bits(r.points, c.points));
  CHECK(r.labels == c.labels);
  REQUIRE(r.viewpoint.has_value());
  CHECK((r.viewpoint->translation - vp.translation).norm() == 0.0);
  CHECK(r.viewpoint->rotation.angularDistance(vp.rotation) < 1e-12);
}

TEST_CASE("pcd binary round trip is bit-exact for a million points") {
  TempDir tmp;
  CloudFile c = random_cloud(1'000'000, 5, true);
  // throw in exact edge patterns, including a NaN payload
  float qnan = std::numeric_limits<float>::quiet_NaN();
  c.points[0] = {qnan, -0.0f, std::numeric_limits<float>::denorm_min()};
  c.points[1] = {std::numeric_limits<float>::infinity(), 1.0f, -1.0f};

  const std::string path = tmp.file("big.pcd");
  write_pcd(path, c, PcdMode::Binary);
  const CloudFile r = read_pcd(path);
  CHECK(same_float_bits(r.points, c.points));
  CHECK(r.labels == c.labels);
}

TEST_CASE("pcd round trip without labels") {
  TempDir tmp;
  CloudFile c = random_cloud(257, 6, false);
  for (PcdMode mode : {PcdMode::Ascii, PcdMode::Binary}) {
    const std::string path = tmp.file("nl.pcd");
    write_pcd(path, c, mode);
    const CloudFile r = read_pcd(path);
    CHECK(same_float_bits(r.points, c.points));
    CHECK(r.labels.empty());
  }
}

TEST_CASE("pcd empty cloud round trip") {
  TempDir tmp;
  CloudFile c;
  for (PcdMode mode : {PcdMode::Ascii, PcdMode::Binary}) {
    const std::string path = tmp.file("empty.pcd");
    write_pcd(path, c, mode);
    const CloudFile r = read_pcd(path);
    CHECK(r.points.empty());
    CHECK(r.labels.empty());
  }
}

TEST_CASE("pcd reader skips fields it does not know, in both data modes") {
  TempDir tmp;
  SUBCASE("ascii with a count-2 field") {
    const std::string path = tmp.file("extra.pcd");
    write_text(path,
               "VERSION 0.7\n"
               "FIELDS t x y z\n"
               "SIZE 8 4 4 4\n"
               "TYPE F F F F\n"
               "COUNT 2 1 1 1\n"
               "WIDTH 2\n"
               "HEIGHT 1\n"
               "POINTS 2\n"
               "DATA ascii\n"
               "9 9 1 2 3\n"
               "8 8 4 5 6\n");
    const CloudFile r = read_pcd(path);
    REQUIRE(r.points.size() == 2);
    CHECK(r.points[0] == Eigen::Vector3f(1, 2, 3));
    CHECK(r.points[1] == Eigen::Vector3f(4, 5, 6));
    CHECK(r.labels.empty());
  }
  SUBCASE("binary with leading and trailing extras") {
    const std::string header =
        "VERSION 0.7\n"
        "FIELDS intensity x y z ring\n"
        "SIZE 4 4 4 4 2\n"
        "TYPE F F F F U\n"
        "COUNT 2 1 1 1 1\n"
        "WIDTH 2\n"
        "HEIGHT 1\n"
        "POINTS 2\n"
        "DATA binary\n";
    std::vector<char> payload;
    auto put_f = [&payload](float f) {
      char b[4];
      std::memcpy(b, &f, 4);
      payload.insert(payload.end(), b, b + 4);
    };
    auto put_u16 = [&payload](std::uint16_t u) {
      char b[2];
      std::memcpy(b, &u, 2);
      payload.insert(payload.end(), b, b + 2);
    };
    put_f(9);
    put_f(9);
    put_f(1);
    put_f(2);
    put_f(3);
    put_u16(77);
    put_f(8);
    put_f(8);
    put_f(4);
    put_f(5);
    put_f(6);
    put_u16(78);
    const std::string path = tmp.file("extrab.pcd");
    write_bytes(path, header, payload);
    const CloudFile r = read_pcd(path);
    REQUIRE(r.points.size() == 2);
    CHECK(r.points[0] == Eigen::Vector3f(1, 2, 3));
    CHECK(r.points[1] == Eigen::Vector3f(4, 5, 6));
  }
}

TEST_CASE("pcd reader derives the point count from WIDTH x HEIGHT") {
  TempDir tmp;
  const std::string path = tmp.file("organized.pcd");
  write_text(path,
             "VERSION 0.7\n"
             "FIELDS x y z\n"
             "SIZE 4 4 4\n"
             "TYPE F F F\n"
             "COUNT 1 1 1\n"
             "WIDTH 2\n"
             "HEIGHT 2\n"
             "DATA ascii\n"
             "0 0 0\n1 0 0\n0 1 0\n1 1 0\n");
  CHECK(read_pcd(path).points.size() == 4);
}

TEST_CASE("pcd viewpoint is quaternion-w-first; absent viewpoint stays absent") {
  TempDir tmp;
  const std::string path = tmp.file("vp.pcd");
  write_text(path,
             "VERSION 0.7\n"
             "FIELDS x y z\n"
             "SIZE 4 4 4\n"
             "TYPE F F F\n"
             "COUNT 1 1 1\n"
             "WIDTH 0\n"
             "HEIGHT 1\n"
             "VIEWPOINT 1 2 3 1 0 0 0\n"
             "POINTS 0\n"
             "DATA ascii\n");
  const CloudFile r = read_pcd(path);
  REQUIRE(r.viewpoint.has_value());
  CHECK(r.viewpoint->translation == Eigen::Vector3d(1, 2, 3));
  CHECK(r.viewpoint->rotation.angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);

  const std::string path2 = tmp.file("novp.pcd");
  write_text(path2,
             "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
             "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA ascii\n");
  CHECK_FALSE(read_pcd(path2).viewpoint.has_value());
}

TEST_CASE("pcd header errors carry the file and line") {
  TempDir tmp;

  SUBCASE("unknown keyword") {
    const std::string path = tmp.file("h1.pcd");
    write_text(path, "# comment\nVERSION 0.7\nFIELDS x y z\nBOGUS 1\n");
    try {
      read_pcd(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(has_line(e, 4) == "");
    }
  }
  SUBCASE("SIZE list shorter than FIELDS") {
    const std::string path = tmp.file("h2.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y z\nSIZE 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
               "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA ascii\n");
    try {
      read_pcd(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(has_line(e, 2) == "");
    }
  }
  SUBCASE("header without DATA") {
    const std::string path = tmp.file("h3.pcd");
    write_text(path, "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("unsupported version") {
    const std::string path = tmp.file("h4.pcd");
    write_text(path, "VERSION 0.5\n");
    CHECK_THROWS_AS(read_pcd(path), UnsupportedFeatureError);
  }
  SUBCASE("x stored as a double") {
    const std::string path = tmp.file("h5.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y z\nSIZE 8 4 4\nTYPE D F F\nCOUNT 1 1 1\n"
               "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA ascii\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("missing coordinate field") {
    const std::string path = tmp.file("h6.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y\nSIZE 4 4\nTYPE F F\nCOUNT 1 1\n"
               "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA ascii\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("WIDTH*HEIGHT inconsistent with POINTS") {
    const std::string path = tmp.file("h7.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
               "WIDTH 3\nHEIGHT 2\nPOINTS 5\nDATA ascii\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("short VIEWPOINT") {
    const std::string path = tmp.file("h8.pcd");
    write_text(path, "VERSION 0.7\nFIELDS x y z\nVIEWPOINT 0 0 0 1 0 0\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_pcd(tmp.file("nope.pcd")), IoError);
  }
}

TEST_CASE("pcd payload errors") {
  TempDir tmp;
  const std::string labeled_header =
      "VERSION 0.7\nFIELDS x y z label\nSIZE 4 4 4 4\nTYPE F F F U\nCOUNT 1 1 1 1\n"
      "WIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n";

  SUBCASE("label out of range") {
    const std::string path = tmp.file("p1.pcd");
    write_text(path, labeled_header + "0 0 0 0\n1 1 1 7\n");
    try {
      read_pcd(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("label value 7") != std::string::npos);
      CHECK(has_line(e, 11) == "");
    }
  }
  SUBCASE("wrong ascii column count") {
    const std::string path = tmp.file("p2.pcd");
    write_text(path, labeled_header + "0 0 0 0\n1 1\n");
    try {
      read_pcd(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(has_line(e, 11) == "");
    }
  }
  SUBCASE("too few ascii lines") {
    const std::string path = tmp.file("p3.pcd");
    write_text(path, labeled_header + "0 0 0 0\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("non-numeric ascii value") {
    const std::string path = tmp.file("p4.pcd");
    write_text(path, labeled_header + "0 0 0 0\n1 oops 1 1\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("truncated binary payload") {
    const std::string header =
        "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
        "WIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA binary\n";
    const std::string path = tmp.file("p5.pcd");
    write_bytes(path, header, std::vector<char>(10, 0));
    try {
      read_pcd(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  SUBCASE("binary label out of range") {
    const std::string header =
        "VERSION 0.7\nFIELDS x y z label\nSIZE 4 4 4 1\nTYPE F F F U\nCOUNT 1 1 1 1\n"
        "WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA binary\n";
    std::vector<char> payload(13, 0);
    payload[12] = 9;
    const std::string path = tmp.file("p6.pcd");
    write_bytes(path, header, payload);
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
  SUBCASE("compressed data is not supported") {
    const std::string path = tmp.file("p7.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
               "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA binary_compressed\n");
    CHECK_THROWS_AS(read_pcd(path), UnsupportedFeatureError);
  }
  SUBCASE("unknown data mode") {
    const std::string path = tmp.file("p8.pcd");
    write_text(path,
               "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
               "WIDTH 0\nHEIGHT 1\nPOINTS 0\nDATA base64\n");
    CHECK_THROWS_AS(read_pcd(path), ParseError);
  }
}

TEST_CASE("write_pcd validates its input") {
  TempDir tmp;
  CloudFile c;
  c.points = {{0, 0, 0}};
  c.labels = {0, 1};
  CHECK_THROWS_AS(write_pcd(tmp.file("w.pcd"), c, PcdMode::Ascii), InvalidInputError);
  c.labels = {2};
  CHECK_THROWS_AS(write_pcd(tmp.file("w.pcd"), c, PcdMode::Binary), InvalidInputError);
}

TEST_CASE("pose file round trip") {
  TempDir tmp;
  PoseTable t;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t id : {0ull, 3ull, 12ull, 4096ull}) {
    Pose p;
    p.translation = {u(rng) * 50, u(rng) * 50, u(rng) * 50};
    p.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    t.poses[id] = p;
  }
  const std::string path = tmp.file("poses.txt");
  write_poses(path, t);
  const PoseTable r = read_poses(path);
  REQUIRE(r.poses.size() == t.poses.size());
  for (const auto& [id, p] : t.poses) {
    REQUIRE(r.poses.count(id) == 1);
    const Pose& q = r.poses.at(id);
    CHECK(q.translation == p.translation);  // %.17g round-trips doubles exactly
    CHECK(q.rotation.angularDistance(p.rotation) < 1e-12);
  }
}

TEST_CASE("pose file accepts comments and renormalizes near-unit quaternions") {
  TempDir tmp;
  const std::string path = tmp.file("poses.txt");
  write_text(path,
             "# scan_id tx ty tz qx qy qz qw\n"
             "\n"
             "0 1.0 2.0 3.0 0 0 0 1.0005  # trailing comment\n");
  const PoseTable t = read_poses(path);
  REQUIRE(t.poses.count(0) == 1);
  const Pose& p = t.poses.at(0);
  CHECK(p.translation == Eigen::Vector3d(1, 2, 3));
  CHECK(std::abs(p.rotation.norm() - 1.0) < 1e-12);
  CHECK(p.rotation.w() == doctest::Approx(1.0));
}

TEST_CASE("pose file rejects malformed lines") {
  TempDir tmp;
  const std::string path = tmp.file("poses.txt");

  SUBCASE("wrong field count") {
    write_text(path, "0 1 2 3 0 0 1\n");
    try {
      read_poses(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(has_line(e, 1) == "");
    }
  }
  SUBCASE("non-numeric token") {
    write_text(path, "0 1 2 three 0 0 0 1\n");
    CHECK_THROWS_AS(read_poses(path), ParseError);
  }
  SUBCASE("negative scan id") {
    write_text(path, "-1 1 2 3 0 0 0 1\n");
    CHECK_THROWS_AS(read_poses(path), ParseError);
  }
  SUBCASE("quaternion too far from unit") {
    write_text(path, "0 1 2 3 0 0 0 1.2\n");
    CHECK_THROWS_AS(read_poses(path), ParseError);
  }
  SUBCASE("non-finite translation") {
    write_text(path, "0 nan 2 3 0 0 0 1\n");
    CHECK_THROWS_AS(read_poses(path), ParseError);
  }
  SUBCASE("duplicate scan id") {
    write_text(path, "0 1 2 3 0 0 0 1\n0 4 5 6 0 0 0 1\n");
    try {
      read_poses(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_poses(tmp.file("nope.txt")), IoError);
  }
}

namespace {

void write_scan_pcd(const std::string& path, const std::vector<Eigen::Vector3f>& pts,
                    const std::vector<std::uint8_t>& labels,
                    const std::optional<Pose>& vp = std::nullopt) {
  CloudFile c;
  c.points = pts;
  c.labels = labels;
  c.viewpoint = vp;
  write_pcd(path, c, PcdMode::Binary);
}

}  // namespace

TEST_CASE("load_sequence orders scans numerically and attaches poses and labels") {
  TempDir tmp;
  write_scan_pcd(tmp.file("000010.pcd"), {{1, 0, 0}}, {1});
  write_scan_pcd(tmp.file("000002.pcd"), {{0, 1, 0}, {0, 0, 1}}, {0, 1});
  write_scan_pcd(tmp.file("0.pcd"), {{2, 2, 2}}, {});
  write_text(tmp.file("notes.txt"), "not a scan\n");
  write_text(tmp.file("readme.pcd.bak"), "junk\n");
  write_text(tmp.file("poses.txt"),
             "0 0 0 0 0 0 0 1\n"
             "2 1 0 0 0 0 0 1\n"
             "10 0 5 0 0 0 0.7071067811865476 0.7071067811865476\n");

  const auto scans = load_sequence(tmp.path.string(), LoadOptions{});
  REQUIRE(scans.size() == 3);
  CHECK(scans[0].scan_id == 0);
  CHECK(scans[1].scan_id == 2);
  CHECK(scans[2].scan_id == 10);
  CHECK(scans[0].gt_labels.empty());
  CHECK(scans[1].gt_labels == std::vector<std::uint8_t>{0, 1});
  CHECK(scans[1].pose.translation == Eigen::Vector3d(1, 0, 0));
  CHECK(scans[2].pose.translation == Eigen::Vector3d(0, 5, 0));
  REQUIRE(scans[1].points.size() == 2);
  CHECK(scans[1].points[0] == Eigen::Vector3d(0, 1, 0));
}

TEST_CASE("load_sequence ignores non-numeric stems even with garbage content") {
  TempDir tmp;
  write_scan_pcd(tmp.file("7.pcd"), {{1, 1, 1}}, {});
  write_text(tmp.file("static.pcd"), "this is not a pcd\n");
  write_text(tmp.file("poses.txt"), "7 0 0 0 0 0 0 1\n");
  const auto scans = load_sequence(tmp.path.string(), LoadOptions{});
  REQUIRE(scans.size() == 1);
  CHECK(scans[0].scan_id == 7);
}

TEST_CASE("load_sequence rejects two spellings of the same scan id") {
  TempDir tmp;
  write_scan_pcd(tmp.file("7.pcd"), {{1, 1, 1}}, {});
  write_scan_pcd(tmp.file("007.pcd"), {{2, 2, 2}}, {});
  write_text(tmp.file("poses.txt"), "7 0 0 0 0 0 0 1\n");
  try {
    load_sequence(tmp.path.string(), LoadOptions{});
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
}

TEST_CASE("load_sequence error cases") {
  TempDir tmp;
  SUBCASE("empty directory") {
    CHECK_THROWS_AS(load_sequence(tmp.path.string(), LoadOptions{}), IoError);
  }
  SUBCASE("not a directory") {
    CHECK_THROWS_AS(load_sequence(tmp.file("missing"), LoadOptions{}), IoError);
  }
  SUBCASE("scan without a pose line") {
    write_scan_pcd(tmp.file("000002.pcd"), {{0, 0, 0}}, {});
    write_text(tmp.file("poses.txt"), "0 0 0 0 0 0 0 1\n");
    try {
      load_sequence(tmp.path.string(), LoadOptions{});
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("000002.pcd") != std::string::npos);
    }
  }
  SUBCASE("viewpoint source without viewpoints") {
    // our writer always emits VIEWPOINT, so author a header without one
    write_text(tmp.file("1.pcd"),
               "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
               "WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n0 0 0\n");
    LoadOptions opts;
    opts.pose_source = PoseSource::Viewpoint;
    try {
      load_sequence(tmp.path.string(), opts);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("1.pcd") != std::string::npos);
    }
  }
}

TEST_CASE("load_sequence can take poses from viewpoints and an explicit pose file") {
  TempDir tmp;
  Pose vp;
  vp.translation = {3, 2, 1};
  write_scan_pcd(tmp.file("0.pcd"), {{1, 0, 0}}, {}, vp);

  LoadOptions from_vp;
  from_vp.pose_source = PoseSource::Viewpoint;
  const auto scans = load_sequence(tmp.path.string(), from_vp);
  REQUIRE(scans.size() == 1);
  CHECK(scans[0].pose.translation == Eigen::Vector3d(3, 2, 1));

  write_text(tmp.file("other_poses.txt"), "0 9 9 9 0 0 0 1\n");
  LoadOptions from_file;
  from_file.pose_file = tmp.file("other_poses.txt");
  const auto scans2 = load_sequence(tmp.path.string(), from_file);
  CHECK(scans2[0].pose.translation == Eigen::Vector3d(9, 9, 9));
}

TEST_CASE("load_sequence converts world-frame clouds back to the sensor frame") {
  TempDir tmp;
  Pose pose;
  pose.translation = {2.0, -1.0, 0.5};
  pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));

  const std::vector<Eigen::Vector3d> sensor_pts = {
      {1.0, 0.0, 0.0}, {0.0, 2.0, 0.25}, {-0.5, 0.5, 1.0}};
  std::vector<Eigen::Vector3f> world_pts;
  for (const auto& p : sensor_pts) world_pts.push_back(pose.apply(p).cast<float>());
  write_scan_pcd(tmp.file("0.pcd"), world_pts, {});
  write_text(tmp.file("poses.txt"),
             "0 2.0 -1.0 0.5 0 0 0.7071067811865476 0.7071067811865476\n");

  LoadOptions opts;
  opts.world_frame = true;
  const auto scans = load_sequence(tmp.path.string(), opts);
  REQUIRE(scans.size() == 1);
  REQUIRE(scans[0].points.size() == sensor_pts.size());
  for (std::size_t i = 0; i < sensor_pts.size(); ++i)
    CHECK((scans[0].points[i] - sensor_pts[i]).norm() < 1e-5);
}

TEST_CASE("config file supplies every optional knob") {
  TempDir tmp;
  const std::string path = tmp.file("run.cfg");
  write_text(path,
             "# run settings\n"
             "voxel_size = 0.2\n"
             "d_s = 0.15   # margin\n"
             "d_p = 2\n"
             "max_range = 40\n"
             "mode = online\n"
             "hit_extension = 3\n"
             "online_order = integrate_first\n");
  const Config c = read_config(path);
  CHECK(c.voxel_size == 0.2);
  CHECK(c.d_s == 0.15);
  CHECK(c.d_p == 2);
  CHECK(c.max_range == 40.0);
  CHECK(c.mode == "online");
  CHECK(c.hit_extension == 3);
  CHECK(c.online_order == "integrate_first");
}

TEST_CASE("config file with only comments leaves everything unset") {
  TempDir tmp;
  const std::string path = tmp.file("empty.cfg");
  write_text(path, "# nothing here\n\n");
  const Config c = read_config(path);
  CHECK_FALSE(c.voxel_size.has_value());
  CHECK_FALSE(c.d_s.has_value());
  CHECK_FALSE(c.d_p.has_value());
  CHECK_FALSE(c.max_range.has_value());
  CHECK_FALSE(c.mode.has_value());
  CHECK_FALSE(c.hit_extension.has_value());
  CHECK_FALSE(c.online_order.has_value());
}

TEST_CASE("config file rejects bad content") {
  TempDir tmp;
  const std::string path = tmp.file("bad.cfg");

  SUBCASE("unknown key") {
    write_text(path, "voxel = 0.1\n");
    try {
      read_config(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(has_line(e, 1) == "");
    }
  }
  SUBCASE("missing equals") {
    write_text(path, "voxel_size 0.1\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("duplicate key") {
    write_text(path, "d_p = 1\nd_p = 2\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("bad mode") {
    write_text(path, "mode = batch\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("bad online order") {
    write_text(path, "online_order = sometimes\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("negative d_p") {
    write_text(path, "d_p = -1\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("zero voxel size") {
    write_text(path, "voxel_size = 0\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("non-numeric value") {
    write_text(path, "d_s = tiny\n");
    CHECK_THROWS_AS(read_config(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_config(tmp.file("nope.cfg")), IoError);
  }
}
