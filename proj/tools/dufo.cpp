#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dufo/io.hpp"
#include "dufo/metrics.hpp"
#include "dufo/pipeline.hpp"
#include "dufo/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared parameter plumbing: defaults < config file < flags.

struct ParamFlags {
  std::optional<double> voxel_size, ds, max_range;
  std::optional<int> dp, hit_extension;
  std::optional<std::string> mode, online_order, config_path;
};

void add_param_flags(CLI::App* cmd, ParamFlags& f) {
  cmd->add_option("--voxel-size", f.voxel_size, "voxel edge length, meters (default 0.1)");
  cmd->add_option("--ds", f.ds, "range-noise margin before each endpoint, meters (default 0.2)");
  cmd->add_option("--dp", f.dp, "neighborhood radius, voxels (default 1)");
  cmd->add_option("--max-range", f.max_range, "drop points beyond this range, meters");
  cmd->add_option("--hit-extension", f.hit_extension,
                  "voxels marked hit past each endpoint (default: same as --dp)");
  cmd->add_option("--mode", f.mode, "offline | online")
      ->check(CLI::IsMember({"offline", "online"}));
  cmd->add_option("--online-order", f.online_order, "classify_first | integrate_first")
      ->check(CLI::IsMember({"classify_first", "integrate_first"}));
  cmd->add_option("--config", f.config_path, "key=value config file; flags win over config");
}

struct Resolved {
  dufo::Params params;
  std::string mode = "offline";
  dufo::OnlineOrder order = dufo::OnlineOrder::ClassifyFirst;
};

Resolved resolve(const ParamFlags& f, const std::string& default_mode) {
  dufo::Config cfg;
  if (f.config_path) cfg = dufo::read_config(*f.config_path);
  Resolved r;
  r.mode = default_mode;
  if (cfg.voxel_size) r.params.voxel_size = *cfg.voxel_size;
  if (cfg.d_s) r.params.d_s = *cfg.d_s;
  if (cfg.d_p) r.params.d_p = *cfg.d_p;
  if (cfg.max_range) r.params.max_range = *cfg.max_range;
  if (cfg.hit_extension) r.params.hit_extension = *cfg.hit_extension;
  if (cfg.mode) r.mode = *cfg.mode;
  std::string order = cfg.online_order.value_or("classify_first");
  if (f.voxel_size) r.params.voxel_size = *f.voxel_size;
  if (f.ds) r.params.d_s = *f.ds;
  if (f.dp) r.params.d_p = *f.dp;
  if (f.max_range) r.params.max_range = *f.max_range;
  if (f.hit_extension) r.params.hit_extension = *f.hit_extension;
  if (f.mode) r.mode = *f.mode;
  if (f.online_order) order = *f.online_order;
  r.order = order == "integrate_first" ? dufo::OnlineOrder::IntegrateFirst
                                       : dufo::OnlineOrder::ClassifyFirst;
  r.params.validate();
  return r;
}

// ---------------------------------------------------------------------------
// Output helpers.

std::string scan_file_stem(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(id));
  return buf;
}

json metrics_json(const dufo::Metrics& m, const dufo::Confusion& c) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  return json{{"SA", opt(m.sa)},
              {"DA", opt(m.da)},
              {"AA", opt(m.aa)},
              {"counts",
               {{"static_correct", c.static_correct},
                {"static_total", c.static_total},
                {"dynamic_correct", c.dynamic_correct},
                {"dynamic_total", c.dynamic_total}}}};
}

json params_json(const dufo::Params& p, const std::string& mode,
                 dufo::OnlineOrder order) {
  return json{
      {"voxel_size", p.voxel_size},
      {"d_s", p.d_s},
      {"d_p", p.d_p},
      {"max_range", p.max_range ? json(*p.max_range) : json(nullptr)},
      {"hit_extension", p.effective_hit_extension()},
      {"mode", mode},
      {"online_order",
       order == dufo::OnlineOrder::IntegrateFirst ? "integrate_first" : "classify_first"}};
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw dufo::IoError("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw dufo::IoError("write failed: " + path.string());
}

/// Ground-truth labels arranged over the same retained indices as `shape`.
dufo::LabeledSequence gt_sequence(const std::vector<dufo::PosedScan>& scans,
                                  const dufo::LabeledSequence& shape) {
  if (scans.size() != shape.size())
    throw dufo::InvalidInputError("ground-truth construction: sequence length mismatch");
  dufo::LabeledSequence gt;
  gt.reserve(scans.size());
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const dufo::PosedScan& scan = scans[s];
    const dufo::ScanLabels& sl = shape[s];
    if (scan.gt_labels.empty())
      throw dufo::InvalidInputError("scan " + std::to_string(scan.scan_id) +
                                    " has no ground-truth labels; need PCDs with a label field");
    dufo::ScanLabels g;
    g.scan_id = sl.scan_id;
    g.retained_indices = sl.retained_indices;
    g.labels.reserve(sl.retained_indices.size());
    for (std::size_t raw : sl.retained_indices) {
      if (raw >= scan.gt_labels.size())
        throw dufo::InvalidInputError("scan " + std::to_string(scan.scan_id) +
                                      ": point index " + std::to_string(raw) +
                                      " out of range");
      g.labels.push_back(scan.gt_labels[raw] ? dufo::PointLabel::Dynamic
                                             : dufo::PointLabel::Static);
    }
    gt.push_back(std::move(g));
  }
  return gt;
}

struct TimingStats {
  double mean = 0.0;
  double stdev = 0.0;
};

TimingStats timing_stats(const std::vector<double>& xs) {
  TimingStats t;
  if (xs.empty()) return t;
  for (double x : xs) t.mean += x;
  t.mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - t.mean) * (x - t.mean);
  t.stdev = std::sqrt(acc / static_cast<double>(xs.size()));
  return t;
}

// ---------------------------------------------------------------------------
// clean / online

struct RunArgs {
  std::string input, out;
  std::optional<std::string> poses;
  bool viewpoint = false;
  bool world_frame = false;
  bool with_gt = false;
  ParamFlags pf;
};

void add_input_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--input", a.input, "directory of <digits>.pcd scans")->required();
  CLI::Option* poses = cmd->add_option("--poses", a.poses,
                                       "pose file (default <input>/poses.txt)");
  cmd->add_flag("--viewpoint", a.viewpoint, "take poses from each PCD's VIEWPOINT header")
      ->excludes(poses);
  cmd->add_flag("--world-frame", a.world_frame,
                "PCD points are stored in world frame, not sensor frame");
}

std::vector<dufo::PosedScan> load_input(const RunArgs& a) {
  dufo::LoadOptions lo;
  lo.pose_source = a.viewpoint ? dufo::PoseSource::Viewpoint : dufo::PoseSource::File;
  lo.pose_file = a.poses;
  lo.world_frame = a.world_frame;
  return dufo::load_sequence(a.input, lo);
}

int run_pipeline_cmd(const RunArgs& a, const std::string& default_mode) {
  const Resolved r = resolve(a.pf, default_mode);
  const std::vector<dufo::PosedScan> scans = load_input(a);
  const dufo::PipelineResult res =
      r.mode == "online" ? dufo::run_online(scans, r.params, r.order)
                         : dufo::run_offline(scans, r.params);

  std::size_t points_in = 0, retained = 0, n_static = 0, n_dynamic = 0;
  for (const dufo::PosedScan& s : scans) points_in += s.points.size();
  for (const dufo::ScanLabels& sl : res.labels) {
    retained += sl.labels.size();
    for (dufo::PointLabel l : sl.labels)
      (l == dufo::PointLabel::Dynamic ? n_dynamic : n_static) += 1;
  }

  fs::create_directories(fs::path(a.out) / "labels");
  const dufo::CleanedCloud cleaned = dufo::export_cleaned(scans, res.labels);
  const auto to_cloud = [](const std::vector<Eigen::Vector3d>& pts) {
    dufo::CloudFile c;
    c.points.reserve(pts.size());
    for (const Eigen::Vector3d& p : pts) c.points.push_back(p.cast<float>());
    return c;
  };
  dufo::write_pcd((fs::path(a.out) / "static.pcd").string(), to_cloud(cleaned.static_points),
                  dufo::PcdMode::Binary);
  dufo::write_pcd((fs::path(a.out) / "dynamic.pcd").string(),
                  to_cloud(cleaned.dynamic_points), dufo::PcdMode::Binary);

  for (const dufo::ScanLabels& sl : res.labels) {
    std::string body;
    body.reserve(sl.labels.size() * 10);
    char line[48];
    for (std::size_t i = 0; i < sl.labels.size(); ++i) {
      std::snprintf(line, sizeof(line), "%zu %u\n", sl.retained_indices[i],
                    static_cast<unsigned>(sl.labels[i] == dufo::PointLabel::Dynamic));
      body += line;
    }
    write_text_file(fs::path(a.out) / "labels" / (scan_file_stem(sl.scan_id) + ".label"),
                    body);
  }

  const TimingStats t = timing_stats(res.integrate_seconds);
  json report;
  report["params"] = params_json(r.params, r.mode, r.order);
  report["scans"] = scans.size();
  report["points"] = {{"in", points_in},
                      {"retained", retained},
                      {"dropped", points_in - retained},
                      {"static", n_static},
                      {"dynamic", n_dynamic}};
  report["voids"] = res.void_map.size();
  report["timing"] = {{"per_scan_s", res.integrate_seconds},
                      {"mean_s", t.mean},
                      {"std_s", t.stdev}};

  std::optional<dufo::Metrics> metrics;
  if (a.with_gt) {
    const dufo::LabeledSequence gt = gt_sequence(scans, res.labels);
    const dufo::Confusion c = dufo::confusion(res.labels, gt);
    metrics = dufo::compute_metrics(c);
    report["metrics"] = metrics_json(*metrics, c);
  }
  write_text_file(fs::path(a.out) / "report.json", report.dump(2) + "\n");

  std::printf("%s: %zu scans, %zu points in, %zu retained\n", r.mode.c_str(), scans.size(),
              points_in, retained);
  std::printf("static %zu  dynamic %zu  void voxels %zu\n", n_static, n_dynamic,
              res.void_map.size());
  std::printf("integrate per scan: %.4f +- %.4f s\n", t.mean, t.stdev);
  if (metrics) std::printf("%s\n", dufo::format_metrics(*metrics).c_str());
  std::printf("outputs in %s\n", a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

dufo::ScanLabels read_label_file(const fs::path& path, std::uint64_t scan_id) {
  std::ifstream in(path);
  if (!in) throw dufo::IoError("cannot open: " + path.string());
  dufo::ScanLabels sl;
  sl.scan_id = scan_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t idx = 0;
    unsigned label = 0;
    if (std::sscanf(line.c_str(), "%zu %u", &idx, &label) != 2 || label > 1)
      throw dufo::ParseError(path.string(), line_no, "expected 'raw_index label(0|1)'");
    sl.retained_indices.push_back(idx);
    sl.labels.push_back(label ? dufo::PointLabel::Dynamic : dufo::PointLabel::Static);
  }
  return sl;
}

int run_eval(const RunArgs& a) {
  const std::vector<dufo::PosedScan> scans = load_input(a);
  dufo::LabeledSequence pred;
  pred.reserve(scans.size());
  for (const dufo::PosedScan& scan : scans) {
    const fs::path path =
        fs::path(a.out) / "labels" / (scan_file_stem(scan.scan_id) + ".label");
    if (!fs::exists(path))
      throw dufo::IoError("no prediction for scan " + std::to_string(scan.scan_id) +
                          ": " + path.string());
    pred.push_back(read_label_file(path, scan.scan_id));
  }
  const dufo::LabeledSequence gt = gt_sequence(scans, pred);
  const dufo::Confusion c = dufo::confusion(pred, gt);
  const dufo::Metrics m = dufo::compute_metrics(c);
  write_text_file(fs::path(a.out) / "metrics.json", metrics_json(m, c).dump(2) + "\n");
  std::printf("%s\n", dufo::format_metrics(m).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec_path, out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  dufo::SceneSpec spec = dufo::read_scene_spec(a.spec_path);
  if (a.seed) spec.seed = *a.seed;
  const std::vector<dufo::PosedScan> scans = dufo::generate(spec);

  fs::create_directories(a.out);
  dufo::PoseTable table;
  std::size_t total = 0;
  for (const dufo::PosedScan& scan : scans) {
    dufo::CloudFile cloud;
    cloud.points.reserve(scan.points.size());
    for (const Eigen::Vector3d& p : scan.points) cloud.points.push_back(p.cast<float>());
    cloud.labels = scan.gt_labels;
    cloud.viewpoint = scan.pose;
    dufo::write_pcd((fs::path(a.out) / (scan_file_stem(scan.scan_id) + ".pcd")).string(),
                    cloud, dufo::PcdMode::Binary);
    table.poses.emplace(scan.scan_id, scan.pose);
    total += scan.points.size();
  }
  dufo::write_poses((fs::path(a.out) / "poses.txt").string(), table);
  std::printf("wrote %zu scans (%zu points) to %s\n", scans.size(), total, a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

int run_ablate(const RunArgs& a) {
  const Resolved base = resolve(a.pf, "offline");
  const std::vector<dufo::PosedScan> scans = load_input(a);

  struct Row {
    const char* name;
    double voxel_size, ds;
    int dp;
  };
  const Row rows[] = {
      {"none        (v=0.1)", 0.1, 0.0, 0},
      {"ds only     (v=0.1)", 0.1, 0.2, 0},
      {"dp only     (v=0.1)", 0.1, 0.0, 1},
      {"ds+dp       (v=0.2)", 0.2, 0.2, 1},
      {"ds+dp       (v=0.1)", 0.1, 0.2, 1},
  };

  json out_rows = json::array();
  std::printf("%-22s %s\n", "config", "metrics");
  for (const Row& row : rows) {
    dufo::Params p = base.params;
    p.voxel_size = row.voxel_size;
    p.d_s = row.ds;
    p.d_p = row.dp;
    const dufo::PipelineResult res = dufo::run_offline(scans, p);
    const dufo::LabeledSequence gt = gt_sequence(scans, res.labels);
    const dufo::Confusion c = dufo::confusion(res.labels, gt);
    const dufo::Metrics m = dufo::compute_metrics(c);
    std::printf("%-22s %s\n", row.name, dufo::format_metrics(m).c_str());
    out_rows.push_back({{"name", row.name},
                        {"voxel_size", row.voxel_size},
                        {"d_s", row.ds},
                        {"d_p", row.dp},
                        {"metrics", metrics_json(m, c)}});
  }
  fs::create_directories(a.out);
  write_text_file(fs::path(a.out) / "ablation.json", out_rows.dump(2) + "\n");
  std::printf("wrote %s/ablation.json\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"void-region dynamic point classification for posed point-cloud sequences"};
  app.require_subcommand(1);

  RunArgs clean_args, online_args, eval_args, ablate_args;
  SynthArgs synth_args;
  int rc = 0;

  CLI::App* clean = app.add_subcommand(
      "clean", "label a sequence offline and write cleaned static/dynamic maps");
  add_input_flags(clean, clean_args);
  clean->add_option("--out", clean_args.out, "output directory")->required();
  clean->add_flag("--gt", clean_args.with_gt, "evaluate against label fields in the input");
  add_param_flags(clean, clean_args.pf);
  clean->callback([&] { rc = run_pipeline_cmd(clean_args, "offline"); });

  CLI::App* online = app.add_subcommand(
      "online", "label each scan causally against the map built so far");
  add_input_flags(online, online_args);
  online->add_option("--out", online_args.out, "output directory")->required();
  online->add_flag("--gt", online_args.with_gt, "evaluate against label fields in the input");
  add_param_flags(online, online_args.pf);
  online->callback([&] { rc = run_pipeline_cmd(online_args, "online"); });

  CLI::App* eval = app.add_subcommand(
      "eval", "score label files in --out/labels against ground truth in --input");
  add_input_flags(eval, eval_args);
  eval->add_option("--out", eval_args.out, "run directory holding labels/")->required();
  eval->callback([&] { rc = run_eval(eval_args); });

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  synth->add_option("--spec", synth_args.spec_path, "scene spec file")->required();
  synth->add_option("--out", synth_args.out, "output dataset directory")->required();
  synth->add_option("--seed", synth_args.seed, "override the spec's RNG seed");
  synth->callback([&] { rc = run_synth(synth_args); });

  CLI::App* ablate = app.add_subcommand(
      "ablate", "run the margin/neighborhood/voxel-size ablation grid offline");
  add_input_flags(ablate, ablate_args);
  ablate->add_option("--out", ablate_args.out, "output directory")->required();
  add_param_flags(ablate, ablate_args.pf);
  ablate->callback([&] { rc = run_ablate(ablate_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const dufo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
