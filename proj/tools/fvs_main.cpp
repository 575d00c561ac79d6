#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fvs/ad/serialize.hpp"
#include "fvs/error.hpp"
#include "fvs/evaluation.hpp"
#include "fvs/parallel.hpp"
#include "fvs/pipeline.hpp"
#include "fvs/rasterizer.hpp"
#include "fvs/scene_io.hpp"
#include "fvs/selection.hpp"
#include "fvs/synthetic.hpp"
#include "fvs/training.hpp"
#include "fvs/warping.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  bool json_events = false;
  int threads = 0;
};

Globals g;

int Threads() { return g.threads > 0 ? g.threads : fvs::DefaultThreadCount(); }

// Progress goes to stdout: plain text, or one JSON object per line.
void Event(const std::string& name, const json& fields, const std::string& text) {
  if (g.json_events) {
    json j = fields;
    j["event"] = name;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << text << "\n";
  }
  std::cout.flush();
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fvs::Fail(fvs::ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fvs::Fail(fvs::ErrorCode::kMalformedFile, path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) fvs::Fail(fvs::ErrorCode::kIoError, "cannot write " + path.string());
}

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t FileHash(const fs::path& path) { return fvs::ad::Fnv1a(fvs::ReadFileBytes(path)); }

struct Target {
  fvs::CameraIntrinsics camera;
  fvs::Pose pose;
  std::optional<int> image_id;  // set when the pose names a scene image
};

// "--pose" is either a 0-based index into the scene's images (ascending id)
// or a trajectory file, of which entry `entry` is used.
Target ResolvePose(const fvs::SceneBundle& scene, const std::string& pose, int entry) {
  const bool numeric = !pose.empty() && pose.find_first_not_of("0123456789") == std::string::npos;
  if (numeric) {
    std::vector<const fvs::ImageRecord*> sorted;
    for (const auto& r : scene.images) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->image_id < b->image_id; });
    const std::size_t idx = std::stoul(pose);
    if (idx >= sorted.size())
      fvs::Fail(fvs::ErrorCode::kUsageError, "pose index " + pose + " out of range (scene has " +
                                                 std::to_string(sorted.size()) + " images)");
    return {scene.camera_of(*sorted[idx]), sorted[idx]->pose, sorted[idx]->image_id};
  }
  const auto traj = fvs::ReadTrajectory(pose);
  if (entry < 0 || std::size_t(entry) >= traj.size())
    fvs::Fail(fvs::ErrorCode::kUsageError, "trajectory entry " + std::to_string(entry) + " out of range");
  return {traj[entry].camera, traj[entry].pose, std::nullopt};
}

fvs::TrainConfig LoadRunConfig(const fs::path& weights, const std::string& config_path) {
  fs::path cfg = config_path.empty() ? weights.parent_path() / "config.json" : fs::path(config_path);
  if (!fs::exists(cfg))
    fvs::Fail(fvs::ErrorCode::kUsageError, "no run config found at " + cfg.string() + " (pass --config)");
  return fvs::TrainConfig::FromJson(ReadJsonFile(cfg));
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string colmap_dir, mesh, images, out;
};

fs::path FindSparse(const fs::path& dir, const std::string& stem) {
  for (const fs::path& base : {dir, dir / "sparse", dir / "sparse" / "0"}) {
    for (const char* ext : {".bin", ".txt"}) {
      const fs::path p = base / (stem + ext);
      if (fs::exists(p)) return p;
    }
  }
  fvs::Fail(fvs::ErrorCode::kIoError, "no " + stem + ".bin or .txt under " + dir.string());
}

int RunIngest(const IngestArgs& a) {
  const fs::path dir(a.colmap_dir);
  fvs::SceneBundle scene;
  scene.cameras = fvs::ReadColmapCameras(FindSparse(dir, "cameras"));
  scene.images = fvs::ReadColmapImages(FindSparse(dir, "images"));
  scene.sparse_points = fvs::ReadColmapPoints3D(FindSparse(dir, "points3D"));
  scene.mesh = fvs::ReadPlyMesh(a.mesh);
  const fs::path image_dir = a.images.empty() ? dir / "images" : fs::path(a.images);
  fvs::CameraMap undistorted = scene.cameras;
  for (auto& rec : scene.images) {
    const fs::path p = image_dir / rec.name;
    if (!fs::exists(p)) fvs::Fail(fvs::ErrorCode::kMissingReference, "image file " + p.string() + " not found");
    rec.pixels = fvs::ReadImage(p);
    const auto cam = scene.cameras.find(rec.camera_id);
    if (cam == scene.cameras.end())
      fvs::Fail(fvs::ErrorCode::kMissingReference, "image " + rec.name + " references unknown camera");
    if (cam->second.model == fvs::CameraModel::kSimpleRadial) {
      auto u = fvs::UndistortImage(rec.pixels, cam->second);
      rec.pixels = std::move(u.image);
      undistorted[rec.camera_id] = u.camera;
    }
  }
  scene.cameras = std::move(undistorted);
  scene.Validate();
  fvs::WriteSceneBundle(scene, a.out);
  Event("ingest",
        {{"images", scene.images.size()},
         {"cameras", scene.cameras.size()},
         {"points", scene.sparse_points.size()},
         {"faces", scene.mesh.faces.size()},
         {"out", a.out}},
        "ingested " + std::to_string(scene.images.size()) + " images, " + std::to_string(scene.mesh.faces.size()) +
            " faces into " + a.out);
  return 0;
}

struct PoseArgs {
  std::string scene, pose, out;
  int entry = 0;
  int factor = 1;
};

int RunDepth(const PoseArgs& a) {
  const auto scene = fvs::ReadSceneBundle(a.scene);
  const Target t = ResolvePose(scene, a.pose, a.entry);
  fvs::RasterOptions opts;
  opts.threads = Threads();
  const auto cam = t.camera.Scaled(a.factor);
  const auto depth = fvs::RenderDepth(scene.mesh, cam, t.pose, opts);
  fvs::WritePfm(depth, a.out);
  Event("depth", {{"width", depth.width}, {"height", depth.height}, {"valid", depth.valid_count()}, {"out", a.out}},
        "depth " + std::to_string(depth.width) + "x" + std::to_string(depth.height) + ", " +
            std::to_string(depth.valid_count()) + " valid pixels -> " + a.out);
  return 0;
}

struct SelectArgs {
  PoseArgs pose;
  int k = 7;
  bool exclude_self = false;
};

int RunSelect(const SelectArgs& a) {
  const auto bundle = fvs::ReadSceneBundle(a.pose.scene);
  const Target t = ResolvePose(bundle, a.pose.pose, a.pose.entry);
  fvs::RasterOptions opts;
  opts.threads = Threads();
  std::vector<fvs::SourceView> candidates;
  std::vector<fvs::DepthMap> depths;
  depths.reserve(bundle.images.size());
  for (const auto& rec : bundle.images) {
    const auto cam = bundle.camera_of(rec).Scaled(a.pose.factor);
    depths.push_back(fvs::RenderDepth(bundle.mesh, cam, rec.pose, opts));
  }
  for (std::size_t i = 0; i < bundle.images.size(); ++i) {
    const auto& rec = bundle.images[i];
    candidates.push_back({rec.image_id, bundle.camera_of(rec).Scaled(a.pose.factor), rec.pose, &depths[i]});
  }
  const auto cam = t.camera.Scaled(a.pose.factor);
  const auto depth = fvs::RenderDepth(bundle.mesh, cam, t.pose, opts);
  std::set<int> exclude;
  if (a.exclude_self && t.image_id) exclude.insert(*t.image_id);
  const auto sel = fvs::SelectSourceViews(candidates, cam, t.pose, depth, a.k, exclude, Threads());
  for (std::size_t i = 0; i < sel.ranked.size(); ++i) {
    const bool chosen = i < sel.chosen.size();
    // One JSON line per candidate regardless of --json.
    std::cout << json{{"rank", i}, {"image_id", sel.ranked[i].image_id}, {"score", sel.ranked[i].score},
                      {"chosen", chosen}}
                     .dump()
              << "\n";
  }
  return 0;
}

struct WarpArgs {
  PoseArgs pose;
  int src = 0;
};

int RunWarp(const WarpArgs& a) {
  const auto bundle = fvs::ReadSceneBundle(a.pose.scene);
  const Target t = ResolvePose(bundle, a.pose.pose, a.pose.entry);
  const fvs::ImageRecord* src = nullptr;
  for (const auto& r : bundle.images)
    if (r.image_id == a.src) src = &r;
  if (!src) fvs::Fail(fvs::ErrorCode::kUsageError, "no source image with id " + std::to_string(a.src));
  if (src->pixels.pixels.empty()) fvs::Fail(fvs::ErrorCode::kMissingReference, "source image has no pixels");
  fvs::RasterOptions opts;
  opts.threads = Threads();
  const auto cam = t.camera.Scaled(a.pose.factor);
  const auto src_cam = bundle.camera_of(*src).Scaled(a.pose.factor);
  const auto depth = fvs::RenderDepth(bundle.mesh, cam, t.pose, opts);
  const fvs::ImageF src_image = fvs::ToFloat(fvs::Downsample(src->pixels, a.pose.factor));
  const auto plan = fvs::PlanWarp(src_cam, src->pose, cam, t.pose, depth, Threads());
  fvs::ImageF out(3, cam.width, cam.height);
  fvs::GatherFeatures<float>(plan, 3, src_image.values, out.values);
  fvs::WriteImage(fvs::ToRGB8(out), a.pose.out);
  std::size_t inside = 0;
  for (auto m : plan.boundary_mask) inside += m;
  Event("warp", {{"source", a.src}, {"inside", inside}, {"out", a.pose.out}},
        "warped source " + std::to_string(a.src) + " (" + std::to_string(inside) + " pixels inside) -> " +
            a.pose.out);
  return 0;
}

struct TrainArgs {
  std::vector<std::string> scenes;
  std::string config, out;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

int RunTrain(const TrainArgs& a) {
  json cfg_json = a.config.empty() ? json::object() : ReadJsonFile(a.config);
  if (a.iterations) cfg_json["iterations"] = *a.iterations;
  if (a.seed) cfg_json["seed"] = *a.seed;
  if (g.threads > 0) cfg_json["threads"] = g.threads;
  const fvs::TrainConfig cfg = fvs::TrainConfig::FromJson(cfg_json);
  std::vector<fvs::PreparedScene> prepared;
  fvs::RasterOptions opts;
  opts.threads = cfg.threads;
  for (const auto& s : a.scenes) prepared.push_back(fvs::PrepareScene(fvs::ReadSceneBundle(s), cfg.downsample_factor, opts));
  std::vector<const fvs::PreparedScene*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  fvs::Trainer trainer(ptrs, cfg);
  if (a.resume) {
    if (const auto ckpt = fvs::LatestCheckpoint(a.out)) {
      trainer.LoadCheckpoint(*ckpt);
      Event("resume", {{"checkpoint", ckpt->string()}, {"iteration", trainer.iteration()}},
            "resumed from " + ckpt->string() + " at iteration " + std::to_string(trainer.iteration()));
    }
  }
  const int report_every = std::max(1, cfg.iterations / 20);
  trainer.Run(fs::path(a.out), [&](const fvs::StepRecord& r) {
    if (r.iteration % report_every == 0 || r.iteration == cfg.iterations) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "iter %d loss %.5f (%.1fs)", r.iteration, r.loss, r.wall_time);
      Event("step", {{"iteration", r.iteration}, {"loss", r.loss}, {"wall_time", r.wall_time}}, buf);
    }
  });
  const fs::path final_weights = fvs::CheckpointPath(a.out, trainer.iteration());
  Event("done", {{"weights", final_weights.string()}, {"iterations", trainer.iteration()}},
        "weights -> " + final_weights.string());
  return 0;
}

struct RenderArgs {
  std::string scene, weights, poses, out, config;
  std::optional<int> k;
  bool direct = false;
};

int RunRender(const RenderArgs& a) {
  const fvs::TrainConfig cfg = LoadRunConfig(a.weights, a.config);
  fvs::Network<float> net(cfg.model, cfg.seed);
  fvs::LoadWeights(net, a.weights);
  fvs::RasterOptions opts;
  const auto scene = fvs::PrepareScene(fvs::ReadSceneBundle(a.scene), cfg.downsample_factor, opts);
  const auto traj = fvs::ReadTrajectory(a.poses);
  fvs::ViewSynthesizer synth(scene, net, {a.k.value_or(7), !a.direct, 1});
  if (!a.direct) synth.PrecomputeFeatures();
  fs::create_directories(a.out);
  std::vector<std::string> errors(traj.size());
  fvs::ParallelFor(0, int(traj.size()), Threads(), [&](int b, int e) {
    for (int i = b; i < e; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d.ppm", i);
      try {
        const auto out = synth.Synthesize(traj[i].camera.Scaled(cfg.downsample_factor), traj[i].pose);
        fvs::WriteImage(fvs::ToRGB8(out.image), fs::path(a.out) / name);
      } catch (const fvs::Error& err) {
        if (err.code() != fvs::ErrorCode::kEmptyOverlap) throw;
        errors[i] = err.what();
      }
    }
  });
  std::size_t rendered = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (errors[i].empty()) {
      ++rendered;
    } else {
      Event("skip", {{"frame", i}, {"reason", errors[i]}}, "frame " + std::to_string(i) + " skipped: " + errors[i]);
    }
  }
  Event("render", {{"frames", rendered}, {"out", a.out}, {"weights_hash", Hex(FileHash(a.weights))}},
        "rendered " + std::to_string(rendered) + " frames -> " + a.out);
  return 0;
}

struct EvalArgs {
  std::string scene, weights, protocol = "loo", poses, out, config, method = "model", sweep;
  std::optional<int> k;
};

int RunEvaluate(const EvalArgs& a) {
  fvs::TrainConfig cfg;
  std::optional<fvs::Network<float>> net;
  fvs::Provenance prov;
  if (a.method == "model" || !a.sweep.empty()) {
    if (a.weights.empty()) fvs::Fail(fvs::ErrorCode::kUsageError, "--weights is required for the model method");
    cfg = LoadRunConfig(a.weights, a.config);
    net.emplace(cfg.model, cfg.seed);
    fvs::LoadWeights(*net, a.weights);
    prov = {a.weights, FileHash(a.weights), cfg.model.Hash()};
  } else if (!a.config.empty()) {
    cfg = fvs::TrainConfig::FromJson(ReadJsonFile(a.config));
  }
  const int factor = cfg.downsample_factor;
  const auto bundle = fvs::ReadSceneBundle(a.scene);
  const auto scene = fvs::PrepareScene(bundle, factor);
  const int k = a.k.value_or(7);

  if (!a.sweep.empty()) {
    std::vector<int> ks;
    std::stringstream ss(a.sweep);
    for (std::string item; std::getline(ss, item, ',');) ks.push_back(std::stoi(item));
    const auto rows = fvs::SweepNViews(scene, *net, ks, Threads());
    json j = json::array();
    for (const auto& r : rows) {
      j.push_back({{"k", r.k}, {"scored", r.scored}, {"mean_psnr", r.mean_psnr}, {"mean_ssim", r.mean_ssim}});
      char buf[128];
      std::snprintf(buf, sizeof(buf), "k %2d  psnr %8.4f  ssim %6.4f  (%zu views)", r.k, r.mean_psnr, r.mean_ssim,
                    r.scored);
      Event("sweep", j.back(), buf);
    }
    if (!a.out.empty())
      WriteJsonFile({{"sweep", j},
                     {"provenance",
                      {{"weights_path", prov.weights_path},
                       {"weights_hash", Hex(prov.weights_hash)},
                       {"config_hash", Hex(prov.config_hash)}}}},
                    a.out);
    return 0;
  }

  fvs::TargetRenderer render;
  if (a.method == "model") {
    render = fvs::NetworkRenderer(scene, *net, k);
  } else if (a.method == "baseline") {
    render = fvs::MeanWarpRenderer(scene, k);
  } else if (a.method == "oracle") {
    const fs::path exact = fs::path(a.scene) / "exact_mesh.ply";
    static fvs::TriangleMesh mesh;
    mesh = fs::exists(exact) ? fvs::ReadPlyMesh(exact) : bundle.mesh;
    std::array<std::uint8_t, 3> bg{64, 64, 64};
    const fs::path spec = fs::path(a.scene) / "spec.json";
    if (fs::exists(spec)) bg = fvs::SyntheticSpec::FromJson(ReadJsonFile(spec)).background;
    render = fvs::OracleRenderer(mesh, factor, bg);
  } else {
    fvs::Fail(fvs::ErrorCode::kUsageError, "unknown method " + a.method);
  }

  fvs::EvalReport report;
  if (a.protocol == "loo") {
    report = fvs::EvalLeaveOneOut(scene, render, Threads());
  } else if (a.protocol == "seq") {
    const fs::path traj_path = a.poses.empty() ? fs::path(a.scene) / "trajectory.json" : fs::path(a.poses);
    const auto traj = fvs::ReadTrajectory(traj_path);
    std::vector<fvs::TargetView> targets;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (!traj[i].image)
        fvs::Fail(fvs::ErrorCode::kUsageError, "trajectory entry " + std::to_string(i) + " has no reference image");
      const fvs::ImageRGB8 truth = fvs::ReadImage(traj_path.parent_path() / *traj[i].image);
      targets.push_back({int(i), *traj[i].image, traj[i].camera.Scaled(factor), traj[i].pose,
                         fvs::ToFloat(fvs::Downsample(truth, factor))});
    }
    report = fvs::EvalWithheldSequence(targets, render, Threads());
  } else {
    fvs::Fail(fvs::ErrorCode::kUsageError, "protocol must be loo or seq");
  }
  report.k = k;
  report.method = a.method;
  report.provenance = prov;
  if (g.json_events) {
    Event("report", report.ToJson(), "");
  } else {
    std::cout << report.ToTable();
  }
  if (!a.out.empty()) WriteJsonFile(report.ToJson(), a.out);
  return 0;
}

struct SynthArgs {
  std::string spec, out;
  std::optional<double> deletion_rate;
  std::optional<std::uint64_t> seed;
};

int RunSynth(const SynthArgs& a) {
  json j = a.spec.empty() ? json::object() : ReadJsonFile(a.spec);
  if (a.deletion_rate) j["deletion_rate"] = *a.deletion_rate;
  if (a.seed) j["seed"] = *a.seed;
  const auto spec = fvs::SyntheticSpec::FromJson(j);
  const auto scene = fvs::GenerateSyntheticScene(spec);
  fvs::WriteSyntheticScene(scene, a.out);
  Event("synth-scene", {{"views", scene.bundle.images.size()}, {"faces", scene.bundle.mesh.faces.size()}, {"out", a.out}},
        "synthetic scene with " + std::to_string(scene.bundle.images.size()) + " views -> " + a.out);
  return 0;
}

int ExitCodeFor(fvs::ErrorCode code) {
  switch (code) {
    case fvs::ErrorCode::kContractViolation:
    case fvs::ErrorCode::kNonFiniteGradient:
    case fvs::ErrorCode::kInvalidDepth:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-view synthesis pipeline: scene ingestion, proxy depth, source selection, warping, "
               "training, rendering and evaluation.", "fvs"};
  app.require_subcommand(1);
  app.add_flag("--json", g.json_events, "Emit machine-readable JSON event lines on stdout");
  app.add_option("--threads", g.threads, "Worker threads (default: FVS_THREADS, else available parallelism)")
      ->check(CLI::PositiveNumber);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Import a COLMAP reconstruction and proxy mesh into a scene directory");
  c_ingest->add_option("colmap_dir", ingest.colmap_dir, "Directory with cameras/images/points3D (.bin or .txt)")
      ->required();
  c_ingest->add_option("mesh", ingest.mesh, "Proxy mesh (PLY)")->required();
  c_ingest->add_option("--images", ingest.images, "Image directory (default: <colmap_dir>/images)");
  c_ingest->add_option("-o,--out", ingest.out, "Output scene directory")->required();

  auto add_pose = [](CLI::App* cmd, PoseArgs& p, bool with_out) {
    cmd->add_option("scene", p.scene, "Scene directory")->required();
    cmd->add_option("--pose", p.pose, "Target: 0-based image index or trajectory JSON file")->required();
    cmd->add_option("--entry", p.entry, "Trajectory entry used when --pose is a file")->capture_default_str();
    cmd->add_option("--factor", p.factor, "Downsample factor applied to all cameras")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    if (with_out) cmd->add_option("-o,--out", p.out, "Output file")->required();
  };

  PoseArgs depth;
  auto* c_depth = app.add_subcommand("depth", "Render the proxy depth map of a target pose to PFM");
  add_pose(c_depth, depth, true);

  SelectArgs select;
  auto* c_select = app.add_subcommand("select", "Rank source views for a target pose (JSON lines)");
  add_pose(c_select, select.pose, false);
  c_select->add_option("-k", select.k, "Number of sources to choose")->capture_default_str()->check(CLI::PositiveNumber);
  c_select->add_flag("--exclude-self", select.exclude_self, "Exclude the target image when --pose is an index");

  WarpArgs warp;
  auto* c_warp = app.add_subcommand("warp", "Warp one source image into a target pose (PPM)");
  add_pose(c_warp, warp.pose, true);
  c_warp->add_option("--src", warp.src, "Source image id")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train encoder and blender on one or more scenes");
  c_train->add_option("scenes", train.scenes, "Scene directories")->required();
  c_train->add_option("--config", train.config, "Training config JSON (defaults fill unspecified fields)");
  c_train->add_option("-o,--out", train.out, "Run directory")->required();
  c_train->add_option("--iterations", train.iterations, "Override the configured iteration count");
  c_train->add_option("--seed", train.seed, "Override the configured seed");
  c_train->add_flag("--resume", train.resume, "Continue from the latest checkpoint in the run directory");

  RenderArgs render;
  auto* c_render = app.add_subcommand("render", "Synthesize frames along a trajectory");
  c_render->add_option("scene", render.scene, "Scene directory")->required();
  c_render->add_option("--weights", render.weights, "Weights file (FVSW)")->required();
  c_render->add_option("--poses", render.poses, "Trajectory JSON")->required();
  c_render->add_option("-o,--out", render.out, "Output frame directory")->required();
  c_render->add_option("--config", render.config, "Run config (default: config.json next to the weights)");
  c_render->add_option("-k", render.k, "Number of source views (default 7)")->check(CLI::PositiveNumber);
  c_render->add_flag("--direct", render.direct, "Re-encode sources per frame instead of caching features");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score synthesized views with PSNR and SSIM");
  c_eval->add_option("scene", eval.scene, "Scene directory")->required();
  c_eval->add_option("--weights", eval.weights, "Weights file (FVSW), required for --method model");
  c_eval->add_option("--protocol", eval.protocol, "loo (leave-one-out) or seq (withheld sequence)")
      ->capture_default_str()
      ->check(CLI::IsMember({"loo", "seq"}));
  c_eval->add_option("--poses", eval.poses, "Trajectory JSON for seq (default: <scene>/trajectory.json)");
  c_eval->add_option("--method", eval.method, "model, baseline (mean warped colors) or oracle (exact mesh)")
      ->capture_default_str()
      ->check(CLI::IsMember({"model", "baseline", "oracle"}));
  c_eval->add_option("--config", eval.config, "Run config (default: config.json next to the weights)");
  c_eval->add_option("-k", eval.k, "Number of source views (default 7)")->check(CLI::PositiveNumber);
  c_eval->add_option("--sweep", eval.sweep, "Comma-separated ascending k list; runs leave-one-out per k");
  c_eval->add_option("-o,--out", eval.out, "Write the JSON report here");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-scene", "Generate a synthetic scene with ground-truth renders");
  c_synth->add_option("--spec", synth.spec, "Scene spec JSON (defaults fill unspecified fields)");
  c_synth->add_option("-o,--out", synth.out, "Output scene directory")->required();
  c_synth->add_option("--deletion-rate", synth.deletion_rate, "Override the proxy triangle deletion rate");
  c_synth->add_option("--seed", synth.seed, "Override the spec seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*c_ingest) return RunIngest(ingest);
    if (*c_depth) return RunDepth(depth);
    if (*c_select) return RunSelect(select);
    if (*c_warp) return RunWarp(warp);
    if (*c_train) return RunTrain(train);
    if (*c_render) return RunRender(render);
    if (*c_eval) return RunEvaluate(eval);
    if (*c_synth) return RunSynth(synth);
  } catch (const fvs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [IoError]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
