#include "fvs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fvs/error.hpp"
#include "fvs/parallel.hpp"

namespace fvs {

namespace {

void RequireSameShape(const ImageF& a, const ImageF& b) {
  if (a.channels != b.channels || a.width != b.width || a.height != b.height)
    Fail(ErrorCode::kShapeError, "images differ in shape: " + std::to_string(a.channels) + "×" +
                                     std::to_string(a.height) + "×" + std::to_string(a.width) + " vs " +
                                     std::to_string(b.channels) + "×" + std::to_string(b.height) + "×" +
                                     std::to_string(b.width));
}

std::vector<double> GaussianWindow() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  std::vector<double> g(kSize);
  double sum = 0;
  for (int i = 0; i < kSize; ++i) {
    const double d = i - kSize / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double CappedPsnr(const PsnrValue& p) { return p.identical ? kPsnrCap : std::min(p.db, kPsnrCap); }

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

EvalReport RunTargets(const std::vector<TargetView>& targets, const TargetRenderer& render,
                      const std::vector<std::set<int>>& excludes, int threads) {
  EvalReport report;
  report.rows.resize(targets.size());
  ParallelFor(0, int(targets.size()), threads, [&](int b, int e) {
    for (int i = b; i < e; ++i) {
      const auto& t = targets[i];
      EvalRow& row = report.rows[i];
      row.view_id = t.view_id;
      row.name = t.name;
      try {
        const ImageF out = render(t.camera, t.pose, excludes[i]);
        row.psnr = Psnr(out, t.truth);
        row.ssim = Ssim(out, t.truth);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kEmptyOverlap) throw;
        row.skipped = true;
        row.reason = err.what();
      }
    }
  });
  return report;
}

}  // namespace

PsnrValue Psnr(const ImageF& a, const ImageF& b) {
  RequireSameShape(a, b);
  if (a.values.empty()) Fail(ErrorCode::kShapeError, "empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = double(a.values[i]) - double(b.values[i]);
    sum += d * d;
  }
  const double mse = sum / double(a.values.size());
  if (mse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(1.0 / mse), false};
}

double Ssim(const ImageF& a, const ImageF& b) {
  RequireSameShape(a, b);
  constexpr int kSize = 11;
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  if (a.width < kSize || a.height < kSize)
    Fail(ErrorCode::kShapeError, "SSIM needs images of at least 11×11");
  static const std::vector<double> g = GaussianWindow();
  const int ow = a.width - kSize + 1, oh = a.height - kSize + 1;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double channel_sum = 0.0;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = 0; j < kSize; ++j) {
          for (int i = 0; i < kSize; ++i) {
            const double w = g[j] * g[i];
            const double va = a.at(c, x + i, y + j), vb = b.at(c, x + i, y + j);
            mx += w * va;
            my += w * vb;
            sxx += w * va * va;
            syy += w * vb * vb;
            sxy += w * (va * vb);
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        channel_sum += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      }
    }
    total += channel_sum / (double(ow) * oh);
  }
  return total / a.channels;
}

std::size_t EvalReport::scored() const {
  return std::size_t(std::count_if(rows.begin(), rows.end(), [](const EvalRow& r) { return !r.skipped; }));
}

double EvalReport::mean_psnr() const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (!r.skipped) s += CappedPsnr(r.psnr), ++n;
  return n ? s / double(n) : 0.0;
}

double EvalReport::median_psnr() const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(CappedPsnr(r.psnr));
  return Median(std::move(v));
}

double EvalReport::mean_ssim() const {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (!r.skipped) s += r.ssim, ++n;
  return n ? s / double(n) : 0.0;
}

double EvalReport::median_ssim() const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (!r.skipped) v.push_back(r.ssim);
  return Median(std::move(v));
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"view_id", r.view_id}, {"name", r.name}};
    if (r.skipped) {
      row["skipped"] = true;
      row["reason"] = r.reason;
    } else {
      row["psnr"] = r.psnr.identical ? nlohmann::json("identical") : nlohmann::json(r.psnr.db);
      row["ssim"] = r.ssim;
    }
    rows_json.push_back(std::move(row));
  }
  return {{"protocol", protocol},
          {"method", method},
          {"k", k},
          {"provenance",
           {{"weights_path", provenance.weights_path},
            {"weights_hash", Hex(provenance.weights_hash)},
            {"config_hash", Hex(provenance.config_hash)}}},
          {"rows", rows_json},
          {"aggregate",
           {{"scored", scored()},
            {"skipped", rows.size() - scored()},
            {"mean_psnr", mean_psnr()},
            {"median_psnr", median_psnr()},
            {"mean_ssim", mean_ssim()},
            {"median_ssim", median_ssim()}}}};
}

std::string EvalReport::ToTable() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "protocol %s  method %s  k %d  weights %s  config %s\n", protocol.c_str(),
                method.c_str(), k, Hex(provenance.weights_hash).c_str(), Hex(provenance.config_hash).c_str());
  out << line;
  std::snprintf(line, sizeof(line), "%8s  %-24s  %10s  %8s\n", "view", "name", "psnr_db", "ssim");
  out << line;
  for (const auto& r : rows) {
    if (r.skipped) {
      std::snprintf(line, sizeof(line), "%8d  %-24s  %10s  %8s  (%s)\n", r.view_id, r.name.c_str(), "skipped", "-",
                    r.reason.c_str());
    } else if (r.psnr.identical) {
      std::snprintf(line, sizeof(line), "%8d  %-24s  %10s  %8.4f\n", r.view_id, r.name.c_str(), "identical", r.ssim);
    } else {
      std::snprintf(line, sizeof(line), "%8d  %-24s  %10.4f  %8.4f\n", r.view_id, r.name.c_str(), r.psnr.db, r.ssim);
    }
    out << line;
  }
  std::snprintf(line, sizeof(line), "%8s  %-24s  %10.4f  %8.4f\n", "mean", "", mean_psnr(), mean_ssim());
  out << line;
  std::snprintf(line, sizeof(line), "%8s  %-24s  %10.4f  %8.4f\n", "median", "", median_psnr(), median_ssim());
  out << line;
  return out.str();
}

EvalReport EvalLeaveOneOut(const PreparedScene& scene, const TargetRenderer& render, int threads) {
  std::vector<TargetView> targets;
  std::vector<std::set<int>> excludes;
  for (const auto& v : scene.views) {
    targets.push_back({v.image_id, v.name, v.camera, v.pose, v.image});
    excludes.push_back({v.image_id});
  }
  EvalReport report = RunTargets(targets, render, excludes, threads);
  report.protocol = "loo";
  return report;
}

EvalReport EvalWithheldSequence(const std::vector<TargetView>& targets, const TargetRenderer& render,
                                int threads) {
  EvalReport report = RunTargets(targets, render, std::vector<std::set<int>>(targets.size()), threads);
  report.protocol = "seq";
  return report;
}

TargetRenderer NetworkRenderer(const PreparedScene& scene, const Network<float>& network, int k,
                               bool precompute) {
  auto synth = std::make_shared<ViewSynthesizer>(scene, network, SynthesisOptions{k, precompute, 1});
  if (precompute) synth->PrecomputeFeatures();
  return [synth](const CameraIntrinsics& camera, const Pose& pose, const std::set<int>& exclude) {
    return synth->Synthesize(camera, pose, exclude).image;
  };
}

TargetRenderer MeanWarpRenderer(const PreparedScene& scene, int k) {
  return [&scene, k](const CameraIntrinsics& camera, const Pose& pose, const std::set<int>& exclude) {
    const DepthMap depth = scene.RenderTargetDepth(camera, pose);
    const SelectionResult sel = SelectSourceViews(scene.Candidates(), camera, pose, depth, k, exclude);
    const std::size_t n = std::size_t(camera.width) * camera.height;
    std::vector<double> sum(3 * n, 0.0);
    std::vector<int> count(n, 0);
    std::vector<float> warped(3 * n);
    for (int id : sel.chosen) {
      const PreparedView& src = scene.view(id);
      const WarpPlan plan = PlanWarp(src.camera, src.pose, camera, pose, depth);
      GatherFeatures<float>(plan, 3, src.image.values, warped);
      for (std::size_t p = 0; p < n; ++p) {
        if (!plan.boundary_mask[p]) continue;
        ++count[p];
        for (int c = 0; c < 3; ++c) sum[c * n + p] += warped[c * n + p];
      }
    }
    ImageF out(3, camera.width, camera.height);
    for (std::size_t p = 0; p < n; ++p)
      for (int c = 0; c < 3; ++c)
        out.values[c * n + p] = count[p] ? float(sum[c * n + p] / count[p]) : 0.f;
    return out;
  };
}

TargetRenderer OracleRenderer(const TriangleMesh& mesh, int factor, std::array<std::uint8_t, 3> background) {
  return [&mesh, factor, background](const CameraIntrinsics& camera, const Pose& pose, const std::set<int>&) {
    CameraIntrinsics full = camera;
    full.width = camera.width * factor;
    full.height = camera.height * factor;
    full.fx = camera.fx * factor;
    full.fy = camera.fy * factor;
    full.cx = camera.cx * factor;
    full.cy = camera.cy * factor;
    return ToFloat(Downsample(RenderColor(mesh, full, pose, {}, background).image, factor));
  };
}

std::vector<SweepRow> SweepNViews(const PreparedScene& scene, const Network<float>& network,
                                  const std::vector<int>& k_list, int threads) {
  if (k_list.empty()) Fail(ErrorCode::kEmptyInput, "k list is empty");
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] < 1) Fail(ErrorCode::kContractViolation, "k must be >= 1");
    if (i && k_list[i] <= k_list[i - 1]) Fail(ErrorCode::kContractViolation, "k list must be ascending");
  }
  std::vector<SweepRow> rows;
  ViewSynthesizer base(scene, network, SynthesisOptions{k_list.front(), true, 1});
  base.PrecomputeFeatures();
  for (int k : k_list) {
    auto synth = std::make_shared<ViewSynthesizer>(base);
    synth->set_k(k);
    const TargetRenderer render = [synth](const CameraIntrinsics& camera, const Pose& pose,
                                          const std::set<int>& exclude) {
      return synth->Synthesize(camera, pose, exclude).image;
    };
    const EvalReport r = EvalLeaveOneOut(scene, render, threads);
    rows.push_back({k, r.scored(), r.mean_psnr(), r.mean_ssim()});
  }
  return rows;
}

std::vector<TrajectoryEntry> ReadTrajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoError, "cannot open trajectory " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformedFile, "trajectory " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) Fail(ErrorCode::kMalformedFile, "trajectory must be a JSON list");
  std::vector<TrajectoryEntry> out;
  for (const auto& e : j) {
    TrajectoryEntry t;
    try {
      t.qvec = e.at("qvec").get<std::array<double, 4>>();
      const auto tvec = e.at("tvec").get<std::array<double, 3>>();
      const double norm = std::sqrt(t.qvec[0] * t.qvec[0] + t.qvec[1] * t.qvec[1] + t.qvec[2] * t.qvec[2] +
                                    t.qvec[3] * t.qvec[3]);
      if (!(norm > 0) || std::abs(norm - 1.0) > 1e-6)
        Fail(ErrorCode::kMalformedFile, "trajectory quaternion is not unit length");
      std::array<double, 4> q = t.qvec;
      for (auto& v : q) v /= norm;
      t.pose.rotation = QuaternionToRotation(q);
      t.pose.translation = Eigen::Vector3d(tvec[0], tvec[1], tvec[2]);
      t.camera = CameraIntrinsics::FromParams(
          CameraModel::kPinhole, e.at("width").get<int>(), e.at("height").get<int>(),
          {e.at("fx").get<double>(), e.at("fy").get<double>(), e.at("cx").get<double>(), e.at("cy").get<double>()});
      if (e.contains("image")) t.image = e.at("image").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      Fail(ErrorCode::kMalformedFile, "trajectory entry " + std::to_string(out.size()) + ": " + ex.what());
    }
    t.camera.Validate();
    out.push_back(std::move(t));
  }
  return out;
}

void WriteTrajectory(const std::vector<TrajectoryEntry>& entries, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : entries) {
    nlohmann::json e = {{"qvec", t.qvec},
                        {"tvec", {t.pose.translation.x(), t.pose.translation.y(), t.pose.translation.z()}},
                        {"fx", t.camera.fx},
                        {"fy", t.camera.fy},
                        {"cx", t.camera.cx},
                        {"cy", t.camera.cy},
                        {"width", t.camera.width},
                        {"height", t.camera.height}};
    if (t.image) e["image"] = *t.image;
    j.push_back(std::move(e));
  }
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) Fail(ErrorCode::kIoError, "cannot write trajectory " + path.string());
}

}  // namespace fvs
