#include "fvs/pipeline.hpp"

#include <algorithm>

#include "fvs/error.hpp"

namespace fvs {

const PreparedView& PreparedScene::view(int image_id) const {
  auto it = std::lower_bound(views.begin(), views.end(), image_id,
                             [](const PreparedView& v, int id) { return v.image_id < id; });
  if (it == views.end() || it->image_id != image_id)
    Fail(ErrorCode::kMissingReference, "no image with id " + std::to_string(image_id));
  return *it;
}

std::vector<SourceView> PreparedScene::Candidates() const {
  std::vector<SourceView> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back({v.image_id, v.camera, v.pose, &v.depth});
  return out;
}

DepthMap PreparedScene::RenderTargetDepth(const CameraIntrinsics& camera, const Pose& pose) const {
  return RenderDepth(mesh, camera, pose, raster);
}

PreparedScene PrepareScene(const SceneBundle& bundle, int factor, const RasterOptions& raster) {
  if (factor < 1) Fail(ErrorCode::kContractViolation, "downsample factor must be >= 1");
  if (bundle.images.empty()) Fail(ErrorCode::kEmptyInput, "scene has no images");
  PreparedScene scene;
  scene.mesh = bundle.mesh;
  scene.raster = raster;
  for (const auto& rec : bundle.images) {
    if (rec.pixels.pixels.empty())
      Fail(ErrorCode::kContractViolation, "image " + rec.name + " has no pixels loaded");
    PreparedView v;
    v.image_id = rec.image_id;
    v.name = rec.name;
    v.camera = bundle.camera_of(rec).Scaled(factor);
    v.pose = rec.pose;
    const ImageRGB8 small = Downsample(rec.pixels, factor);
    if (small.width != v.camera.width || small.height != v.camera.height)
      Fail(ErrorCode::kShapeError, "image " + rec.name + " does not match its camera");
    v.image = ToFloat(small);
    v.depth = RenderDepth(bundle.mesh, v.camera, v.pose, raster);
    scene.views.push_back(std::move(v));
  }
  std::sort(scene.views.begin(), scene.views.end(),
            [](const PreparedView& a, const PreparedView& b) { return a.image_id < b.image_id; });
  return scene;
}

template <typename T>
TensorT<T> ImageTensor(const ImageF& image) {
  std::vector<T> data(image.values.begin(), image.values.end());
  return TensorT<T>::FromData({image.channels, image.height, image.width}, std::move(data));
}

ImageF TensorImage(const ad::Tensor& tensor) {
  if (tensor.rank() != 3) Fail(ErrorCode::kShapeError, "image tensor must be C×H×W");
  ImageF out(int(tensor.dim(0)), int(tensor.dim(2)), int(tensor.dim(1)));
  const auto d = tensor.data();
  std::copy(d.begin(), d.end(), out.values.begin());
  return out;
}

template <typename T>
WarpedInput<T> WarpSource(const TensorT<T>& features, std::shared_ptr<const WarpPlan> plan) {
  const int h = plan->target_height, w = plan->target_width;
  WarpedInput<T> in;
  in.boundary_mask = MaskTensor<T>(plan->boundary_mask, h, w);
  in.infdepth_mask = MaskTensor<T>(plan->infdepth_mask, h, w);
  in.features = WarpFeatures(features, std::move(plan));
  return in;
}

template TensorT<float> ImageTensor<float>(const ImageF&);
template TensorT<double> ImageTensor<double>(const ImageF&);
template WarpedInput<float> WarpSource<float>(const TensorT<float>&, std::shared_ptr<const WarpPlan>);
template WarpedInput<double> WarpSource<double>(const TensorT<double>&, std::shared_ptr<const WarpPlan>);

ViewSynthesizer::ViewSynthesizer(const PreparedScene& scene, const Network<float>& network,
                                 SynthesisOptions options)
    : scene_(scene), network_(network), options_(options) {
  if (options_.k < 1) Fail(ErrorCode::kContractViolation, "k must be >= 1");
}

void ViewSynthesizer::set_k(int k) {
  if (k < 1) Fail(ErrorCode::kContractViolation, "k must be >= 1");
  options_.k = k;
}

void ViewSynthesizer::PrecomputeFeatures() {
  ad::NoGradGuard guard;
  for (const auto& v : scene_.views) {
    if (!cache_.count(v.image_id)) cache_.emplace(v.image_id, network_.Encode(ImageTensor<float>(v.image)));
  }
}

ad::Tensor ViewSynthesizer::Features(int image_id) const {
  auto it = cache_.find(image_id);
  if (it != cache_.end()) return it->second;
  return network_.Encode(ImageTensor<float>(scene_.view(image_id).image));
}

Synthesis ViewSynthesizer::Synthesize(const CameraIntrinsics& camera, const Pose& pose,
                                      const std::set<int>& exclude) {
  RasterOptions raster = scene_.raster;
  raster.threads = options_.threads;
  return SynthesizeWithDepth(camera, pose, RenderDepth(scene_.mesh, camera, pose, raster), exclude);
}

Synthesis ViewSynthesizer::SynthesizeWithDepth(const CameraIntrinsics& camera, const Pose& pose,
                                               DepthMap target_depth, const std::set<int>& exclude) {
  if (target_depth.width != camera.width || target_depth.height != camera.height)
    Fail(ErrorCode::kShapeError, "target depth does not match the target camera");
  if (options_.precompute_features && cache_.empty()) PrecomputeFeatures();
  ad::NoGradGuard guard;
  Synthesis out;
  out.selection = SelectSourceViews(scene_.Candidates(), camera, pose, target_depth, options_.k, exclude,
                                    options_.threads);
  std::vector<WarpedInput<float>> stack;
  for (int id : out.selection.chosen) {
    const PreparedView& src = scene_.view(id);
    auto plan = std::make_shared<const WarpPlan>(
        PlanWarp(src.camera, src.pose, camera, pose, target_depth, options_.threads));
    stack.push_back(WarpSource(Features(id), std::move(plan)));
  }
  out.image = TensorImage(network_.Blend(stack).composite);
  out.target_depth = std::move(target_depth);
  return out;
}

}  // namespace fvs
