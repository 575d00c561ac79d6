#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fvs/model.hpp"
#include "fvs/rasterizer.hpp"
#include "fvs/scene_io.hpp"
#include "fvs/selection.hpp"
#include "fvs/warping.hpp"

namespace fvs {

// One calibrated view at working resolution with its proxy depth.
struct PreparedView {
  int image_id = 0;
  std::string name;
  CameraIntrinsics camera;
  Pose pose;
  ImageF image;  // 3×H×W in [0,1]
  DepthMap depth;
};

struct PreparedScene {
  std::vector<PreparedView> views;  // ascending image_id
  TriangleMesh mesh;
  RasterOptions raster;

  const PreparedView& view(int image_id) const;
  std::vector<SourceView> Candidates() const;
  DepthMap RenderTargetDepth(const CameraIntrinsics& camera, const Pose& pose) const;
};

// Downsamples every image by `factor` (box filter), scales intrinsics to
// match and renders each view's proxy depth. Images must carry pixels.
PreparedScene PrepareScene(const SceneBundle& bundle, int factor, const RasterOptions& raster = {});

// Float tensor 3×H×W from a planar image.
template <typename T>
TensorT<T> ImageTensor(const ImageF& image);
ImageF TensorImage(const ad::Tensor& tensor);

// Warped blender input for one source (features already encoded).
template <typename T>
WarpedInput<T> WarpSource(const TensorT<T>& features, std::shared_ptr<const WarpPlan> plan);

struct SynthesisOptions {
  int k = 7;
  bool precompute_features = true;
  int threads = 1;
};

struct Synthesis {
  ImageF image;
  SelectionResult selection;
  DepthMap target_depth;
};

// Inference pipeline: render D_t, select sources, encode (or look up cached
// features), warp, blend.
class ViewSynthesizer {
 public:
  ViewSynthesizer(const PreparedScene& scene, const Network<float>& network, SynthesisOptions options);

  // Encodes each source view once. Called lazily by Synthesize when the
  // precompute path is enabled; calling it up front makes Synthesize reentrant.
  void PrecomputeFeatures();
  bool has_precomputed() const { return !cache_.empty(); }

  Synthesis Synthesize(const CameraIntrinsics& camera, const Pose& pose,
                       const std::set<int>& exclude = {});
  // Variant reusing a known target depth (must match the camera).
  Synthesis SynthesizeWithDepth(const CameraIntrinsics& camera, const Pose& pose, DepthMap target_depth,
                                const std::set<int>& exclude = {});

  const SynthesisOptions& options() const { return options_; }
  void set_k(int k);

 private:
  ad::Tensor Features(int image_id) const;

  const PreparedScene& scene_;
  const Network<float>& network_;
  SynthesisOptions options_;
  std::map<int, ad::Tensor> cache_;
};

}  // namespace fvs
