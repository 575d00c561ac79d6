#pragma once

#include "fvs/pipeline.hpp"
#include "fvs/synthetic.hpp"

namespace fixture {

inline fvs::SyntheticSpec SmallSpec(int views = 6, int width = 48, int height = 32) {
  fvs::SyntheticSpec spec;
  spec.views = views;
  spec.width = width;
  spec.height = height;
  return spec;
}

// Synthetic cube prepared at working resolution.
struct SmallScene {
  fvs::SyntheticScene synthetic;
  fvs::PreparedScene prepared;

  explicit SmallScene(const fvs::SyntheticSpec& spec = SmallSpec(), int factor = 2)
      : synthetic(fvs::GenerateSyntheticScene(spec)), prepared(fvs::PrepareScene(synthetic.bundle, factor)) {}
};

}  // namespace fixture
