#include <gtest/gtest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "fvs/model.hpp"
#include "fvs/pipeline.hpp"
#include "fvs/training.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fvs;
using testutil::CodeOf;
using ad::Tensor64;

namespace {

void ZeroWhere(ParameterStore<double>& store, const std::string& prefix) {
  for (std::size_t i = 0; i < store.size(); ++i)
    if (store.names()[i].rfind(prefix, 0) == 0)
      for (auto& v : store.tensors()[i].mutable_data()) v = 0;
}

WarpedInput<double> RandomInput(std::mt19937_64& rng, int f, int h, int w, double lo = 0, double hi = 1) {
  WarpedInput<double> in;
  in.features = oracle::RandomTensor({f, h, w}, rng, lo, hi);
  std::bernoulli_distribution b(0.8);
  std::vector<double> m1(std::size_t(h) * w), m2(std::size_t(h) * w);
  for (auto& v : m1) v = b(rng);
  for (auto& v : m2) v = b(rng);
  in.boundary_mask = Tensor64::FromData({1, h, w}, m1);
  in.infdepth_mask = Tensor64::FromData({1, h, w}, m2);
  return in;
}

GruParams<double> RandomGru(std::mt19937_64& rng, int hidden, int input) {
  GruParams<double> g;
  g.hidden_channels = hidden;
  g.gates.weight = oracle::RandomTensor({2 * hidden, hidden + input, 3, 3}, rng, -0.5, 0.5);
  g.gates.bias = oracle::RandomTensor({2 * hidden}, rng, -0.5, 0.5);
  g.candidate.weight = oracle::RandomTensor({hidden, hidden + input, 3, 3}, rng, -0.5, 0.5);
  g.candidate.bias = oracle::RandomTensor({hidden}, rng, -0.5, 0.5);
  return g;
}

}  // namespace

TEST(ModelConfig, ValidateAndJson) {
  ModelConfig c;
  EXPECT_NO_THROW(c.Validate());
  EXPECT_EQ(ModelConfig::FromJson(c.ToJson()).Hash(), c.Hash());
  ModelConfig d = c;
  d.encoder.stage_channels = {16, 8, 32};
  EXPECT_EQ(CodeOf([&] { d.Validate(); }), ErrorCode::kContractViolation);
  d = c;
  d.encoder.stage_channels[0] = 0;
  EXPECT_EQ(CodeOf([&] { d.Validate(); }), ErrorCode::kContractViolation);
  d = c;
  d.blender.head_channels = 5;
  EXPECT_EQ(CodeOf([&] { d.Validate(); }), ErrorCode::kContractViolation);
  d = c;
  d.encoder.output_channels = 9;
  EXPECT_NE(d.Hash(), c.Hash());
  EXPECT_EQ(c.blender_input_channels(), c.encoder.output_channels + 2);
}

TEST(Encoder, OutputShapeForAnySize) {
  const Network<float> net(ModelConfig{}, 1);
  for (auto [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {5, 7}, {16, 12}, {1, 1}, {13, 4}}) {
    const auto out = net.Encode(ad::Tensor::Full({3, h, w}, 0.3f));
    EXPECT_EQ(out.shape(), (ad::Shape{8, h, w}));
  }
  EXPECT_EQ(CodeOf([&] { net.Encode(ad::Tensor::Zeros({4, 8, 8})); }), ErrorCode::kShapeError);
}

TEST(Encoder, ZeroWeightsGiveZeroOutput) {
  Network<double> net(ModelConfig{}, 2);
  ZeroWhere(net.parameters(), "encoder.");
  std::mt19937_64 rng(1);
  const auto out = net.Encode(oracle::RandomTensor({3, 8, 12}, rng, 0, 1));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, GradientCheck) {
  Network<double> net(ModelConfig{}, 3);
  std::mt19937_64 rng(2);
  const auto u = oracle::RandomTensor({8, 8, 8}, rng);
  std::vector<Tensor64> in{oracle::RandomTensor({3, 8, 8}, rng, 0, 1)};
  for (const char* name : {"encoder.down0.0.bias", "encoder.down2.1.bias", "encoder.up1.1.bias"})
    in.push_back(*net.parameters().Find(name));
  const double err = oracle::GradCheck(in, [&](auto& v) { return ad::Sum(ad::Mul(net.Encode(v[0]), u)); }, 1e-5);
  EXPECT_LT(err, 1e-4);
}

TEST(ConvGru, ZeroWeightsHalveHidden) {
  std::mt19937_64 rng(3);
  GruParams<double> g = RandomGru(rng, 3, 2);
  for (auto* t : {&g.gates.weight, &g.gates.bias, &g.candidate.weight, &g.candidate.bias})
    for (auto& v : t->mutable_data()) v = 0;
  const auto h = oracle::RandomTensor({3, 5, 6}, rng);
  const auto out = ConvGruCell(g, h, oracle::RandomTensor({2, 5, 6}, rng));
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(out.data()[i], 0.5 * h.data()[i]);
}

TEST(ConvGru, StaysInsideUnitInterval) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const GruParams<double> g = RandomGru(rng, 4, 3);
    const auto h = oracle::RandomTensor({4, 6, 6}, rng, -0.999, 0.999);
    const auto out = ConvGruCell(g, h, oracle::RandomTensor({3, 6, 6}, rng, -2, 2));
    EXPECT_EQ(out.shape(), h.shape());
    for (double v : out.data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
    // Saturating inputs round tanh to ±1 but never beyond.
    const auto sat = ConvGruCell(g, h, oracle::RandomTensor({3, 6, 6}, rng, -1e3, 1e3));
    for (double v : sat.data()) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const GruParams<double> g = RandomGru(rng, 4, 3);
  EXPECT_EQ(CodeOf([&] { ConvGruCell(g, Tensor64::Zeros({4, 6, 6}), Tensor64::Zeros({3, 5, 6})); }),
            ErrorCode::kShapeError);
}

TEST(ConvGru, GradientCheck) {
  std::mt19937_64 rng(5);
  const GruParams<double> g = RandomGru(rng, 3, 2);
  const auto u = oracle::RandomTensor({3, 5, 5}, rng);
  std::vector<Tensor64> in{oracle::RandomTensor({3, 5, 5}, rng), oracle::RandomTensor({2, 5, 5}, rng),
                           g.gates.weight, g.candidate.bias};
  const double err = oracle::GradCheck(in, [&](auto& v) {
    return ad::Sum(ad::Mul(ConvGruCell(g, v[0], v[1]), u));
  }, 1e-5);
  EXPECT_LT(err, 1e-4);
}

TEST(Blend, SingleSourceIsItsColor) {
  const Network<double> net(ModelConfig{}, 6);
  std::mt19937_64 rng(6);
  const auto r = net.Blend({RandomInput(rng, 8, 6, 10)});
  ASSERT_EQ(r.colors.size(), 1u);
  EXPECT_EQ(r.composite.shape(), (ad::Shape{3, 6, 10}));
  for (std::size_t i = 0; i < r.composite.numel(); ++i) EXPECT_EQ(r.composite.data()[i], r.colors[0].data()[i]);
  for (double w : r.weights[0].data()) EXPECT_EQ(w, 1.0);
}

TEST(Blend, CompositeIsConvexCombination) {
  const Network<double> net(ModelConfig{}, 7);
  std::mt19937_64 rng(7);
  for (int k : {2, 3, 5}) {
    std::vector<WarpedInput<double>> in;
    for (int i = 0; i < k; ++i) in.push_back(RandomInput(rng, 8, 8, 8));
    const auto r = net.Blend(in);
    ASSERT_EQ(r.confidences.size(), std::size_t(k));
    for (std::size_t p = 0; p < r.composite.numel(); ++p) {
      double lo = 1e300, hi = -1e300;
      for (const auto& c : r.colors) {
        lo = std::min(lo, c.data()[p]);
        hi = std::max(hi, c.data()[p]);
        EXPECT_GE(c.data()[p], 0.0);
        EXPECT_LE(c.data()[p], 1.0);
      }
      EXPECT_GE(r.composite.data()[p], lo - 1e-12);
      EXPECT_LE(r.composite.data()[p], hi + 1e-12);
    }
    for (std::size_t p = 0; p < 64; ++p) {
      double s = 0;
      for (const auto& w : r.weights) s += w.data()[p];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(CodeOf([&] { net.Blend({}); }), ErrorCode::kEmptyInput);
  HiddenState<double> state;
  EXPECT_EQ(CodeOf([&] { net.BlendStep(Tensor64::Zeros({9, 8, 8}), state); }), ErrorCode::kShapeError);
}

TEST(Blend, ZeroedRecurrenceIsPermutationInvariant) {
  Network<double> net(ModelConfig{}, 8);
  std::mt19937_64 rng(8);
  std::vector<WarpedInput<double>> in;
  for (int i = 0; i < 3; ++i) in.push_back(RandomInput(rng, 8, 8, 12));
  const std::vector<WarpedInput<double>> rev{in[2], in[1], in[0]};
  // Trained recurrence is order-sensitive.
  const auto a = net.Blend(in), b = net.Blend(rev);
  double diff = 0;
  for (std::size_t p = 0; p < a.composite.numel(); ++p)
    diff = std::max(diff, std::abs(a.composite.data()[p] - b.composite.data()[p]));
  EXPECT_GT(diff, 1e-9);
  net.ZeroRecurrentUnits();
  const auto za = net.Blend(in), zb = net.Blend(rev);
  for (std::size_t p = 0; p < za.composite.numel(); ++p) EXPECT_EQ(za.composite.data()[p], zb.composite.data()[p]);
}

TEST(Blend, ExtremeInputsStayFinite) {
  const Network<float> net(ModelConfig{}, 9);
  std::mt19937_64 rng(9);
  std::vector<WarpedInput<float>> in;
  for (int i = 0; i < 4; ++i) {
    WarpedInput<float> w;
    w.features = ad::Tensor::Zeros({8, 8, 8});
    std::uniform_int_distribution<int> s(0, 1);
    for (auto& v : w.features.mutable_data()) v = s(rng) ? 1e3f : -1e3f;
    w.boundary_mask = ad::Tensor::Full({1, 8, 8}, 1.f);
    w.infdepth_mask = ad::Tensor::Full({1, 8, 8}, 0.f);
    in.push_back(w);
  }
  HiddenState<float> state;
  for (const auto& w : in) {
    net.BlendStep(ad::ConcatChannels<float>({w.features, w.boundary_mask, w.infdepth_mask}), state);
    for (const auto& h : state.sites)
      for (float v : h.data()) ASSERT_TRUE(std::isfinite(v));
  }
  const auto r = net.Blend(in);
  for (float v : r.composite.data()) EXPECT_TRUE(std::isfinite(v));
  for (const auto& c : r.confidences)
    for (float v : c.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Network, EndToEndGradientCheck) {
  // Two 8×8 sources encoded, warped into an 8×8 target and blended.
  Network<double> net(ModelConfig{}, 10);
  gen::Rng grng(11);
  const auto cam = CameraIntrinsics::FromParams(CameraModel::kPinhole, 8, 8, {8, 8, 4, 4});
  const Pose target = Pose::LookAt({0, 0, -3}, {0, 0, 0}, {0, 1, 0});
  DepthMap depth(8, 8);
  for (std::size_t i = 0; i < depth.depth.size(); ++i) {
    depth.depth[i] = float(gen::Uniform(grng, 2.5, 3.5));
    depth.valid[i] = i % 7 != 0;
  }
  std::vector<std::shared_ptr<const WarpPlan>> plans;
  for (double dx : {0.3, -0.4})
    plans.push_back(std::make_shared<const WarpPlan>(
        PlanWarp(cam, Pose::LookAt({dx, 0.1, -3}, {0, 0, 0}, {0, 1, 0}), cam, target, depth)));
  std::mt19937_64 rng(12);
  const auto u = oracle::RandomTensor({3, 8, 8}, rng);
  std::vector<Tensor64> in{oracle::RandomTensor({3, 8, 8}, rng, 0, 1), oracle::RandomTensor({3, 8, 8}, rng, 0, 1)};
  for (const char* name : {"encoder.down0.0.bias", "blender.down1.gru.candidate.bias", "blender.head.bias",
                           "blender.up0.gru.gates.bias"})
    in.push_back(*net.parameters().Find(name));
  const double err = oracle::GradCheck(in, [&](auto& v) {
    std::vector<WarpedInput<double>> src;
    for (int k = 0; k < 2; ++k) src.push_back(WarpSource<double>(net.Encode(v[k]), plans[k]));
    return ad::Sum(ad::Mul(net.Blend(src).composite, u));
  }, 1e-5);
  EXPECT_LT(err, 1e-3);
}

TEST(Network, SeedDeterminesWeights) {
  const Network<float> a(ModelConfig{}, 42), b(ModelConfig{}, 42), c(ModelConfig{}, 43);
  EXPECT_EQ(a.parameters().ValueHash(), b.parameters().ValueHash());
  EXPECT_NE(a.parameters().ValueHash(), c.parameters().ValueHash());
  // Kaiming bounds and zero biases.
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto& t = a.parameters().tensors()[i];
    if (t.rank() == 1) {
      for (float v : t.data()) EXPECT_EQ(v, 0.f);
    } else {
      const double bound = std::sqrt(6.0 / double(t.dim(1) * t.dim(2) * t.dim(3)));
      for (float v : t.data()) EXPECT_LE(std::abs(v), bound);
    }
  }
}

TEST(Synthesis, PrecomputedAndDirectPathsAgree) {
  const fixture::SmallScene s;
  const Network<float> net(ModelConfig{}, 13);
  ViewSynthesizer cached(s.prepared, net, {3, true, 1});
  ViewSynthesizer direct(s.prepared, net, {3, false, 1});
  for (const auto& v : {s.prepared.views[0], s.prepared.views[3]}) {
    const auto a = cached.Synthesize(v.camera, v.pose, {v.image_id});
    const auto b = direct.Synthesize(v.camera, v.pose, {v.image_id});
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.selection.chosen, b.selection.chosen);
    EXPECT_EQ(a.image.width, v.camera.width);
    EXPECT_EQ(a.image.height, v.camera.height);
    EXPECT_EQ(cached.Synthesize(v.camera, v.pose, {v.image_id}).image, a.image);
  }
  EXPECT_TRUE(cached.has_precomputed());
  EXPECT_FALSE(direct.has_precomputed());
}

TEST(Synthesis, EmptyOverlapPropagates) {
  const fixture::SmallScene s;
  const Network<float> net(ModelConfig{}, 14);
  ViewSynthesizer syn(s.prepared, net, {2, true, 1});
  const auto& v = s.prepared.views[0];
  const Pose away = Pose::LookAt({0, 0, 10}, {0, 0, 20}, {0, 1, 0});
  EXPECT_EQ(CodeOf([&] { syn.Synthesize(v.camera, away); }), ErrorCode::kEmptyOverlap);
}

TEST(Weights, RoundTripAndConfigHashMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "fvs_model_weights";
  std::filesystem::create_directories(dir);
  const Network<float> a(ModelConfig{}, 15);
  SaveWeights(a, dir / "w.fvsw");
  Network<float> b(ModelConfig{}, 16);
  LoadWeights(b, dir / "w.fvsw");
  EXPECT_EQ(a.parameters().ValueHash(), b.parameters().ValueHash());
  ModelConfig other;
  other.blender.stage_channels = {4, 8, 8};
  Network<float> c(other, 15);
  EXPECT_EQ(CodeOf([&] { LoadWeights(c, dir / "w.fvsw"); }), ErrorCode::kShapeError);
  // Strict loading into a store with different shapes.
  EXPECT_EQ(CodeOf([&] { c.parameters().Load(a.parameters().ToArchive(0)); }), ErrorCode::kShapeError);
  std::filesystem::remove_all(dir);
}
