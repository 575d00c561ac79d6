#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fvs/ad/ops.hpp"
#include "fvs/ad/optim.hpp"
#include "fvs/ad/serialize.hpp"
#include "gradcheck_cases.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fvs;
using namespace fvs::ad;
using testutil::CodeOf;

namespace {

using gradcases::kTol;

double Check(std::vector<Tensor64> in, const std::function<Tensor64(std::vector<Tensor64>&)>& f) {
  return oracle::GradCheck(in, f, gradcases::kStep);
}

// Direct six-loop cross-correlation.
std::vector<double> NaiveConv(const Tensor64& x, const Tensor64& w, const Tensor64& b, int stride, int pad) {
  const auto ci = x.dim(0), h = x.dim(1), wd = x.dim(2), co = w.dim(0), k = w.dim(2);
  const auto ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(std::size_t(co * ho * wo), 0.0);
  for (std::int64_t o = 0; o < co; ++o)
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t xx = 0; xx < wo; ++xx) {
        double s = b.defined() ? b.data()[o] : 0.0;
        for (std::int64_t c = 0; c < ci; ++c)
          for (std::int64_t i = 0; i < k; ++i)
            for (std::int64_t j = 0; j < k; ++j) {
              const auto sy = y * stride + i - pad, sx = xx * stride + j - pad;
              if (sy < 0 || sx < 0 || sy >= h || sx >= wd) continue;
              s += w.data()[((o * ci + c) * k + i) * k + j] * x.data()[(c * h + sy) * wd + sx];
            }
        out[(o * ho + y) * wo + xx] = s;
      }
  return out;
}

}  // namespace

TEST(Tensor, ConstructionAndShapes) {
  const auto t = Tensor::Zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(CodeOf([] { Tensor::FromData({2, 2}, {1, 2, 3}); }), ErrorCode::kShapeError);
  EXPECT_EQ(CodeOf([] { Tensor::Zeros({-1}); }), ErrorCode::kShapeError);
  EXPECT_EQ(CodeOf([] { Tensor::Zeros({2}).item(); }), ErrorCode::kContractViolation);
  EXPECT_EQ(CodeOf([] { Backward(Tensor::Zeros({2}, true)); }), ErrorCode::kContractViolation);
}

TEST(Conv2d, IdentityKernelAndOnesKernel) {
  std::mt19937_64 rng(1);
  const auto x = oracle::RandomTensor({1, 5, 6}, rng);
  const auto id = Conv2d(x, Tensor64::FromData({1, 1, 1, 1}, {1.0}), Tensor64{});
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), id.data().begin()));
  const auto c = Tensor64::Full({1, 4, 5}, 0.5);
  const auto y = Conv2d(c, Tensor64::Full({1, 1, 3, 3}, 1.0), Tensor64{}, 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 5}));
  EXPECT_EQ(y.data()[0], 4 * 0.5);
  EXPECT_EQ(y.data()[4], 4 * 0.5);
  EXPECT_EQ(y.data()[1 * 5 + 2], 9 * 0.5);
  EXPECT_EQ(y.data()[1 * 5 + 0], 6 * 0.5);
}

TEST(Conv2d, MatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  for (int stride : {1, 2}) {
    for (int k : {1, 3}) {
      for (int pad : {0, k / 2}) {
        const auto x = oracle::RandomTensor({2, 5, 5}, rng);
        const auto w = oracle::RandomTensor({3, 2, k, k}, rng);
        const auto b = oracle::RandomTensor({3}, rng);
        const auto y = Conv2d(x, w, b, stride, pad);
        const auto o = NaiveConv(x, w, b, stride, pad);
        ASSERT_EQ(y.numel(), o.size());
        for (std::size_t i = 0; i < o.size(); ++i) EXPECT_NEAR(y.data()[i], o[i], 1e-6);
        // Float path agrees at float precision.
        const auto yf = Conv2d(Tensor::FromData(x.shape(), {x.data().begin(), x.data().end()}),
                               Tensor::FromData(w.shape(), {w.data().begin(), w.data().end()}),
                               Tensor::FromData(b.shape(), {b.data().begin(), b.data().end()}), stride, pad);
        for (std::size_t i = 0; i < o.size(); ++i) EXPECT_NEAR(yf.data()[i], o[i], 1e-5);
      }
    }
  }
}

TEST(Conv2d, ShapeErrors) {
  const auto x = Tensor::Zeros({2, 4, 4});
  EXPECT_EQ(CodeOf([&] { Conv2d(x, Tensor::Zeros({3, 3, 3, 3}), Tensor{}); }), ErrorCode::kShapeError);
  EXPECT_EQ(CodeOf([&] { Conv2d(x, Tensor::Zeros({3, 2, 5, 5}), Tensor{}); }), ErrorCode::kShapeError);
  EXPECT_EQ(CodeOf([&] { Conv2d(x, Tensor::Zeros({3, 2, 3, 3}), Tensor::Zeros({2})); }), ErrorCode::kShapeError);
}

TEST(Conv2d, LinearityAndTranslationEquivariance) {
  std::mt19937_64 rng(3);
  const auto w = oracle::RandomTensor({2, 2, 3, 3}, rng);
  const auto a = oracle::RandomTensor({2, 8, 8}, rng), b = oracle::RandomTensor({2, 8, 8}, rng);
  const auto mix = Add(Scale(a, 2.0), Scale(b, -0.5));
  const auto ya = Conv2d(a, w, Tensor64{}), yb = Conv2d(b, w, Tensor64{}), ym = Conv2d(mix, w, Tensor64{});
  for (std::size_t i = 0; i < ym.numel(); ++i) EXPECT_NEAR(ym.data()[i], 2 * ya.data()[i] - 0.5 * yb.data()[i], 1e-12);
  // Shift right by one pixel.
  std::vector<double> shifted(a.numel(), 0.0);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 1; x < 8; ++x) shifted[(c * 8 + y) * 8 + x] = a.data()[(c * 8 + y) * 8 + x - 1];
  const auto ys = Conv2d(Tensor64::FromData({2, 8, 8}, shifted), w, Tensor64{});
  for (int c = 0; c < 2; ++c)
    for (int y = 1; y < 7; ++y)
      for (int x = 2; x < 7; ++x)
        EXPECT_NEAR(ys.data()[(c * 8 + y) * 8 + x], ya.data()[(c * 8 + y) * 8 + x - 1], 1e-12);
}

TEST(Ops, PoolUpsampleSoftmaxExamples) {
  const auto p = AvgPool2(Tensor64::FromData({1, 2, 2}, {1, 3, 5, 7}));
  EXPECT_EQ(p.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(p.item(), 4.0);
  const auto c = Tensor64::Full({3, 4, 6}, 2.5);
  const auto r = UpsampleNearest2(AvgPool2(c));
  EXPECT_TRUE(std::equal(c.data().begin(), c.data().end(), r.data().begin()));
  EXPECT_EQ(CodeOf([] { AvgPool2(Tensor::Zeros({1, 3, 4})); }), ErrorCode::kShapeError);
  const auto w = SoftmaxSet<double>({Tensor64::Full({1, 1, 1}, 0.0), Tensor64::Full({1, 1, 1}, std::log(3.0))});
  EXPECT_NEAR(w[0].item(), 0.25, 1e-15);
  EXPECT_NEAR(w[1].item(), 0.75, 1e-15);
}

TEST(Ops, SoftmaxIsNormalizedAndStable) {
  std::mt19937_64 rng(4);
  std::vector<Tensor> logits;
  for (int k = 0; k < 5; ++k) {
    auto t = Tensor::Zeros({1, 4, 4});
    std::uniform_real_distribution<float> u(-1e3f, 1e3f);
    for (auto& v : t.mutable_data()) v = u(rng);
    logits.push_back(t);
  }
  const auto w = SoftmaxSet(logits);
  for (std::size_t i = 0; i < 16; ++i) {
    double s = 0;
    for (const auto& t : w) {
      EXPECT_TRUE(std::isfinite(t.data()[i]));
      EXPECT_GE(t.data()[i], 0.0f);
      EXPECT_LE(t.data()[i], 1.0f);
      s += t.data()[i];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  // Moderate logits stay strictly inside (0, 1).
  const auto m = SoftmaxSet<float>({Tensor::Full({1, 1, 1}, 3.f), Tensor::Full({1, 1, 1}, -2.f)});
  EXPECT_GT(m[1].item(), 0.f);
  EXPECT_LT(m[0].item(), 1.f);
}

TEST(Backward, ReluExampleAndAccumulation) {
  auto x = Tensor64::FromData({2}, {-1, 2}, true);
  Backward(Sum(Relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  // Leaf gradients accumulate across calls; fan-out adds.
  Backward(Sum(Add(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
  EXPECT_EQ(x.grad()[1], 3.0);
  // No graph is recorded under NoGradGuard.
  NoGradGuard guard;
  EXPECT_FALSE(Sum(x).requires_grad());
}

TEST(GradCheck, EveryOp) {
  for (auto& c : gradcases::EveryOp(5)) EXPECT_LT(gradcases::Run(c), kTol) << c.name;
}

TEST(GradCheck, TwoConvsAndSigmoid) {
  std::mt19937_64 rng(6);
  const auto u = oracle::RandomTensor({2, 3, 3}, rng);
  const double err = Check({oracle::RandomTensor({2, 6, 6}, rng), oracle::RandomTensor({4, 2, 3, 3}, rng),
                            oracle::RandomTensor({4}, rng), oracle::RandomTensor({2, 4, 3, 3}, rng),
                            oracle::RandomTensor({2}, rng)},
                           [&](auto& v) {
                             const auto h = Conv2d(v[0], v[1], v[2], 1, 1);
                             return Sum(Mul(Sigmoid(Conv2d(h, v[3], v[4], 2, 1)), u));
                           });
  EXPECT_LT(err, kTol);
}

TEST(GradCheck, RandomThreeOpChains) {
  for (auto& c : gradcases::RandomThreeOpChains(7, 40)) EXPECT_LT(gradcases::Run(c), kTol) << c.name;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState<float> st;
  EXPECT_EQ(st.config.lr, 1e-4);
  EXPECT_EQ(st.config.beta1, 0.9);
  EXPECT_EQ(st.config.beta2, 0.9999);
  EXPECT_EQ(st.config.eps, 1e-8);
  std::vector<Tensor> p{Tensor::Full({3}, 0.5f, true)};
  Backward(Sum(p[0]));
  AdamStep<float>(p, st);
  // Float storage rounds the update to the ulp of 0.5.
  for (float v : p[0].data()) EXPECT_NEAR(0.5 - v, 1e-4, 6e-8);
  EXPECT_EQ(st.step, 1);
  for (float v : st.v[0]) EXPECT_GE(v, 0.f);
  AdamState<double> sd;
  std::vector<Tensor64> q{Tensor64::Full({3}, 0.5, true)};
  Backward(Sum(q[0]));
  AdamStep<double>(q, sd);
  for (double v : q[0].data()) EXPECT_NEAR(0.5 - v, 1e-4, 1e-12);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState<double> st;
  std::vector<Tensor64> p{Tensor64::FromData({2}, {1.0, -2.0}, true)};
  p[0].node()->EnsureGrad();
  AdamStep<double>(p, st);
  EXPECT_EQ(p[0].data()[0], 1.0);
  EXPECT_EQ(p[0].data()[1], -2.0);
}

TEST(Adam, QuadraticConverges) {
  AdamState<double> st;
  st.config.lr = 1e-2;
  std::vector<Tensor64> p{Tensor64::FromData({1}, {1.0}, true)};
  for (int i = 0; i < 5000; ++i) {
    p[0].ZeroGrad();
    Backward(Sum(Mul(p[0], p[0])));
    AdamStep<double>(p, st);
  }
  EXPECT_LT(std::abs(p[0].data()[0]), 1e-3);
}

TEST(Adam, NonFiniteGradientNamesTensorAndLeavesValues) {
  AdamState<float> st;
  std::vector<Tensor> p{Tensor::Full({2}, 1.f, true), Tensor::Full({2}, 1.f, true)};
  p[0].node()->EnsureGrad();
  p[1].node()->EnsureGrad();
  p[0].node()->grad[0] = 1.f;
  p[1].node()->grad[1] = std::numeric_limits<float>::quiet_NaN();
  const std::vector<std::string> names{"a", "b"};
  try {
    AdamStep<float>(p, st, names);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteGradient);
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
  EXPECT_EQ(p[0].data()[0], 1.f);
}

TEST(Archive, RoundTripIsBitExact) {
  std::mt19937_64 rng(8);
  TensorArchive a;
  a.config_hash = 0x0123456789abcdefull;
  for (const Shape& s : std::vector<Shape>{{3}, {2, 3}, {4, 2, 3, 3}, {}}) {
    auto t = Tensor::Zeros(s);
    std::uniform_real_distribution<float> u(-10, 10);
    for (auto& v : t.mutable_data()) v = u(rng);
    a.tensors.push_back({"layer." + std::to_string(s.size()) + ".\xc3\xa9", t});
  }
  a.tensors[0].tensor.mutable_data()[0] = -0.0f;
  a.tensors[0].tensor.mutable_data()[1] = std::numeric_limits<float>::denorm_min();
  const auto bytes = EncodeArchive(a);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FVSW");
  const auto b = DecodeArchive(bytes);
  EXPECT_EQ(b.config_hash, a.config_hash);
  ASSERT_EQ(b.tensors.size(), a.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    EXPECT_EQ(b.tensors[i].name, a.tensors[i].name);
    EXPECT_EQ(b.tensors[i].tensor.shape(), a.tensors[i].tensor.shape());
    EXPECT_EQ(std::memcmp(b.tensors[i].tensor.data().data(), a.tensors[i].tensor.data().data(),
                          a.tensors[i].tensor.numel() * sizeof(float)),
              0);
  }
  EXPECT_EQ(EncodeArchive(b), bytes);
  const auto path = std::filesystem::temp_directory_path() / "fvs_archive_test.fvsw";
  SaveArchive(a, path);
  EXPECT_EQ(EncodeArchive(LoadArchive(path)), bytes);
  std::filesystem::remove(path);
  EXPECT_NE(b.find("layer.2.\xc3\xa9"), nullptr);
  EXPECT_EQ(b.find("missing"), nullptr);
}

TEST(Archive, MalformedInputs) {
  TensorArchive a;
  a.tensors.push_back({"w", Tensor::Full({2, 2}, 1.f)});
  const auto bytes = EncodeArchive(a);
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    EXPECT_EQ(CodeOf([&] { DecodeArchive(std::span(bytes.data(), cut)); }), ErrorCode::kMalformedFile) << cut;
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(CodeOf([&] { DecodeArchive(bad); }), ErrorCode::kMalformedFile);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(Fnv1a(std::string()), 0xcbf29ce484222325ull);
  EXPECT_EQ(Fnv1a(std::string("a")), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(Fnv1a(std::string("foobar")), 0x85944171f73967e8ull);
}

TEST(Ops, ReluPropagatesNan) {
  const auto y = Relu(Tensor::FromData({3}, {std::numeric_limits<float>::quiet_NaN(), -1.f, 2.f}));
  EXPECT_TRUE(std::isnan(y.data()[0]));
  EXPECT_EQ(y.data()[1], 0.f);
  EXPECT_EQ(y.data()[2], 2.f);
}

TEST(Conv2d, GradientsIndependentOfBufferAlignment) {
  // Identical values in buffers at varying heap offsets must give identical bits.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1, 1);
  for (const Shape& xs : std::vector<Shape>{{5, 7, 9}, {3, 1, 1}, {8, 4, 4}}) {
    std::vector<float> xv(std::size_t(NumElements(xs))), wv(std::size_t(4 * xs[0] * 9)), bv(4);
    for (auto& v : xv) v = u(rng);
    for (auto& v : wv) v = u(rng);
    for (auto& v : bv) v = u(rng);
    std::vector<std::vector<float>> first;
    std::vector<std::unique_ptr<char[]>> padding;
    for (int trial = 0; trial < 8; ++trial) {
      padding.emplace_back(new char[std::size_t(trial * 4 + 1)]);
      auto x = Tensor::FromData(xs, xv, true);
      padding.emplace_back(new char[std::size_t(trial * 12 + 3)]);
      auto w = Tensor::FromData({4, xs[0], 3, 3}, wv, true);
      auto b = Tensor::FromData({4}, bv, true);
      Backward(Sum(Mul(Conv2d(x, w, b, trial % 2 + 1), Conv2d(x, w, b, trial % 2 + 1))));
      std::vector<std::vector<float>> grads{{x.grad().begin(), x.grad().end()},
                                            {w.grad().begin(), w.grad().end()},
                                            {b.grad().begin(), b.grad().end()}};
      if (trial < 2) {
        first.insert(first.end(), grads.begin(), grads.end());
      } else {
        for (int g = 0; g < 3; ++g) EXPECT_EQ(grads[g], first[std::size_t((trial % 2) * 3 + g)]);
      }
    }
  }
}
