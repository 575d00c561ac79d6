#include "fvs/ad/optim.hpp"

#include <cmath>

#include "fvs/error.hpp"

namespace fvs::ad {

template <typename T>
void AdamStep(std::span<BasicTensor<T>> params, AdamState<T>& state,
              std::span<const std::string> names) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), T(0));
      state.v[i].assign(params[i].numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    Fail(ErrorCode::kContractViolation, "optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel()) {
      Fail(ErrorCode::kShapeError, "optimizer moment shape mismatch");
    }
    for (T g : params[i].grad()) {
      if (!std::isfinite(g)) {
        const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
        Fail(ErrorCode::kNonFiniteGradient, "non-finite gradient in " + name);
      }
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad.empty() ? 0.0 : double(grad[j]);
      const double mj = c.beta1 * double(m[j]) + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * double(v[j]) + (1.0 - c.beta2) * g * g;
      m[j] = T(mj);
      v[j] = T(vj);
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      value[j] = T(double(value[j]) - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

template void AdamStep(std::span<BasicTensor<float>>, AdamState<float>&, std::span<const std::string>);
template void AdamStep(std::span<BasicTensor<double>>, AdamState<double>&, std::span<const std::string>);

}  // namespace fvs::ad
