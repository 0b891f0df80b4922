#include <cmath>
#include <string>

#include "cinerecon/error.hpp"
#include "cinerecon/params.hpp"

namespace cinerecon::ad {

ParamTensor& ParamSet::add(std::string name, Shape shape, std::vector<double> values) {
  if (index_.contains(name)) throw StructuralError("duplicate parameter name " + name);
  if (shape.numel() != values.size()) throw StructuralError("parameter " + name + " value count mismatch");
  index_.emplace(name, tensors_.size());
  tensors_.push_back({std::move(name), shape, std::move(values)});
  return tensors_.back();
}

const ParamTensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StructuralError("unknown parameter " + name);
  return tensors_[it->second];
}

ParamTensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw StructuralError("unknown parameter " + name);
  return tensors_[it->second];
}

std::size_t ParamSet::total_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

AdamState AdamState::for_params(const ParamSet& params, AdamHyper hyper) {
  AdamState st;
  st.hyper = hyper;
  for (const auto& t : params.tensors()) {
    st.m.emplace_back(t.values.size(), 0.0);
    st.v.emplace_back(t.values.size(), 0.0);
  }
  return st;
}

void adam_step(ParamSet& params, const GradientSet& grads, AdamState& state) {
  auto& tensors = params.tensors();
  if (grads.size() != tensors.size() || state.m.size() != tensors.size() || state.v.size() != tensors.size()) {
    throw StructuralError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (grads[i].size() != tensors[i].values.size() || state.m[i].size() != grads[i].size() ||
        state.v[i].size() != grads[i].size()) {
      throw StructuralError("adam_step: shape mismatch for parameter " + tensors[i].name);
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient for parameter " + tensors[i].name);
    }
  }

  const auto& hp = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& p = tensors[i].values;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g[j];
      v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
  }
}

}  // namespace cinerecon::ad
