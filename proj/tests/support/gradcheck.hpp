#pragma once

// Central finite-difference gradient checks against the tape.
//
// An entry counts as non-smooth when the difference quotients at h and h/2 disagree by more
// than truncation and roundoff allow, which happens when a perturbation pushes some ReLU input
// across zero. Such entries are excluded from the error and reported so callers can bound how
// many were dropped.
//
// Difference quotients carry roundoff near eps * |f| / h ~ 1e-10 for losses of order one, so
// gradients below kAbsFloor are compared in absolute terms (error 1e-4 at the floor is 1e-10).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "cinerecon/autodiff.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::testing {

inline constexpr double kAbsFloor = 1e-6;

struct Leaf {
  ad::Shape shape;
  std::vector<double> values;
};

using GraphBuilder =
    std::function<ad::Var<double>(ad::Tape<double>&, const std::vector<ad::Var<double>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t nonsmooth = 0;
};

inline double evaluate(const std::vector<Leaf>& leaves, const GraphBuilder& f) {
  ad::Tape<double> tape;
  tape.set_grad_enabled(false);
  std::vector<ad::Var<double>> vars;
  for (const auto& l : leaves) vars.push_back(tape.parameter(l.shape, l.values));
  return f(tape, vars).item();
}

inline std::vector<std::vector<double>> analytic_gradients(const std::vector<Leaf>& leaves, const GraphBuilder& f) {
  ad::Tape<double> tape;
  std::vector<ad::Var<double>> vars;
  for (const auto& l : leaves) vars.push_back(tape.parameter(l.shape, l.values));
  tape.backward(f(tape, vars));
  std::vector<std::vector<double>> g;
  for (const auto& v : vars) g.emplace_back(v.grad().begin(), v.grad().end());
  return g;
}

using LeafFunction = std::function<double(const std::vector<Leaf>&)>;
using LeafGradients = std::function<std::vector<std::vector<double>>(const std::vector<Leaf>&)>;

/// Compares `gradient` with central differences of `value` on up to `max_entries` entries per
/// leaf. Relative error is |a - n| / max(|a|, |n|, 1e-3 * max |a| over the leaf, kAbsFloor).
inline GradCheckResult grad_check(std::vector<Leaf> leaves, const LeafFunction& value, const LeafGradients& gradient,
                                  std::mt19937_64& rng, std::size_t max_entries = 48, double h = 1e-5) {
  const auto grads = gradient(leaves);
  GradCheckResult r;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& vals = leaves[li].values;
    double gmax = 0.0;
    for (double g : grads[li]) gmax = std::max(gmax, std::abs(g));
    std::vector<std::size_t> entries(vals.size());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (entries.size() > max_entries) {
      shuffle(entries, rng);
      entries.resize(max_entries);
    }
    for (std::size_t e : entries) {
      const double orig = vals[e];
      auto quotient = [&](double step) {
        vals[e] = orig + step;
        const double fp = value(leaves);
        vals[e] = orig - step;
        const double fm = value(leaves);
        vals[e] = orig;
        return (fp - fm) / (2.0 * step);
      };
      const double n1 = quotient(h);
      const double n2 = quotient(0.5 * h);
      const double a = grads[li][e];
      const double denom = std::max({std::abs(a), std::abs(n1), 1e-3 * gmax, kAbsFloor});
      ++r.checked;
      if (std::abs(n1 - n2) > 1e-5 * denom + 1e-9) {
        ++r.nonsmooth;
        continue;
      }
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - n1) / denom);
    }
  }
  return r;
}

inline GradCheckResult grad_check(std::vector<Leaf> leaves, const GraphBuilder& f, std::mt19937_64& rng,
                                  std::size_t max_entries = 48, double h = 1e-5) {
  return grad_check(
      std::move(leaves), [&](const std::vector<Leaf>& l) { return evaluate(l, f); },
      [&](const std::vector<Leaf>& l) { return analytic_gradients(l, f); }, rng, max_entries, h);
}

inline Leaf random_leaf(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Leaf l{shape, std::vector<double>(shape.numel())};
  for (auto& v : l.values) v = uniform_real(rng, -scale, scale);
  return l;
}

}  // namespace cinerecon::testing
