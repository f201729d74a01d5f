#pragma once

// Central finite differences against the tape, tensor by tensor.

#include "pmmtalk/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace gradcheck {

struct Result {
  double max_rel = 0.0;
  std::string worst;
  std::size_t scalars = 0;
  std::size_t tensors = 0;
};

using LossFn = std::function<pmmtalk::Var(pmmtalk::Graph&)>;

// Per tensor: |a - n| / max(|a| + |n|, floor * max(1, |L|)). The floor keeps
// tensors whose true gradient is identically zero (attention key bias, for
// one) from turning finite-difference noise into a relative error of 1. That
// noise is about eps * |L| / h, hence the scaling with the loss.
inline Result check(pmmtalk::ParameterStore& store, const LossFn& loss, double h = 1e-5, double floor = 1e-6) {
  store.zero_grad();
  double value;
  {
    pmmtalk::Graph g;
    const pmmtalk::Var l = loss(g);
    value = l.scalar();
    g.backward(l);
  }
  floor *= std::max(1.0, std::abs(value));
  Result r;
  for (auto& [name, p] : store) {
    const pmmtalk::Matrix analytic = p.grad;
    pmmtalk::Matrix numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double keep = p.value.data()[k];
      p.value.data()[k] = keep + h;
      double up, down;
      {
        pmmtalk::Graph g(false);
        up = loss(g).scalar();
      }
      p.value.data()[k] = keep - h;
      {
        pmmtalk::Graph g(false);
        down = loss(g).scalar();
      }
      p.value.data()[k] = keep;
      numeric.data()[k] = (up - down) / (2 * h);
    }
    const double denom = std::max(analytic.norm() + numeric.norm(), floor);
    const double rel = (analytic - numeric).norm() / denom;
    if (rel > r.max_rel || r.worst.empty()) {
      if (rel >= r.max_rel) r.worst = name;
      r.max_rel = std::max(r.max_rel, rel);
    }
    r.scalars += static_cast<std::size_t>(p.value.size());
    ++r.tensors;
  }
  return r;
}

}  // namespace gradcheck
