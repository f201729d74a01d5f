#pragma once

// Loss and metric kernels over plain Eigen expressions. Rows are frames.
// The differentiable counterparts used during training live in alignment.hpp
// and training.hpp; both families are checked against scalar-loop oracles.

#include "pmmtalk/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace pmmtalk {

namespace detail {
template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": prediction and target shapes differ");
  }
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> row_softmax(
    const Eigen::MatrixBase<Derived>& x) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M out = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> row_log_softmax(
    const Eigen::MatrixBase<Derived>& x) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M shifted = x.colwise() - x.rowwise().maxCoeff();
  auto lse = shifted.array().exp().rowwise().sum().log();
  shifted.array().colwise() -= lse;
  return shifted;
}
}  // namespace detail

/// (1/T) sum_t ||pred_t - target_t||^2
template <typename A, typename B>
typename A::Scalar position_loss(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& target) {
  detail::require_same_shape(pred, target, "position_loss");
  return (pred - target).squaredNorm() / static_cast<typename A::Scalar>(pred.rows());
}

/// (1/T) sum_{t>=2} ||(pred_t - pred_{t-1}) - (target_t - target_{t-1})||^2
template <typename A, typename B>
typename A::Scalar motion_loss(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& target) {
  detail::require_same_shape(pred, target, "motion_loss");
  const Eigen::Index n = pred.rows();
  if (n < 2) throw Error(ErrorKind::TooShort, "motion_loss needs at least two frames");
  const auto dp = pred.bottomRows(n - 1) - pred.topRows(n - 1);
  const auto dt = target.bottomRows(n - 1) - target.topRows(n - 1);
  return (dp - dt).squaredNorm() / static_cast<typename A::Scalar>(n);
}

/// Symmetric KL between row-softmax(D) and row-softmax(I), scaled by 1/(2T).
template <typename Derived>
typename Derived::Scalar temporal_pair_loss(const Eigen::MatrixBase<Derived>& similarity) {
  using Scalar = typename Derived::Scalar;
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (similarity.rows() != similarity.cols()) throw Error(ErrorKind::DimensionMismatch, "similarity must be square");
  const Eigen::Index n = similarity.rows();
  const M label = M::Identity(n, n);
  const M log_p = detail::row_log_softmax(similarity);
  const M log_q = detail::row_log_softmax(label);
  const M p = log_p.array().exp();
  const M q = log_q.array().exp();
  const Scalar kl_qp = (q.array() * (log_q - log_p).array()).sum();
  const Scalar kl_pq = (p.array() * (log_p - log_q).array()).sum();
  return (kl_qp + kl_pq) / (Scalar(2) * static_cast<Scalar>(n));
}

/// Mean of temporal_pair_loss over the three modality pairs.
template <typename Derived>
typename Derived::Scalar temporal_loss(const std::array<Derived, 3>& similarities) {
  typename Derived::Scalar total = 0;
  for (const auto& d : similarities) total += temporal_pair_loss(d);
  return total / 3;
}

/// 1 - cos between the frame-averages of two projected streams.
template <typename A, typename B>
typename A::Scalar semantic_pair_loss(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  using Scalar = typename A::Scalar;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> mx = x.colwise().mean();
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> my = y.colwise().mean();
  if (mx.size() != my.size()) throw Error(ErrorKind::DimensionMismatch, "semantic pair widths differ");
  const Scalar xx = mx.dot(mx);
  const Scalar yy = my.dot(my);
  if (xx < Scalar(1e-24) || yy < Scalar(1e-24)) throw Error(ErrorKind::ZeroVector, "frame-mean vector has zero norm");
  return Scalar(1) - mx.dot(my) / std::sqrt(xx * yy);
}

template <typename Derived>
typename Derived::Scalar semantic_loss(const std::array<std::pair<Derived, Derived>, 3>& pairs) {
  typename Derived::Scalar total = 0;
  for (const auto& [x, y] : pairs) total += semantic_pair_loss(x, y);
  return total / 3;
}

/// Mean over frames of the largest per-channel squared error.
template <typename A, typename B>
typename A::Scalar lve(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& target) {
  detail::require_same_shape(pred, target, "lve");
  return (pred - target).array().square().rowwise().maxCoeff().mean();
}

/// Mean over frames of the mean per-channel squared error.
template <typename A, typename B>
typename A::Scalar ale(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& target) {
  detail::require_same_shape(pred, target, "ale");
  return (pred - target).array().square().rowwise().mean().mean();
}

}  // namespace pmmtalk
