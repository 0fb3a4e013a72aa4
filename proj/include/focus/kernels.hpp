#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace focus {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Row-wise softmax with max subtraction.
template <typename Derived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

/// Backward of a row-wise softmax: dX = Y .* (dY - rowsum(dY .* Y)).
template <typename DerivedY, typename DerivedG>
Mat<typename DerivedY::Scalar> softmax_rows_backward(const Eigen::MatrixBase<DerivedY>& y,
                                                     const Eigen::MatrixBase<DerivedG>& dy) {
  const auto inner = dy.cwiseProduct(y).rowwise().sum().eval();
  return y.cwiseProduct(dy - inner.replicate(1, y.cols()));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

inline constexpr double kLayerNormEps = 1e-8;

/// Saved per-row statistics of a layer norm, needed by the backward pass.
template <typename Scalar>
struct LayerNormCache {
  Mat<Scalar> normalized;  // (x - mu) / sigma
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sigma;
};

/// Per-row layer normalization with gain and bias.
template <typename Derived, typename DerivedG, typename DerivedB>
Mat<typename Derived::Scalar> layer_norm(const Eigen::MatrixBase<Derived>& x,
                                         const Eigen::MatrixBase<DerivedG>& gain,
                                         const Eigen::MatrixBase<DerivedB>& bias,
                                         LayerNormCache<typename Derived::Scalar>* cache = nullptr) {
  using Scalar = typename Derived::Scalar;
  const auto d = static_cast<Scalar>(x.cols());
  Mat<Scalar> centered = x.colwise() - x.rowwise().mean();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sigma =
      ((centered.rowwise().squaredNorm() / d).array() + Scalar(kLayerNormEps)).rsqrt();
  Mat<Scalar> normalized = centered.array().colwise() * inv_sigma.array();
  Mat<Scalar> out = (normalized.array().rowwise() * gain.row(0).array()).matrix().rowwise() +
                    bias.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_sigma = std::move(inv_sigma);
  }
  return out;
}

/// Returns dX and accumulates dGain / dBias.
/// gain, dgain and dbias are 1 x d.
template <typename Scalar>
Mat<Scalar> layer_norm_backward(const LayerNormCache<Scalar>& cache, const Mat<Scalar>& gain,
                                const Mat<Scalar>& dy, Mat<Scalar>& dgain, Mat<Scalar>& dbias) {
  const auto& xhat = cache.normalized;
  dgain += dy.cwiseProduct(xhat).colwise().sum();
  dbias += dy.colwise().sum();
  const Mat<Scalar> dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<Scalar>(xhat.cols());
  const auto mean_dxhat = (dxhat.rowwise().sum() / d).eval();
  const auto mean_dxhat_xhat = (dxhat.cwiseProduct(xhat).rowwise().sum() / d).eval();
  Mat<Scalar> dx = dxhat.colwise() - mean_dxhat;
  dx -= xhat.cwiseProduct(mean_dxhat_xhat.replicate(1, xhat.cols()));
  dx.array().colwise() *= cache.inv_sigma.array();
  return dx;
}

}  // namespace focus
