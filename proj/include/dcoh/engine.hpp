#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcoh/common.hpp"

namespace dcoh {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using VecMap = Eigen::Map<Vec<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Vec<T>>;

/// Dense row-major array. Vectors have a single dimension.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims)
      : shape(std::move(dims)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                             std::multiplies<>()),
             T(0)) {}

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  MatMap<T> mat() {
    return MatMap<T>(data.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }
  ConstMatMap<T> mat() const {
    return ConstMatMap<T>(data.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
  }
  VecMap<T> vec() { return VecMap<T>(data.data(), static_cast<Eigen::Index>(size())); }
  ConstVecMap<T> vec() const {
    return ConstVecMap<T>(data.data(), static_cast<Eigen::Index>(size()));
  }

  bool operator==(const Tensor&) const = default;
};

/// Ordered collection of named tensors. Order is insertion order and is part
/// of the checkpoint layout.
template <typename T>
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape) {
    names_.push_back(std::move(name));
    tensors_.emplace_back(std::move(shape));
    return tensors_.size() - 1;
  }

  std::size_t count() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet z;
    for (std::size_t i = 0; i < count(); ++i) z.add(names_[i], tensors_[i].shape);
    return z;
  }

  void set_zero() {
    for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), T(0));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < count(); ++i) {
      out.add(names_[i], tensors_[i].shape);
      std::transform(tensors_[i].data.begin(), tensors_[i].data.end(), out[i].data.begin(),
                     [](T x) { return static_cast<U>(x); });
    }
    return out;
  }

  /// Visits every scalar in order.
  template <typename F>
  void for_each_scalar(F&& f) {
    for (auto& t : tensors_)
      for (auto& x : t.data) f(x);
  }
  template <typename F>
  void for_each_scalar(F&& f) const {
    for (const auto& t : tensors_)
      for (const auto& x : t.data) f(x);
  }

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
};

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

// ------------------------------------------------------------------ GRU
//
// Gate blocks are stacked row-wise in the order reset (r), update (z),
// candidate (h):
//   r  = sigmoid(W_r x + U_r h' + b_r)
//   z  = sigmoid(W_z x + U_z h' + b_z)
//   h~ = tanh(W_h x + U_h (r * h') + b_h)
//   h  = (1 - z) * h' + z * h~

/// Views of one GRU cell's parameters: W is 3H x in, U is 3H x H, b is 3H.
template <typename T>
struct GruCellParams {
  const Tensor<T>* W;
  const Tensor<T>* U;
  const Tensor<T>* b;

  std::size_t hidden() const { return U->cols(); }
  std::size_t input() const { return W->cols(); }

  void check() const {
    const auto H = hidden();
    if (U->rows() != 3 * H || W->rows() != 3 * H || b->size() != 3 * H)
      throw std::invalid_argument("GRU: inconsistent parameter shapes");
  }
};

template <typename T>
struct GruCellGrads {
  Tensor<T>* W;
  Tensor<T>* U;
  Tensor<T>* b;
};

/// Per-step activations kept for backpropagation.
template <typename T>
struct GruStepCache {
  Vec<T> h_prev, r, z, cand;
};

/// One cell step from precomputed input projection `wx` = W x + b.
template <typename T>
Vec<T> gru_step_projected(const Eigen::Ref<const Vec<T>>& wx, const Vec<T>& h_prev,
                          const GruCellParams<T>& p, GruStepCache<T>* cache) {
  const auto H = static_cast<Eigen::Index>(p.hidden());
  const auto U = p.U->mat();
  Vec<T> rz = wx.head(2 * H) + U.topRows(2 * H) * h_prev;
  Vec<T> r = rz.head(H).unaryExpr([](T v) { return sigmoid(v); });
  Vec<T> z = rz.tail(H).unaryExpr([](T v) { return sigmoid(v); });
  Vec<T> rh = r.cwiseProduct(h_prev);
  Vec<T> cand = (wx.tail(H) + U.bottomRows(H) * rh).array().tanh().matrix();
  Vec<T> h = (Vec<T>::Ones(H) - z).cwiseProduct(h_prev) + z.cwiseProduct(cand);
  if (cache) {
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->cand = std::move(cand);
  }
  return h;
}

/// Single GRU cell step on raw input.
template <typename T>
Vec<T> gru_cell_step(const Vec<T>& x, const Vec<T>& h_prev, const GruCellParams<T>& p) {
  p.check();
  if (static_cast<std::size_t>(x.size()) != p.input() ||
      static_cast<std::size_t>(h_prev.size()) != p.hidden())
    throw std::invalid_argument("gru_cell_step: dimension mismatch");
  Vec<T> wx = p.W->mat() * x + p.b->vec();
  return gru_step_projected<T>(wx, h_prev, p, nullptr);
}

/// Backward through one step. `dh` is dL/dh. Writes dL/d(wx) into `dwx`
/// (3H), accumulates dU, and returns dL/dh_prev.
template <typename T>
Vec<T> gru_step_backward(const Vec<T>& dh, const GruStepCache<T>& c,
                         const GruCellParams<T>& p, Tensor<T>& dU,
                         Eigen::Ref<Vec<T>> dwx) {
  const auto H = static_cast<Eigen::Index>(p.hidden());
  const auto U = p.U->mat();
  auto dUm = dU.mat();

  const Vec<T> one = Vec<T>::Ones(H);
  Vec<T> dz = dh.cwiseProduct(c.cand - c.h_prev);
  Vec<T> dcand = dh.cwiseProduct(c.z);
  Vec<T> dh_prev = dh.cwiseProduct(one - c.z);

  Vec<T> da_h = dcand.cwiseProduct(one - c.cand.cwiseProduct(c.cand));
  Vec<T> rh = c.r.cwiseProduct(c.h_prev);
  dUm.bottomRows(H).noalias() += da_h * rh.transpose();
  Vec<T> drh = U.bottomRows(H).transpose() * da_h;
  Vec<T> dr = drh.cwiseProduct(c.h_prev);
  dh_prev += drh.cwiseProduct(c.r);

  Vec<T> da_r = dr.cwiseProduct(c.r.cwiseProduct(one - c.r));
  Vec<T> da_z = dz.cwiseProduct(c.z.cwiseProduct(one - c.z));
  dwx.head(H) = da_r;
  dwx.segment(H, H) = da_z;
  dwx.tail(H) = da_h;

  dUm.topRows(2 * H).noalias() += dwx.head(2 * H) * c.h_prev.transpose();
  dh_prev.noalias() += U.topRows(2 * H).transpose() * dwx.head(2 * H);
  return dh_prev;
}

/// Activations of one direction over a sequence.
template <typename T>
struct GruSequenceCache {
  std::vector<GruStepCache<T>> steps;  // in processing order
  bool reverse = false;
};

/// Runs a GRU over the rows of X (L x in) from a zero state, left to right or
/// right to left. Returns hidden states aligned with input rows (L x H).
template <typename T>
Mat<T> gru_sequence_forward(const Mat<T>& X, const GruCellParams<T>& p, bool reverse,
                            GruSequenceCache<T>* cache) {
  const auto L = X.rows();
  const auto H = static_cast<Eigen::Index>(p.hidden());
  Mat<T> WX = X * p.W->mat().transpose();
  WX.rowwise() += p.b->vec().transpose();
  Mat<T> out(L, H);
  Vec<T> h = Vec<T>::Zero(H);
  if (cache) {
    cache->steps.assign(static_cast<std::size_t>(L), {});
    cache->reverse = reverse;
  }
  for (Eigen::Index s = 0; s < L; ++s) {
    const auto t = reverse ? L - 1 - s : s;
    Vec<T> wx = WX.row(t).transpose();
    h = gru_step_projected<T>(wx, h, p,
                              cache ? &cache->steps[static_cast<std::size_t>(s)] : nullptr);
    out.row(t) = h.transpose();
  }
  return out;
}

/// Backpropagates dOut (L x H, gradient wrt each hidden state) through the
/// sequence. Accumulates parameter gradients; returns dX (L x in).
template <typename T>
Mat<T> gru_sequence_backward(const Mat<T>& X, const Mat<T>& dOut,
                             const GruSequenceCache<T>& cache, const GruCellParams<T>& p,
                             GruCellGrads<T> g) {
  const auto L = X.rows();
  const auto H = static_cast<Eigen::Index>(p.hidden());
  Mat<T> dWX(L, 3 * H);
  Vec<T> carry = Vec<T>::Zero(H);
  Vec<T> dwx(3 * H);
  for (Eigen::Index s = L - 1; s >= 0; --s) {
    const auto t = cache.reverse ? L - 1 - s : s;
    Vec<T> dh = dOut.row(t).transpose() + carry;
    carry = gru_step_backward<T>(dh, cache.steps[static_cast<std::size_t>(s)], p, *g.U, dwx);
    dWX.row(t) = dwx.transpose();
  }
  g.W->mat().noalias() += dWX.transpose() * X;
  g.b->vec() += dWX.colwise().sum().transpose();
  return dWX * p.W->mat();
}

// --------------------------------------------------------------- losses

struct MarginLoss {
  double value;
  double d_x1;  // dL/dx1
  double d_x2;  // dL/dx2
};

/// max(0, -y (x1 - x2) + margin); x1 scores the original, x2 the adversarial.
MarginLoss margin_ranking_loss(double x1, double x2, double margin = 0.5, double y = 1.0);

// ----------------------------------------------------------------- Adam

template <typename T>
struct AdamState {
  ParamSet<T> m;
  ParamSet<T> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const ParamSet<T>& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

/// Bias-corrected Adam update in place.
template <typename T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state,
               double lr) {
  if (grads.count() != params.count() || state.m.count() != params.count())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    if (g.size() != p.size() || m.size() != p.size())
      throw std::invalid_argument("adam_step: shape mismatch for " + params.name(i));
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const double mh = static_cast<double>(m[j]) / c1;
      const double vh = static_cast<double>(v[j]) / c2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * mh / (std::sqrt(vh) + state.eps));
    }
  }
}

// ------------------------------------------------------- gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool excluded = false;  // point lies on a non-differentiable kink
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tol = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  /// near-zero gradients from amplifying O(h^2) truncation error.
  double floor = 1e-3;
  /// Coordinates to check; empty means all.
  std::vector<std::size_t> coordinates;
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

/// Compares an analytic gradient against central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. Throws NumericError when f or the
/// gradient is non-finite. `kink` may flag points where f is not
/// differentiable; those are reported as excluded.
GradCheckReport grad_check(const ScalarFn& f, const GradFn& grad,
                           std::span<const double> theta, const GradCheckOptions& opt,
                           const std::function<bool(std::span<const double>)>& kink = {});

/// Uniform init in [-bound, bound].
template <typename T>
void uniform_init(Tensor<T>& t, Rng& rng, double bound) {
  for (auto& x : t.data) x = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace dcoh
