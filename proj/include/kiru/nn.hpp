#pragma once

// Dense numerics for the segmenter: row-major tensors, affine layers,
// activations, recurrent cells, softmax cross-entropy, diagonal AdaGrad and
// central-difference gradient checking. Everything is templated on the scalar
// so models train in float and are checked in double.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kiru/error.hpp"

namespace kiru::nn {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
// Sequence matrices: one column per time step.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<T> row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols_, cols_);
  }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }

  Eigen::Map<RowMajor<T>> mat() {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }
  Eigen::Map<const RowMajor<T>> mat() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(cols_)};
  }
  // Flat view, used for bias vectors (cols == 1).
  Eigen::Map<Vector<T>> vec() {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<const Vector<T>> vec() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
};

inline void check_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(std::string("shape mismatch in ") + what);
}

template <typename T>
Eigen::Map<const Vector<T>> as_vector(std::span<const T> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

// ---------------------------------------------------------------------------
// Affine layers and activations

// W x + b
template <typename T>
std::vector<T> affine(std::span<const T> x, const Tensor<T>& w,
                      std::span<const T> b) {
  check_shape(w.cols() == x.size() && w.rows() == b.size(), "affine");
  std::vector<T> y(b.begin(), b.end());
  Eigen::Map<Vector<T>>(y.data(), static_cast<Eigen::Index>(y.size())) +=
      w.mat() * as_vector(x);
  return y;
}

// Accumulates the gradients of y = W x + b given dy. `dx` may be empty.
template <typename T>
void affine_backward(std::span<const T> x, const Tensor<T>& w,
                     std::span<const T> dy, Tensor<T>& dw, std::span<T> db,
                     std::span<T> dx) {
  check_shape(w.cols() == x.size() && w.rows() == dy.size() &&
                  dw.rows() == w.rows() && dw.cols() == w.cols() &&
                  db.size() == dy.size(),
              "affine_backward");
  dw.mat().noalias() += as_vector(dy) * as_vector(x).transpose();
  Eigen::Map<Vector<T>>(db.data(), static_cast<Eigen::Index>(db.size())) +=
      as_vector(dy);
  if (!dx.empty()) {
    check_shape(dx.size() == x.size(), "affine_backward");
    Eigen::Map<Vector<T>>(dx.data(), static_cast<Eigen::Index>(dx.size()))
        .noalias() += w.mat().transpose() * as_vector(dy);
  }
}

enum class Activation { kTanh, kSigmoid };

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                   : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
T apply(Activation g, T x) {
  return g == Activation::kTanh ? std::tanh(x) : sigmoid(x);
}

// Derivative expressed through the activation's output y = g(x).
template <typename T>
T derivative_from_output(Activation g, T y) {
  return g == Activation::kTanh ? T(1) - y * y : y * (T(1) - y);
}

template <typename T>
std::vector<T> activate(std::span<const T> x, Activation g) {
  std::vector<T> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(),
                 [g](T v) { return apply(g, v); });
  return y;
}

// Max-subtracted softmax over a column.
template <typename Derived>
void softmax_inplace(Eigen::MatrixBase<Derived>& z) {
  using T = typename Derived::Scalar;
  const T m = z.maxCoeff();
  z = (z.array() - m).exp().matrix();
  z /= z.sum();
}

template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> y(z.begin(), z.end());
  if (y.empty()) return y;
  Eigen::Map<Vector<T>> m(y.data(), static_cast<Eigen::Index>(y.size()));
  softmax_inplace(m);
  return y;
}

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kProbabilityFloor = 1e-12;

struct LossDiagnostics {
  std::size_t clamped = 0;  // positions whose gold probability hit the floor
};

// -log y[gold], with y[gold] floored at 1e-12.
template <typename T>
T cross_entropy(std::span<const T> y, std::size_t gold,
                LossDiagnostics* diag = nullptr) {
  if (gold >= y.size()) throw PreconditionError("gold label out of range");
  T p = y[gold];
  if (p < T(kProbabilityFloor)) {
    p = T(kProbabilityFloor);
    if (diag) ++diag->clamped;
  }
  return -std::log(p);
}

template <typename T>
double squared_norm(std::span<const ParamRef<T>> params) {
  double sum = 0;
  for (const auto& p : params) {
    for (T v : p.tensor->values()) sum += double(v) * double(v);
  }
  return sum;
}

// Sum over positions of -log y_t[gold_t], plus (lambda / 2) * ||theta||^2.
template <typename T>
double cross_entropy_l2(const std::vector<std::vector<T>>& y,
                        std::span<const std::size_t> gold,
                        std::span<const ParamRef<T>> params, double lambda,
                        LossDiagnostics* diag = nullptr) {
  if (lambda < 0) throw PreconditionError("L2 coefficient must be >= 0");
  if (y.size() != gold.size()) {
    throw PreconditionError("cross_entropy_l2: length mismatch");
  }
  double loss = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    loss += double(cross_entropy<T>(y[t], gold[t], diag));
  }
  return loss + 0.5 * lambda * squared_norm(params);
}

// ---------------------------------------------------------------------------
// Recurrent cells

// Elman RNN: h = tanh(wx x + wh h_prev + b).
// LSTM: wx is 4H x in, wh is 4H x H, b is 4H; rows are stacked as
// [input; forget; output; candidate]. No peepholes.
template <typename T>
struct RecurrentParams {
  Tensor<T> wx;
  Tensor<T> wh;
  Tensor<T> b;

  std::size_t input() const { return wx.cols(); }
  std::size_t hidden() const { return wh.cols(); }
};

template <typename T>
using RnnParams = RecurrentParams<T>;
template <typename T>
using LstmParams = RecurrentParams<T>;

template <typename T>
void check_recurrent(const RecurrentParams<T>& p, std::size_t gates) {
  const std::size_t h = p.hidden();
  check_shape(p.wx.rows() == gates * h && p.wh.rows() == gates * h &&
                  p.b.size() == gates * h,
              "recurrent parameters");
}

template <typename T>
std::vector<T> rnn_step(std::span<const T> x, std::span<const T> h_prev,
                        const RnnParams<T>& p) {
  check_recurrent(p, 1);
  check_shape(x.size() == p.input() && h_prev.size() == p.hidden(),
              "rnn_step");
  Vector<T> z = p.wx.mat() * as_vector(x) + p.wh.mat() * as_vector(h_prev) +
                p.b.vec();
  std::vector<T> h(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) h[i] = std::tanh(z[i]);
  return h;
}

// Gradients of one RNN step given dh (w.r.t. h). dx / dh_prev are
// accumulated into and may be empty.
template <typename T>
void rnn_step_backward(std::span<const T> x, std::span<const T> h_prev,
                       std::span<const T> h, std::span<const T> dh,
                       const RnnParams<T>& p, RnnParams<T>& grad,
                       std::span<T> dx, std::span<T> dh_prev) {
  std::vector<T> dz(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) dz[i] = dh[i] * (T(1) - h[i] * h[i]);
  affine_backward<T>(x, p.wx, dz, grad.wx, grad.b.values(), dx);
  std::vector<T> unused_db(h.size());
  affine_backward<T>(h_prev, p.wh, dz, grad.wh, unused_db, dh_prev);
}

template <typename T>
struct LstmState {
  std::vector<T> h;
  std::vector<T> c;
};

// Activations kept for the backward pass of one LSTM step.
template <typename T>
struct LstmCache {
  Vector<T> gates;  // 4H post-activation: i, f, o, g
  Vector<T> c;
  Vector<T> tanh_c;
  Vector<T> h;
};

// Applies gate nonlinearities to pre-activations z (4H) and advances the cell.
template <typename T, typename Z, typename C>
void lstm_cell(const Eigen::MatrixBase<Z>& z, const Eigen::MatrixBase<C>& c_prev,
               LstmCache<T>& out) {
  const Eigen::Index h = c_prev.size();
  out.gates.resize(4 * h);
  for (Eigen::Index k = 0; k < 3 * h; ++k) out.gates[k] = sigmoid<T>(z[k]);
  for (Eigen::Index k = 3 * h; k < 4 * h; ++k) out.gates[k] = std::tanh(z[k]);
  out.c = out.gates.segment(h, h).cwiseProduct(c_prev) +
          out.gates.segment(0, h).cwiseProduct(out.gates.segment(3 * h, h));
  out.tanh_c = out.c.array().tanh().matrix();
  out.h = out.gates.segment(2 * h, h).cwiseProduct(out.tanh_c);
}

// Backward through lstm_cell. dh and dc are gradients w.r.t. the step's h and
// c; writes dz (4H) and dc_prev.
template <typename T, typename CP>
void lstm_cell_backward(const LstmCache<T>& s,
                        const Eigen::MatrixBase<CP>& c_prev,
                        const Vector<T>& dh, const Vector<T>& dc_in,
                        Vector<T>& dz, Vector<T>& dc_prev) {
  const Eigen::Index h = dh.size();
  const auto i = s.gates.segment(0, h).array();
  const auto f = s.gates.segment(h, h).array();
  const auto o = s.gates.segment(2 * h, h).array();
  const auto g = s.gates.segment(3 * h, h).array();
  const auto tc = s.tanh_c.array();
  const Eigen::Array<T, Eigen::Dynamic, 1> dc =
      dc_in.array() + dh.array() * o * (T(1) - tc * tc);
  dz.resize(4 * h);
  dz.segment(0, h) = (dc * g * i * (T(1) - i)).matrix();
  dz.segment(h, h) = (dc * c_prev.array() * f * (T(1) - f)).matrix();
  dz.segment(2 * h, h) = (dh.array() * tc * o * (T(1) - o)).matrix();
  dz.segment(3 * h, h) = (dc * i * (T(1) - g * g)).matrix();
  dc_prev = (dc * f).matrix();
}

template <typename T>
LstmCache<T> lstm_step_cached(std::span<const T> x, std::span<const T> h_prev,
                              std::span<const T> c_prev,
                              const LstmParams<T>& p) {
  check_recurrent(p, 4);
  check_shape(x.size() == p.input() && h_prev.size() == p.hidden() &&
                  c_prev.size() == p.hidden(),
              "lstm_step");
  const Vector<T> z = p.wx.mat() * as_vector(x) +
                      p.wh.mat() * as_vector(h_prev) + p.b.vec();
  LstmCache<T> cache;
  lstm_cell<T>(z, as_vector(c_prev), cache);
  return cache;
}

template <typename T>
LstmState<T> lstm_step(std::span<const T> x, std::span<const T> h_prev,
                       std::span<const T> c_prev, const LstmParams<T>& p) {
  const LstmCache<T> s = lstm_step_cached(x, h_prev, c_prev, p);
  return {std::vector<T>(s.h.data(), s.h.data() + s.h.size()),
          std::vector<T>(s.c.data(), s.c.data() + s.c.size())};
}

// Gradients of one LSTM step. dh / dc are w.r.t. the step outputs; parameter
// gradients and dx / dh_prev / dc_prev are accumulated into.
template <typename T>
void lstm_step_backward(std::span<const T> x, std::span<const T> h_prev,
                        std::span<const T> c_prev, const LstmCache<T>& s,
                        std::span<const T> dh, std::span<const T> dc,
                        const LstmParams<T>& p, LstmParams<T>& grad,
                        std::span<T> dx, std::span<T> dh_prev,
                        std::span<T> dc_prev) {
  Vector<T> dz;
  Vector<T> dcp;
  lstm_cell_backward<T>(s, as_vector(c_prev), Vector<T>(as_vector(dh)),
                        Vector<T>(as_vector(dc)), dz, dcp);
  std::span<const T> dzs(dz.data(), static_cast<std::size_t>(dz.size()));
  affine_backward<T>(x, p.wx, dzs, grad.wx, grad.b.values(), dx);
  std::vector<T> unused_db(dz.size());
  affine_backward<T>(h_prev, p.wh, dzs, grad.wh, unused_db, dh_prev);
  for (std::size_t k = 0; k < dc_prev.size(); ++k) dc_prev[k] += dcp[k];
}

// ---------------------------------------------------------------------------
// Diagonal AdaGrad

inline constexpr double kAdaGradRootFloor = 1e-8;

// theta_i -= lr * g_i / max(sqrt(sum of g_i^2 so far), 1e-8). Throws
// TrainingError naming `name` when a gradient is not finite.
template <typename T>
void adagrad_update(std::span<T> theta, std::span<const T> grad,
                    std::span<T> accum, T lr, const std::string& name) {
  check_shape(theta.size() == grad.size() && accum.size() == grad.size(),
              "adagrad_update");
  if (!(lr > T(0))) throw PreconditionError("learning rate must be positive");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw TrainingError("non-finite gradient in parameter '" + name +
                          "' at index " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const T g = grad[i];
    if (g == T(0)) continue;
    accum[i] += g * g;
    const T root = std::max(std::sqrt(accum[i]), T(kAdaGradRootFloor));
    theta[i] -= lr * g / root;
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> failures;

  bool passed() const { return failures.empty(); }
};

// |a - n| / max(|a|, |n|); differences below 1e-10 in absolute terms count
// as exact so that parameters with (numerically) zero gradient do not divide
// round-off by round-off.
inline double relative_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (diff < 1e-10) return 0.0;
  return diff / std::max(std::abs(analytic), std::abs(numeric));
}

// Compares `analytic` against central differences of `loss` over every
// coordinate of `params`. `loss` must read the parameters in place.
inline GradCheckReport grad_check(std::span<const ParamRef<double>> params,
                                  std::span<const ParamRef<double>> analytic,
                                  const std::function<double()>& loss,
                                  double eps, double tolerance) {
  if (!(eps > 0)) throw PreconditionError("grad_check: epsilon must be > 0");
  if (params.size() != analytic.size()) {
    throw PreconditionError("grad_check: parameter/gradient count mismatch");
  }
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].tensor->values();
    auto grads = analytic[p].tensor->values();
    check_shape(values.size() == grads.size(), "grad_check");
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss();
      values[i] = saved - eps;
      const double down = loss();
      values[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      GradCheckEntry e{params[p].name, i, grads[i], numeric,
                       relative_error(grads[i], numeric)};
      ++report.checked;
      if (e.rel_error >= report.max_rel_error) {
        report.max_rel_error = e.rel_error;
        report.worst = e;
      }
      if (!(e.rel_error < tolerance)) report.failures.push_back(e);
    }
  }
  return report;
}

}  // namespace kiru::nn
