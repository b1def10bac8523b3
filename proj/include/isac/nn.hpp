#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "isac/rng.hpp"

namespace isac {

/// Two-hidden-layer tanh MLP with hand-written backprop. Small enough that
/// exact gradients are cheap; no autograd involved.
class Mlp {
 public:
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  Mlp() = default;

  /// Xavier-uniform init; the output layer is scaled by `head_scale` (small
  /// for actor means, 1 for the critic).
  static Mlp create(int in_dim, int hidden, int out_dim, Rng& rng, double head_scale = 1.0) {
    Mlp net;
    net.w1 = init_matrix(hidden, in_dim, rng, 1.0);
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2 = init_matrix(hidden, hidden, rng, 1.0);
    net.b2 = Eigen::VectorXd::Zero(hidden);
    net.w3 = init_matrix(out_dim, hidden, rng, head_scale);
    net.b3 = Eigen::VectorXd::Zero(out_dim);
    return net;
  }

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w3.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }

  struct Cache {
    Eigen::VectorXd x, h1, h2, y;  // h_i are post-tanh activations
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache* cache = nullptr) const {
    if (x.size() != w1.cols()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
    Eigen::VectorXd h1 = (w1 * x + b1).array().tanh();
    Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh();
    Eigen::VectorXd y = w3 * h2 + b3;
    if (cache) *cache = {x, h1, h2, y};
    return y;
  }

  struct Grads {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;

    static Grads zero_like(const Mlp& net) {
      Grads g;
      g.w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
      g.w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
      g.w3 = Eigen::MatrixXd::Zero(net.w3.rows(), net.w3.cols());
      g.b1 = Eigen::VectorXd::Zero(net.b1.size());
      g.b2 = Eigen::VectorXd::Zero(net.b2.size());
      g.b3 = Eigen::VectorXd::Zero(net.b3.size());
      return g;
    }

    void scale(double s) {
      w1 *= s;
      w2 *= s;
      w3 *= s;
      b1 *= s;
      b2 *= s;
      b3 *= s;
    }

    double squared_norm() const {
      return w1.squaredNorm() + w2.squaredNorm() + w3.squaredNorm() + b1.squaredNorm() +
             b2.squaredNorm() + b3.squaredNorm();
    }
  };

  /// Accumulate parameter gradients for a single sample given dL/dy.
  void backward(const Cache& c, const Eigen::VectorXd& dy, Grads& g) const {
    g.w3 += dy * c.h2.transpose();
    g.b3 += dy;
    Eigen::VectorXd dh2 = w3.transpose() * dy;
    Eigen::VectorXd da2 = dh2.array() * (1.0 - c.h2.array().square());
    g.w2 += da2 * c.h1.transpose();
    g.b2 += da2;
    Eigen::VectorXd dh1 = w2.transpose() * da2;
    Eigen::VectorXd da1 = dh1.array() * (1.0 - c.h1.array().square());
    g.w1 += da1 * c.x.transpose();
    g.b1 += da1;
  }

  int param_count() const {
    return static_cast<int>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size());
  }

  void flatten(double* out) const {
    out = copy_out(w1, out);
    out = copy_out(b1, out);
    out = copy_out(w2, out);
    out = copy_out(b2, out);
    out = copy_out(w3, out);
    copy_out(b3, out);
  }

  void unflatten(const double* in) {
    in = copy_in(w1, in);
    in = copy_in(b1, in);
    in = copy_in(w2, in);
    in = copy_in(b2, in);
    in = copy_in(w3, in);
    copy_in(b3, in);
  }

 private:
  static Eigen::MatrixXd init_matrix(int rows, int cols, Rng& rng, double scale) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols)) * scale;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
    return m;
  }

  template <typename T>
  static double* copy_out(const T& t, double* out) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = t.data()[i];
    return out + t.size();
  }

  template <typename T>
  static const double* copy_in(T& t, const double* in) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = in[i];
    return in + t.size();
  }
};

/// Adam state for one tensor.
struct AdamState {
  Eigen::ArrayXXd m, v;

  static AdamState zero(Eigen::Index rows, Eigen::Index cols) {
    AdamState s;
    s.m = Eigen::ArrayXXd::Zero(rows, cols);
    s.v = Eigen::ArrayXXd::Zero(rows, cols);
    return s;
  }
};

namespace detail {
template <typename Tensor>
void adam_apply(Tensor& param, const Tensor& grad, AdamState& st, long step, double lr,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  st.m = beta1 * st.m + (1.0 - beta1) * grad.array();
  st.v = beta2 * st.v + (1.0 - beta2) * grad.array().square();
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  auto m_hat = st.m / bc1;
  auto v_hat = st.v / bc2;
  param.array() -= lr * m_hat / (v_hat.sqrt() + eps);
}
}  // namespace detail

/// Adam over one Mlp's tensors; call step() once per minibatch.
class MlpAdam {
 public:
  MlpAdam() = default;

  explicit MlpAdam(const Mlp& net)
      : s_w1_(AdamState::zero(net.w1.rows(), net.w1.cols())),
        s_w2_(AdamState::zero(net.w2.rows(), net.w2.cols())),
        s_w3_(AdamState::zero(net.w3.rows(), net.w3.cols())),
        s_b1_(AdamState::zero(net.b1.size(), 1)),
        s_b2_(AdamState::zero(net.b2.size(), 1)),
        s_b3_(AdamState::zero(net.b3.size(), 1)) {}

  void step(Mlp& net, const Mlp::Grads& g, long t, double lr) {
    detail::adam_apply(net.w1, g.w1, s_w1_, t, lr);
    detail::adam_apply(net.w2, g.w2, s_w2_, t, lr);
    detail::adam_apply(net.w3, g.w3, s_w3_, t, lr);
    detail::adam_apply(net.b1, g.b1, s_b1_, t, lr);
    detail::adam_apply(net.b2, g.b2, s_b2_, t, lr);
    detail::adam_apply(net.b3, g.b3, s_b3_, t, lr);
  }

 private:
  AdamState s_w1_, s_w2_, s_w3_, s_b1_, s_b2_, s_b3_;
};

}  // namespace isac
