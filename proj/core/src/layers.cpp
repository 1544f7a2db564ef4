#include "rationalift/layers.h"

#include <cmath>
#include <limits>

namespace rationalift {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

void Param::init_uniform(Rng& rng, double bound) {
  for (Eigen::Index c = 0; c < value.cols(); ++c) {
    for (Eigen::Index r = 0; r < value.rows(); ++r) value(r, c) = rng.uniform(-bound, bound);
  }
}

Linear::Linear(std::string name, int in, int out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Linear::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  weight.init_uniform(rng, bound);
  bias.init_uniform(rng, bound);
}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& d_out) {
  weight.grad.noalias() += d_out * x.transpose();
  bias.grad.col(0) += d_out.rowwise().sum();
  return weight.value.transpose() * d_out;
}

GruDirection::GruDirection(std::string name, int input_dim, int hidden_dim, bool reverse)
    : w_x(name + ".w_x", 3 * hidden_dim, input_dim),
      w_h(name + ".w_h", 3 * hidden_dim, hidden_dim),
      b_x(name + ".b_x", 3 * hidden_dim, 1),
      b_h(name + ".b_h", 3 * hidden_dim, 1),
      reverse_(reverse) {}

void GruDirection::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim()));
  w_x.init_uniform(rng, bound);
  w_h.init_uniform(rng, bound);
  b_x.init_uniform(rng, bound);
  b_h.init_uniform(rng, bound);
}

Matrix GruDirection::forward(const Matrix& x, const Matrix& real, SequenceShape shape,
                             Cache* cache) const {
  const int h = hidden_dim();
  const int B = shape.batch;
  const Eigen::Index cols = static_cast<Eigen::Index>(shape.steps) * B;

  Matrix gx = w_x.value * x;
  gx.colwise() += b_x.value.col(0);

  Matrix out(h, cols);
  if (cache) {
    cache->h_prev.resize(h, cols);
    cache->r.resize(h, cols);
    cache->z.resize(h, cols);
    cache->n.resize(h, cols);
    cache->hn.resize(h, cols);
  }
  Matrix state = Matrix::Zero(h, B);
  Matrix gh(3 * h, B);
  for (int s = 0; s < shape.steps; ++s) {
    const int t = reverse_ ? shape.steps - 1 - s : s;
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * B;
    gh.noalias() = w_h.value * state;
    gh.colwise() += b_h.value.col(0);
    const Matrix r = sigmoid(gx.block(0, c0, h, B) + gh.topRows(h));
    const Matrix z = sigmoid(gx.block(h, c0, h, B) + gh.middleRows(h, h));
    const Matrix hn = gh.bottomRows(h);
    const Matrix n = (gx.block(2 * h, c0, h, B).array() + r.array() * hn.array()).tanh().matrix();
    const Matrix cand = ((1.0 - z.array()) * n.array() + z.array() * state.array()).matrix();
    if (cache) {
      cache->h_prev.middleCols(c0, B) = state;
      cache->r.middleCols(c0, B) = r;
      cache->z.middleCols(c0, B) = z;
      cache->n.middleCols(c0, B) = n;
      cache->hn.middleCols(c0, B) = hn;
    }
    const auto m = real.row(t).array();
    for (int b = 0; b < B; ++b) {
      if (m(b) != 0.0) state.col(b) = cand.col(b);
    }
    out.middleCols(c0, B) = state;
  }
  return out;
}

Matrix GruDirection::backward(const Matrix& x, const Matrix& real, SequenceShape shape,
                              const Cache& cache, const Matrix& d_out) {
  const int h = hidden_dim();
  const int B = shape.batch;
  const Eigen::Index cols = static_cast<Eigen::Index>(shape.steps) * B;

  Matrix d_gx(3 * h, cols);
  Matrix carry = Matrix::Zero(h, B);
  Matrix d_gh(3 * h, B);
  for (int s = shape.steps - 1; s >= 0; --s) {
    const int t = reverse_ ? shape.steps - 1 - s : s;
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * B;
    const Matrix d_state = d_out.middleCols(c0, B) + carry;
    const auto m = real.row(t).transpose().array();

    Matrix d_cand = d_state;
    Matrix d_prev = Matrix::Zero(h, B);
    for (int b = 0; b < B; ++b) {
      if (m(b) == 0.0) {
        d_cand.col(b).setZero();
        d_prev.col(b) = d_state.col(b);
      }
    }
    const auto r = cache.r.middleCols(c0, B).array();
    const auto z = cache.z.middleCols(c0, B).array();
    const auto n = cache.n.middleCols(c0, B).array();
    const auto hn = cache.hn.middleCols(c0, B).array();
    const auto hp = cache.h_prev.middleCols(c0, B).array();
    const auto dc = d_cand.array();

    const Eigen::ArrayXXd da_n = dc * (1.0 - z) * (1.0 - n * n);
    const Eigen::ArrayXXd da_z = dc * (hp - n) * z * (1.0 - z);
    const Eigen::ArrayXXd da_r = da_n * hn * r * (1.0 - r);
    d_prev.array() += dc * z;

    d_gx.block(0, c0, h, B) = da_r.matrix();
    d_gx.block(h, c0, h, B) = da_z.matrix();
    d_gx.block(2 * h, c0, h, B) = da_n.matrix();
    d_gh.topRows(h) = da_r.matrix();
    d_gh.middleRows(h, h) = da_z.matrix();
    d_gh.bottomRows(h) = (da_n * r).matrix();

    w_h.grad.noalias() += d_gh * cache.h_prev.middleCols(c0, B).transpose();
    b_h.grad.col(0) += d_gh.rowwise().sum();
    d_prev.noalias() += w_h.value.transpose() * d_gh;
    carry = std::move(d_prev);
  }
  w_x.grad.noalias() += d_gx * x.transpose();
  b_x.grad.col(0) += d_gx.rowwise().sum();
  return w_x.value.transpose() * d_gx;
}

BiGruLayer::BiGruLayer(std::string name, int input_dim, int hidden_per_direction)
    : fwd(name + ".fwd", input_dim, hidden_per_direction, false),
      bwd(name + ".bwd", input_dim, hidden_per_direction, true) {}

void BiGruLayer::init(Rng& rng) {
  fwd.init(rng);
  bwd.init(rng);
}

Matrix BiGruLayer::forward(const Matrix& x, const Matrix& real, SequenceShape shape,
                           Cache* cache) const {
  Matrix out(output_dim(), x.cols());
  const int h = fwd.hidden_dim();
  out.topRows(h) = fwd.forward(x, real, shape, cache ? &cache->fwd : nullptr);
  out.bottomRows(h) = bwd.forward(x, real, shape, cache ? &cache->bwd : nullptr);
  return out;
}

Matrix BiGruLayer::backward(const Matrix& x, const Matrix& real, SequenceShape shape,
                            const Cache& cache, const Matrix& d_out) {
  const int h = fwd.hidden_dim();
  Matrix dx = fwd.backward(x, real, shape, cache.fwd, d_out.topRows(h));
  dx += bwd.backward(x, real, shape, cache.bwd, d_out.bottomRows(h));
  return dx;
}

std::vector<Param*> BiGruLayer::parameters() {
  return {&fwd.w_x, &fwd.w_h, &fwd.b_x, &fwd.b_h, &bwd.w_x, &bwd.w_h, &bwd.b_x, &bwd.b_h};
}

Eigen::Index BiGruLayer::parameter_count() const {
  return 2 * (fwd.w_x.size() + fwd.w_h.size() + fwd.b_x.size() + fwd.b_h.size());
}

Matrix EncoderStack::forward(const Matrix& x, const Matrix& real, SequenceShape shape,
                             Cache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->layers.assign(layers_.size(), {});
  }
  Matrix cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix next = layers_[i]->forward(cur, real, shape, cache ? &cache->layers[i] : nullptr);
    if (cache) cache->inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  return cur;
}

Matrix EncoderStack::backward(const Matrix& real, SequenceShape shape, const Cache& cache,
                              const Matrix& d_out) {
  Matrix grad = d_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    grad = layers_[i]->backward(cache.inputs[i], real, shape, cache.layers[i], grad);
  }
  return grad;
}

MaxPool max_pool(const Matrix& states, const Matrix& real, SequenceShape shape) {
  const Eigen::Index F = states.rows();
  MaxPool pool;
  pool.pooled = Matrix::Zero(F, shape.batch);
  pool.argmax = Eigen::MatrixXi::Constant(F, shape.batch, -1);
  for (int b = 0; b < shape.batch; ++b) {
    for (int t = 0; t < shape.steps; ++t) {
      if (real(t, b) == 0.0) continue;
      const Eigen::Index col = static_cast<Eigen::Index>(t) * shape.batch + b;
      for (Eigen::Index f = 0; f < F; ++f) {
        if (pool.argmax(f, b) < 0 || states(f, col) > pool.pooled(f, b)) {
          pool.pooled(f, b) = states(f, col);
          pool.argmax(f, b) = static_cast<int>(col);
        }
      }
    }
  }
  return pool;
}

Matrix max_pool_backward(const MaxPool& pool, const Matrix& d_pooled, Eigen::Index state_cols) {
  Matrix d_states = Matrix::Zero(pool.pooled.rows(), state_cols);
  for (Eigen::Index b = 0; b < pool.argmax.cols(); ++b) {
    for (Eigen::Index f = 0; f < pool.argmax.rows(); ++f) {
      const int col = pool.argmax(f, b);
      if (col >= 0) d_states(f, col) += d_pooled(f, b);
    }
  }
  return d_states;
}

}  // namespace rationalift
