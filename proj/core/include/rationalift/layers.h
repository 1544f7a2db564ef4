#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "rationalift/random.h"

namespace rationalift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A trainable tensor with its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
  void init_uniform(Rng& rng, double bound);
};

// y = W x + b, columns are independent inputs.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in, int out);

  void init(Rng& rng);
  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients; returns d/dx.
  Matrix backward(const Matrix& x, const Matrix& d_out);

  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }

  Param weight;
  Param bias;
};

// Sequences are stored as one matrix with T*B columns; column t*B + b holds
// step t of example b. `real` is the T x B indicator of non-pad positions.
struct SequenceShape {
  int steps = 0;
  int batch = 0;
};

// One direction of a gated recurrent unit. Gate rows are ordered
// [reset; update; candidate]:
//   r = sig(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = sig(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
// At pad positions the state is carried through unchanged.
class GruDirection {
 public:
  struct Cache {
    Matrix h_prev;  // hidden x T*B
    Matrix r, z, n, hn;
  };

  GruDirection() = default;
  GruDirection(std::string name, int input_dim, int hidden_dim, bool reverse);

  void init(Rng& rng);
  Matrix forward(const Matrix& x, const Matrix& real, SequenceShape shape, Cache* cache) const;
  Matrix backward(const Matrix& x, const Matrix& real, SequenceShape shape, const Cache& cache,
                  const Matrix& d_out);

  int input_dim() const { return static_cast<int>(w_x.value.cols()); }
  int hidden_dim() const { return static_cast<int>(w_h.value.cols()); }
  bool reverse() const { return reverse_; }

  Param w_x, w_h, b_x, b_h;

 private:
  bool reverse_ = false;
};

// Forward and backward directions, concatenated [forward; backward].
class BiGruLayer {
 public:
  struct Cache {
    GruDirection::Cache fwd, bwd;
  };

  BiGruLayer(std::string name, int input_dim, int hidden_per_direction);

  void init(Rng& rng);
  Matrix forward(const Matrix& x, const Matrix& real, SequenceShape shape, Cache* cache) const;
  Matrix backward(const Matrix& x, const Matrix& real, SequenceShape shape, const Cache& cache,
                  const Matrix& d_out);

  int input_dim() const { return fwd.input_dim(); }
  int output_dim() const { return 2 * fwd.hidden_dim(); }
  std::vector<Param*> parameters();
  Eigen::Index parameter_count() const;

  GruDirection fwd;
  GruDirection bwd;
};

// A stack of bidirectional layers. Layers are held by shared_ptr so two
// stacks can alias the same underlying parameters. An empty stack is the
// identity map.
class EncoderStack {
 public:
  struct Cache {
    std::vector<Matrix> inputs;
    std::vector<BiGruLayer::Cache> layers;
  };

  EncoderStack() = default;
  explicit EncoderStack(std::vector<std::shared_ptr<BiGruLayer>> layers)
      : layers_(std::move(layers)) {}

  Matrix forward(const Matrix& x, const Matrix& real, SequenceShape shape, Cache* cache) const;
  Matrix backward(const Matrix& real, SequenceShape shape, const Cache& cache, const Matrix& d_out);

  const std::vector<std::shared_ptr<BiGruLayer>>& layers() const { return layers_; }
  std::size_t depth() const { return layers_.size(); }
  int output_dim(int input_dim) const {
    return layers_.empty() ? input_dim : layers_.back()->output_dim();
  }

 private:
  std::vector<std::shared_ptr<BiGruLayer>> layers_;
};

// Coordinate-wise max over the real positions of each example; examples with
// no real positions pool to the zero vector.
struct MaxPool {
  Matrix pooled;                 // features x B
  Eigen::MatrixXi argmax;        // features x B, column index into states, -1 if none
};

MaxPool max_pool(const Matrix& states, const Matrix& real, SequenceShape shape);
Matrix max_pool_backward(const MaxPool& pool, const Matrix& d_pooled, Eigen::Index state_cols);

}  // namespace rationalift
