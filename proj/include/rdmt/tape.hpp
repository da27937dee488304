#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdmt/tensor.hpp"

namespace rdmt::nd {

// Reverse-mode differentiation over an explicit computation tape. The graph
// is rebuilt per example (histories vary in length); reset() keeps node
// capacity across examples.
//
// Convention: vectors are 1xN rows; matmul is the only rank-changing op.
// Parameters enter as leaf() nodes (gradients accumulate straight into the
// external Tensor) or through embedding_rows() for table gathers.
class Tape {
 public:
  using Id = std::int32_t;

  // External parameter; t must outlive the tape and have requires_grad set
  // if its gradient is wanted.
  Id leaf(Tensor* t);

  // Constant (non-differentiable) value.
  Id constant(Shape s, std::span<const double> values);
  Id zeros(Shape s);

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  // m is n x k, bias is 1 x k, added to every row.
  Id add_bias_rows(Id m, Id bias);
  Id add_const(Id a, double c);
  Id mul(Id a, Id b);
  Id sigmoid(Id a);
  Id tanh(Id a);
  Id transpose(Id a);
  // Sum of all elements, 1x1.
  Id sum(Id a);
  // x / s elementwise; s is a differentiable 1x1 node.
  Id div_scalar(Id x, Id s);
  // Column means: n x d -> 1 x d.
  Id mean_rows(Id a);
  // Horizontal concatenation (same rows).
  Id concat_cols(std::span<const Id> parts);
  // Vertical stack (same cols).
  Id concat_rows(std::span<const Id> parts);
  // Gather rows of an external table: ids.size() x d.
  Id embedding_rows(Tensor* table, std::span<const std::int32_t> ids);
  // Inverted dropout: zeroes with probability rate, scales survivors by
  // 1/(1-rate). Identity when !training or rate == 0.
  Id dropout(Id a, double rate, std::uint64_t seed, bool training);
  // Binary cross-entropy of probability p (1x1) against label y, with p
  // clamped to [1e-12, 1 - 1e-12].
  Id bce(Id p, double y);

  const Shape& shape(Id id) const { return nodes_[static_cast<std::size_t>(id)].shape; }
  std::span<const double> value(Id id) const;
  double scalar_value(Id id) const { return value(id)[0]; }

  // Reverse sweep from a 1x1 loss node; accumulates into leaf tensors' grad.
  void backward(Id loss);

  // Gradient of an internal node after backward (testing hook).
  std::span<const double> grad(Id id) const;

  void reset();
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConstant, kMatmul, kAdd, kAddBiasRows, kAddConst, kMul,
    kSigmoid, kTanh, kTranspose, kSum, kDivScalar, kMeanRows,
    kConcatCols, kConcatRows, kEmbedding, kDropout, kBce,
  };

  struct Node {
    Op op;
    Shape shape;
    Id a = -1;
    Id b = -1;
    std::vector<Id> parts;             // concat inputs
    Tensor* external = nullptr;        // leaf / embedding table
    std::vector<std::int32_t> ids;     // embedding row ids
    std::vector<double> value;         // unused for leaves
    std::vector<double> grad;
    std::vector<double> mask;          // dropout
    double c0 = 0.0;                   // op constant / label
  };

  Id push(Node&& n);
  Node& at(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
  // Leaves read through to the external tensor; every other node (including
  // embedding gathers, whose external is only the scatter target) owns its
  // value.
  const double* data_of(const Node& n) const {
    return n.op == Op::kLeaf ? n.external->data.data() : n.value.data();
  }
  void backprop_node(Node& n);
  double* grad_dst(Id id, std::size_t expected);

  std::vector<Node> nodes_;
};

// One LSTM cell step. Weight layout: w_x[g] is D x H, w_h[g] is H x H,
// b[g] is 1 x H, with gate order i, f, o, g. x is 1 x D; h_prev and c_prev
// are 1 x H rows.
struct LstmCellWeights {
  Tensor* w_x[4];
  Tensor* w_h[4];
  Tensor* b[4];
};

struct LstmCellOut {
  Tape::Id h;
  Tape::Id c;
};

LstmCellOut lstm_cell(Tape& tape, Tape::Id x, Tape::Id h_prev, Tape::Id c_prev,
                      const LstmCellWeights& w);

}  // namespace rdmt::nd
