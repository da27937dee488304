#include "rdmt/tape.hpp"

#include <cmath>

#include "rdmt/hash.hpp"
#include "rdmt/kernels.hpp"

namespace rdmt::nd {

namespace {

constexpr double kBceEps = 1e-12;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Id Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

std::span<const double> Tape::value(Id id) const {
  const Node& n = at(id);
  return {data_of(n), static_cast<std::size_t>(n.shape.numel())};
}

std::span<const double> Tape::grad(Id id) const {
  const Node& n = at(id);
  if (n.op == Op::kLeaf) return {n.external->grad.data(), n.external->grad.size()};
  return {n.grad.data(), n.grad.size()};
}

void Tape::reset() { nodes_.clear(); }

Tape::Id Tape::leaf(Tensor* t) {
  Node n;
  n.op = Op::kLeaf;
  n.shape = t->shape;
  n.external = t;
  return push(std::move(n));
}

Tape::Id Tape::constant(Shape s, std::span<const double> values) {
  Node n;
  n.op = Op::kConstant;
  n.shape = s;
  n.value.assign(values.begin(), values.end());
  if (n.value.size() != static_cast<std::size_t>(s.numel())) {
    throw ShapeMismatch("constant: " + std::to_string(values.size()) +
                        " values for shape " + s.str());
  }
  return push(std::move(n));
}

Tape::Id Tape::zeros(Shape s) {
  Node n;
  n.op = Op::kConstant;
  n.shape = s;
  n.value.assign(static_cast<std::size_t>(s.numel()), 0.0);
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.shape.cols != nb.shape.rows) {
    throw ShapeMismatch("matmul: " + na.shape.str() + " * " + nb.shape.str());
  }
  Node n;
  n.op = Op::kMatmul;
  n.shape = {na.shape.rows, nb.shape.cols};
  n.a = a;
  n.b = b;
  n.value.assign(static_cast<std::size_t>(n.shape.numel()), 0.0);
  const double* A = data_of(na);
  const double* B = data_of(nb);
  const std::int64_t m = na.shape.rows, k = na.shape.cols, p = nb.shape.cols;
  // ikj: C[i,:] += A[i,k] * B[k,:]. Lane-independent, so the kernel backends
  // agree bitwise.
  for (std::int64_t i = 0; i < m; ++i) {
    double* c_row = n.value.data() + i * p;
    const double* a_row = A + i * k;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      kern::axpy(c_row, a_row[kk], B + kk * p, static_cast<std::size_t>(p));
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  check_same_shape(na.shape, nb.shape, "add");
  Node n;
  n.op = Op::kAdd;
  n.shape = na.shape;
  n.a = a;
  n.b = b;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  kern::vadd(n.value.data(), data_of(na), data_of(nb), n.value.size());
  return push(std::move(n));
}

Tape::Id Tape::add_bias_rows(Id m, Id bias) {
  const Node& nm = at(m);
  const Node& nb = at(bias);
  if (nb.shape.rows != 1 || nb.shape.cols != nm.shape.cols) {
    throw ShapeMismatch("add_bias_rows: " + nm.shape.str() + " + " + nb.shape.str());
  }
  Node n;
  n.op = Op::kAddBiasRows;
  n.shape = nm.shape;
  n.a = m;
  n.b = bias;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* M = data_of(nm);
  const double* B = data_of(nb);
  const std::int64_t cols = n.shape.cols;
  for (std::int64_t r = 0; r < n.shape.rows; ++r) {
    kern::vadd(n.value.data() + r * cols, M + r * cols, B, static_cast<std::size_t>(cols));
  }
  return push(std::move(n));
}

Tape::Id Tape::add_const(Id a, double c) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kAddConst;
  n.shape = na.shape;
  n.a = a;
  n.c0 = c;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* A = data_of(na);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = A[i] + c;
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  check_same_shape(na.shape, nb.shape, "mul");
  Node n;
  n.op = Op::kMul;
  n.shape = na.shape;
  n.a = a;
  n.b = b;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  kern::vmul(n.value.data(), data_of(na), data_of(nb), n.value.size());
  return push(std::move(n));
}

Tape::Id Tape::sigmoid(Id a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSigmoid;
  n.shape = na.shape;
  n.a = a;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* A = data_of(na);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = stable_sigmoid(A[i]);
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kTanh;
  n.shape = na.shape;
  n.a = a;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* A = data_of(na);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::tanh(A[i]);
  return push(std::move(n));
}

Tape::Id Tape::transpose(Id a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kTranspose;
  n.shape = {na.shape.cols, na.shape.rows};
  n.a = a;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* A = data_of(na);
  for (std::int64_t r = 0; r < na.shape.rows; ++r) {
    for (std::int64_t c = 0; c < na.shape.cols; ++c) {
      n.value[static_cast<std::size_t>(c * na.shape.rows + r)] =
          A[r * na.shape.cols + c];
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSum;
  n.shape = scalar_shape();
  n.a = a;
  n.value = {kern::sum(data_of(na), static_cast<std::size_t>(na.shape.numel()))};
  return push(std::move(n));
}

Tape::Id Tape::div_scalar(Id x, Id s) {
  const Node& nx = at(x);
  const Node& ns = at(s);
  if (ns.shape != scalar_shape()) {
    throw ShapeMismatch("div_scalar: divisor must be 1x1, got " + ns.shape.str());
  }
  Node n;
  n.op = Op::kDivScalar;
  n.shape = nx.shape;
  n.a = x;
  n.b = s;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* X = data_of(nx);
  const double sv = data_of(ns)[0];
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = X[i] / sv;
  return push(std::move(n));
}

Tape::Id Tape::mean_rows(Id a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kMeanRows;
  n.shape = {1, na.shape.cols};
  n.a = a;
  n.value.assign(static_cast<std::size_t>(na.shape.cols), 0.0);
  const double* A = data_of(na);
  for (std::int64_t r = 0; r < na.shape.rows; ++r) {
    kern::axpy(n.value.data(), 1.0, A + r * na.shape.cols,
               static_cast<std::size_t>(na.shape.cols));
  }
  kern::scale(n.value.data(), 1.0 / static_cast<double>(na.shape.rows), n.value.size());
  return push(std::move(n));
}

Tape::Id Tape::concat_cols(std::span<const Id> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no parts");
  std::int64_t rows = at(parts[0]).shape.rows;
  std::int64_t cols = 0;
  for (Id p : parts) {
    if (at(p).shape.rows != rows) {
      throw ShapeMismatch("concat_cols: row mismatch " + at(p).shape.str());
    }
    cols += at(p).shape.cols;
  }
  Node n;
  n.op = Op::kConcatCols;
  n.shape = {rows, cols};
  n.parts.assign(parts.begin(), parts.end());
  n.value.resize(static_cast<std::size_t>(rows * cols));
  std::int64_t offset = 0;
  for (Id p : parts) {
    const Node& np = at(p);
    const double* P = data_of(np);
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy(P + r * np.shape.cols, P + (r + 1) * np.shape.cols,
                n.value.data() + r * cols + offset);
    }
    offset += np.shape.cols;
  }
  return push(std::move(n));
}

Tape::Id Tape::concat_rows(std::span<const Id> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no parts");
  std::int64_t cols = at(parts[0]).shape.cols;
  std::int64_t rows = 0;
  for (Id p : parts) {
    if (at(p).shape.cols != cols) {
      throw ShapeMismatch("concat_rows: col mismatch " + at(p).shape.str());
    }
    rows += at(p).shape.rows;
  }
  Node n;
  n.op = Op::kConcatRows;
  n.shape = {rows, cols};
  n.parts.assign(parts.begin(), parts.end());
  n.value.resize(static_cast<std::size_t>(rows * cols));
  double* dst = n.value.data();
  for (Id p : parts) {
    const Node& np = at(p);
    const double* P = data_of(np);
    dst = std::copy(P, P + np.shape.numel(), dst);
  }
  return push(std::move(n));
}

Tape::Id Tape::embedding_rows(Tensor* table, std::span<const std::int32_t> ids) {
  const std::int64_t d = table->shape.cols;
  Node n;
  n.op = Op::kEmbedding;
  n.shape = {static_cast<std::int64_t>(ids.size()), d};
  n.external = table;  // scatter target for backward
  n.ids.assign(ids.begin(), ids.end());
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= table->shape.rows) {
      throw ShapeMismatch("embedding_rows: id " + std::to_string(ids[r]) +
                          " outside table " + table->shape.str());
    }
    std::copy(table->row(ids[r]), table->row(ids[r]) + d, n.value.data() + r * d);
  }
  return push(std::move(n));
}

Tape::Id Tape::dropout(Id a, double rate, std::uint64_t seed, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ShapeMismatch("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  const Node& na = at(a);
  Node n;
  n.op = Op::kDropout;
  n.shape = na.shape;
  n.a = a;
  n.c0 = rate;
  n.value.resize(static_cast<std::size_t>(n.shape.numel()));
  const double* A = data_of(na);
  if (!training || rate == 0.0) {
    std::copy(A, A + n.value.size(), n.value.begin());
  } else {
    Rng rng(seed);
    n.mask.resize(n.value.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      n.mask[i] = rng.next_double() < rate ? 0.0 : keep_scale;
      n.value[i] = A[i] * n.mask[i];
    }
  }
  return push(std::move(n));
}

Tape::Id Tape::bce(Id p, double y) {
  const Node& np = at(p);
  if (np.shape != scalar_shape()) {
    throw ShapeMismatch("bce: probability must be 1x1, got " + np.shape.str());
  }
  Node n;
  n.op = Op::kBce;
  n.shape = scalar_shape();
  n.a = p;
  n.c0 = y;
  double pv = data_of(np)[0];
  pv = std::min(std::max(pv, kBceEps), 1.0 - kBceEps);
  n.value = {-(y * std::log(pv) + (1.0 - y) * std::log(1.0 - pv))};
  return push(std::move(n));
}

double* Tape::grad_dst(Id id, std::size_t expected) {
  Node& n = at(id);
  if (n.op == Op::kLeaf) {
    if (!n.external->requires_grad) return nullptr;
    return n.external->grad.data();
  }
  if (n.op == Op::kConstant) return nullptr;
  if (n.grad.size() != expected) n.grad.assign(expected, 0.0);
  return n.grad.data();
}

void Tape::backward(Id loss) {
  Node& ln = at(loss);
  if (ln.shape != scalar_shape()) {
    throw ShapeMismatch("backward: loss must be 1x1, got " + ln.shape.str());
  }
  // Zero internal grads (leaf tensors accumulate across calls by design).
  for (Node& n : nodes_) n.grad.clear();
  ln.grad.assign(1, 1.0);

  for (Id id = loss; id >= 0; --id) {
    Node& n = at(id);
    if (n.grad.empty()) continue;  // not on any path to the loss
    backprop_node(n);
  }
}

void Tape::backprop_node(Node& n) {
  const double* g = n.grad.data();
  const std::size_t numel = n.grad.size();

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;

    case Op::kMatmul: {
      const Node& na = at(n.a);
      const Node& nb = at(n.b);
      const std::int64_t m = na.shape.rows, k = na.shape.cols, p = nb.shape.cols;
      const double* A = data_of(na);
      const double* B = data_of(nb);
      double* dA = grad_dst(n.a, static_cast<std::size_t>(m * k));
      double* dB = grad_dst(n.b, static_cast<std::size_t>(k * p));
      if (dA) {
        // dA[i,k] += dot(dC[i,:], B[k,:])
        for (std::int64_t i = 0; i < m; ++i) {
          const double* g_row = g + i * p;
          for (std::int64_t kk = 0; kk < k; ++kk) {
            dA[i * k + kk] += kern::dot(g_row, B + kk * p, static_cast<std::size_t>(p));
          }
        }
      }
      if (dB) {
        // dB[k,:] += A[i,k] * dC[i,:]
        for (std::int64_t i = 0; i < m; ++i) {
          const double* g_row = g + i * p;
          const double* a_row = A + i * k;
          for (std::int64_t kk = 0; kk < k; ++kk) {
            kern::axpy(dB + kk * p, a_row[kk], g_row, static_cast<std::size_t>(p));
          }
        }
      }
      break;
    }

    case Op::kAdd: {
      if (double* dA = grad_dst(n.a, numel)) kern::axpy(dA, 1.0, g, numel);
      if (double* dB = grad_dst(n.b, numel)) kern::axpy(dB, 1.0, g, numel);
      break;
    }

    case Op::kAddBiasRows: {
      const std::int64_t cols = n.shape.cols;
      if (double* dM = grad_dst(n.a, numel)) kern::axpy(dM, 1.0, g, numel);
      if (double* dBias = grad_dst(n.b, static_cast<std::size_t>(cols))) {
        for (std::int64_t r = 0; r < n.shape.rows; ++r) {
          kern::axpy(dBias, 1.0, g + r * cols, static_cast<std::size_t>(cols));
        }
      }
      break;
    }

    case Op::kAddConst: {
      if (double* dA = grad_dst(n.a, numel)) kern::axpy(dA, 1.0, g, numel);
      break;
    }

    case Op::kMul: {
      const Node& na = at(n.a);
      const Node& nb = at(n.b);
      if (double* dA = grad_dst(n.a, numel)) kern::vaddmul(dA, g, data_of(nb), numel);
      if (double* dB = grad_dst(n.b, numel)) kern::vaddmul(dB, g, data_of(na), numel);
      break;
    }

    case Op::kSigmoid: {
      if (double* dA = grad_dst(n.a, numel)) {
        for (std::size_t i = 0; i < numel; ++i) {
          dA[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        }
      }
      break;
    }

    case Op::kTanh: {
      if (double* dA = grad_dst(n.a, numel)) {
        for (std::size_t i = 0; i < numel; ++i) {
          dA[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        }
      }
      break;
    }

    case Op::kTranspose: {
      const Node& na = at(n.a);
      if (double* dA = grad_dst(n.a, static_cast<std::size_t>(na.shape.numel()))) {
        for (std::int64_t r = 0; r < n.shape.rows; ++r) {
          for (std::int64_t c = 0; c < n.shape.cols; ++c) {
            dA[c * n.shape.rows + r] += g[r * n.shape.cols + c];
          }
        }
      }
      break;
    }

    case Op::kSum: {
      const Node& na = at(n.a);
      const std::size_t an = static_cast<std::size_t>(na.shape.numel());
      if (double* dA = grad_dst(n.a, an)) {
        for (std::size_t i = 0; i < an; ++i) dA[i] += g[0];
      }
      break;
    }

    case Op::kDivScalar: {
      const Node& nx = at(n.a);
      const Node& ns = at(n.b);
      const double sv = data_of(ns)[0];
      const double* X = data_of(nx);
      if (double* dX = grad_dst(n.a, numel)) kern::axpy(dX, 1.0 / sv, g, numel);
      if (double* dS = grad_dst(n.b, 1)) {
        dS[0] -= kern::dot(g, X, numel) / (sv * sv);
      }
      break;
    }

    case Op::kMeanRows: {
      const Node& na = at(n.a);
      const std::int64_t rows = na.shape.rows, cols = na.shape.cols;
      if (double* dA = grad_dst(n.a, static_cast<std::size_t>(rows * cols))) {
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r) {
          kern::axpy(dA + r * cols, inv, g, static_cast<std::size_t>(cols));
        }
      }
      break;
    }

    case Op::kConcatCols: {
      std::int64_t offset = 0;
      for (Id p : n.parts) {
        const Node& np = at(p);
        if (double* dP = grad_dst(p, static_cast<std::size_t>(np.shape.numel()))) {
          for (std::int64_t r = 0; r < np.shape.rows; ++r) {
            kern::axpy(dP + r * np.shape.cols, 1.0,
                       g + r * n.shape.cols + offset,
                       static_cast<std::size_t>(np.shape.cols));
          }
        }
        offset += np.shape.cols;
      }
      break;
    }

    case Op::kConcatRows: {
      std::int64_t row0 = 0;
      for (Id p : n.parts) {
        const Node& np = at(p);
        if (double* dP = grad_dst(p, static_cast<std::size_t>(np.shape.numel()))) {
          kern::axpy(dP, 1.0, g + row0 * n.shape.cols,
                     static_cast<std::size_t>(np.shape.numel()));
        }
        row0 += np.shape.rows;
      }
      break;
    }

    case Op::kEmbedding: {
      Tensor* table = n.external;
      if (table->requires_grad) {
        const std::int64_t d = table->shape.cols;
        for (std::size_t r = 0; r < n.ids.size(); ++r) {
          kern::axpy(table->grad_row(n.ids[r]), 1.0, g + r * d,
                     static_cast<std::size_t>(d));
        }
      }
      break;
    }

    case Op::kDropout: {
      if (double* dA = grad_dst(n.a, numel)) {
        if (n.mask.empty()) {
          kern::axpy(dA, 1.0, g, numel);
        } else {
          kern::vaddmul(dA, g, n.mask.data(), numel);
        }
      }
      break;
    }

    case Op::kBce: {
      const Node& np = at(n.a);
      double pv = data_of(np)[0];
      pv = std::min(std::max(pv, kBceEps), 1.0 - kBceEps);
      if (double* dP = grad_dst(n.a, 1)) {
        dP[0] += g[0] * (pv - n.c0) / (pv * (1.0 - pv));
      }
      break;
    }
  }
}

LstmCellOut lstm_cell(Tape& tape, Tape::Id x, Tape::Id h_prev, Tape::Id c_prev,
                      const LstmCellWeights& w) {
  auto gate_pre = [&](int gi) {
    Tape::Id from_x = tape.matmul(x, tape.leaf(w.w_x[gi]));
    Tape::Id from_h = tape.matmul(h_prev, tape.leaf(w.w_h[gi]));
    return tape.add(tape.add(from_x, from_h), tape.leaf(w.b[gi]));
  };
  Tape::Id gate_i = tape.sigmoid(gate_pre(0));
  Tape::Id gate_f = tape.sigmoid(gate_pre(1));
  Tape::Id gate_o = tape.sigmoid(gate_pre(2));
  Tape::Id gate_g = tape.tanh(gate_pre(3));
  Tape::Id c = tape.add(tape.mul(gate_f, c_prev), tape.mul(gate_i, gate_g));
  Tape::Id h = tape.mul(gate_o, tape.tanh(c));
  return {h, c};
}

}  // namespace rdmt::nd
