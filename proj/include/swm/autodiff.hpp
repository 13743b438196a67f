#pragma once

// Tape-based reverse-mode differentiation over small dense Eigen arrays.
//
// A BasicTape records every operation eagerly: values are computed when the
// op is called, and a backward closure is pushed onto the tape. Parameters
// live outside the tape in DiffArray objects; binding one with param() makes
// the tape read its values in place and accumulate gradients straight into
// its grad buffer.
//
// Arrays have rank 0 (scalar), 1 ({n}, stored 1 x n) or 2 ({r, c}).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swm::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

// Storage rows/cols for a logical shape.
inline std::pair<Index, Index> storage_dims(const Shape& shape) {
  switch (shape.size()) {
    case 0: return {1, 1};
    case 1: return {1, shape[0]};
    case 2: return {shape[0], shape[1]};
    default: throw ShapeError("rank > 2 not supported: " + to_string(shape));
  }
}

/// Dense float array with a gradient buffer of the same shape.
template <typename Scalar>
class DiffArray {
 public:
  using Matrix = MatrixX<Scalar>;

  DiffArray() : DiffArray(Shape{0}) {}

  explicit DiffArray(Shape shape) : shape_(std::move(shape)) {
    auto [r, c] = storage_dims(shape_);
    values_ = Matrix::Zero(r, c);
    grad_ = Matrix::Zero(r, c);
  }

  DiffArray(Shape shape, Matrix values) : DiffArray(std::move(shape)) {
    if (values.rows() != values_.rows() || values.cols() != values_.cols())
      throw ShapeError("values do not match shape " + to_string(shape_));
    values_ = std::move(values);
  }

  static DiffArray vector(std::initializer_list<Scalar> xs) {
    DiffArray a(Shape{static_cast<Index>(xs.size())});
    std::copy(xs.begin(), xs.end(), a.values_.data());
    return a;
  }

  static DiffArray matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    DiffArray a(Shape{r, c});
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw ShapeError("ragged matrix literal");
      std::copy(row.begin(), row.end(), a.values_.row(i++).data());
    }
    return a;
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }

  Matrix& values() { return values_; }
  const Matrix& values() const { return values_; }
  Matrix& grad() { return grad_; }
  const Matrix& grad() const { return grad_; }

  void zero_grad() { grad_.setZero(); }

 private:
  Shape shape_;
  Matrix values_;
  Matrix grad_;
};

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  using Matrix = MatrixX<Scalar>;

  Var() = default;
  Var(BasicTape<Scalar>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  BasicTape<Scalar>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Matrix& value() const { return tape_->value(id_); }
  const Shape& shape() const { return tape_->shape(id_); }
  Scalar item() const {
    if (value().size() != 1) throw ShapeError("item() on non-scalar " + to_string(shape()));
    return value()(0, 0);
  }
  bool valid() const { return tape_ != nullptr; }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = MatrixX<Scalar>;
  using VarT = Var<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, std::uint32_t)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  /// Leaf reading `p` in place; backward accumulates into p.grad().
  VarT param(DiffArray<Scalar>& p) {
    check_open();
    Node n;
    n.shape = p.shape();
    n.bound = &p;
    n.requires_grad = true;
    return push(std::move(n));
  }

  VarT constant(Shape shape, Matrix value) {
    check_open();
    auto [r, c] = storage_dims(shape);
    if (value.rows() != r || value.cols() != c)
      throw ShapeError("constant value does not match shape " + to_string(shape));
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    return push(std::move(n));
  }

  VarT constant(const DiffArray<Scalar>& a) { return constant(a.shape(), a.values()); }

  /// Records an op result. `inputs` are the nodes backward may write to.
  VarT record(Shape shape, Matrix value, std::initializer_list<VarT> inputs, BackwardFn backward) {
    check_open();
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    for (const VarT& in : inputs) {
      if (&in.tape() != this) throw std::invalid_argument("operands belong to different tapes");
      n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Matrix& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.bound ? n.bound->values() : n.value;
  }
  const Shape& shape(std::uint32_t id) const { return nodes_[id].shape; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator of node `id`; only meaningful during backward.
  Matrix& grad(std::uint32_t id) {
    Node& n = nodes_[id];
    return n.bound ? n.bound->grad() : n.grad;
  }

  /// Gradient of a non-bound node after backward (zero matrix if unreached).
  const Matrix& grad_of(const VarT& v) { return grad(v.id()); }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Intermediate gradients are reset on
  /// every call; bound parameters accumulate. The tape is closed to further
  /// recording afterwards, so gradients can never feed a second derivative.
  void backward(const VarT& loss) {
    if (&loss.tape() != this) throw std::invalid_argument("loss belongs to another tape");
    if (value(loss.id()).size() != 1)
      throw ShapeError("backward requires a scalar loss, got " + to_string(shape(loss.id())));
    closed_ = true;
    for (std::uint32_t i = 0; i <= loss.id(); ++i) {
      Node& n = nodes_[i];
      if (!n.bound && n.requires_grad) {
        auto [r, c] = storage_dims(n.shape);
        n.grad = Matrix::Zero(r, c);
      }
    }
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id())(0, 0) += Scalar(1);
    for (std::int64_t i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    }
  }

  bool closed() const { return closed_; }

 private:
  struct Node {
    Shape shape;
    Matrix value;
    Matrix grad;
    DiffArray<Scalar>* bound = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_open() const {
    if (closed_)
      throw std::logic_error(
          "tape already differentiated: recording after backward (higher-order "
          "derivatives) is not supported");
  }

  VarT push(Node n) {
    nodes_.push_back(std::move(n));
    return VarT(this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// Operations

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

template <typename Scalar>
void require_finite(const char* op, const MatrixX<Scalar>& m) {
  if (!m.allFinite()) throw std::domain_error(std::string(op) + ": non-finite input");
}

// Shape of the 2-D view used by matmul/transpose.
inline Shape as_matrix(const Shape& s) {
  auto [r, c] = storage_dims(s);
  return {r, c};
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  MatrixX<Scalar> out = av * bv;
  // A rank-1 left operand behaves as a row vector and yields a rank-1 result.
  Shape shape = a.shape().size() == 1 ? Shape{out.cols()} : Shape{out.rows(), out.cols()};
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(shape), std::move(out), {a, b},
                         [ia, ib](BasicTape<Scalar>& t, std::uint32_t self) {
                           const auto& g = t.grad(self);
                           if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
                           if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
                         });
}

/// 2-D transpose; a rank-1 {n} becomes the column {n, 1}.
template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().transpose();
  Shape shape = a.shape().size() == 1 ? Shape{a.shape()[0], 1} : Shape{out.rows(), out.cols()};
  const auto ia = a.id();
  return a.tape().record(std::move(shape), std::move(out), {a},
                         [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                           t.grad(ia) += t.grad(self).transpose();
                         });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape) {
  if (numel(shape) != a.value().size())
    throw ShapeError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  auto [r, c] = storage_dims(shape);
  MatrixX<Scalar> out = Eigen::Map<const MatrixX<Scalar>>(a.value().data(), r, c);
  const auto ia = a.id();
  return a.tape().record(std::move(shape), std::move(out), {a},
                         [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                           auto& ga = t.grad(ia);
                           const auto& g = t.grad(self);
                           Eigen::Map<MatrixX<Scalar>>(ga.data(), ga.rows(), ga.cols()) +=
                               Eigen::Map<const MatrixX<Scalar>>(g.data(), ga.rows(), ga.cols());
                         });
}

enum class Elementwise { kTanh, kSigmoid, kMul, kAdd, kSub };

template <typename Scalar>
Var<Scalar> elementwise(Elementwise kind, const Var<Scalar>& a) {
  const auto ia = a.id();
  switch (kind) {
    case Elementwise::kTanh: {
      MatrixX<Scalar> out = a.value().array().tanh().matrix();
      return a.tape().record(a.shape(), std::move(out), {a},
                             [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& y = t.value(self).array();
                               t.grad(ia).array() += t.grad(self).array() * (Scalar(1) - y * y);
                             });
    }
    case Elementwise::kSigmoid: {
      MatrixX<Scalar> out =
          (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
      return a.tape().record(a.shape(), std::move(out), {a},
                             [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& y = t.value(self).array();
                               t.grad(ia).array() += t.grad(self).array() * y * (Scalar(1) - y);
                             });
    }
    default:
      throw std::invalid_argument("elementwise: binary kind needs two operands");
  }
}

template <typename Scalar>
Var<Scalar> elementwise(Elementwise kind, const Var<Scalar>& a, const Var<Scalar>& b) {
  const auto ia = a.id(), ib = b.id();
  switch (kind) {
    case Elementwise::kMul: {
      detail::require_same_shape("mul", a, b);
      MatrixX<Scalar> out = a.value().cwiseProduct(b.value());
      return a.tape().record(a.shape(), std::move(out), {a, b},
                             [ia, ib](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& g = t.grad(self);
                               if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
                               if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
                             });
    }
    case Elementwise::kAdd: {
      detail::require_same_shape("add", a, b);
      MatrixX<Scalar> out = a.value() + b.value();
      return a.tape().record(a.shape(), std::move(out), {a, b},
                             [ia, ib](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& g = t.grad(self);
                               if (t.requires_grad(ia)) t.grad(ia) += g;
                               if (t.requires_grad(ib)) t.grad(ib) += g;
                             });
    }
    case Elementwise::kSub: {
      detail::require_same_shape("sub", a, b);
      MatrixX<Scalar> out = a.value() - b.value();
      return a.tape().record(a.shape(), std::move(out), {a, b},
                             [ia, ib](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& g = t.grad(self);
                               if (t.requires_grad(ia)) t.grad(ia) += g;
                               if (t.requires_grad(ib)) t.grad(ib) -= g;
                             });
    }
    default:
      throw std::invalid_argument("elementwise: unary kind given two operands");
  }
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) { return elementwise(Elementwise::kTanh, a); }
template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) { return elementwise(Elementwise::kSigmoid, a); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return elementwise(Elementwise::kMul, a, b); }
template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return elementwise(Elementwise::kAdd, a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return elementwise(Elementwise::kSub, a, b); }

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  MatrixX<Scalar> out = a.value() * s;
  const auto ia = a.id();
  return a.tape().record(a.shape(), std::move(out), {a},
                         [ia, s](BasicTape<Scalar>& t, std::uint32_t self) { t.grad(ia) += s * t.grad(self); });
}

/// Adds the rank-1 `bias` {n} to every row of `a` ({m, n} or {n}).
template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& a, const Var<Scalar>& bias) {
  if (bias.shape().size() != 1 || a.value().cols() != bias.shape()[0])
    throw ShapeError("add_bias: " + to_string(a.shape()) + " + " + to_string(bias.shape()));
  MatrixX<Scalar> out = a.value().rowwise() + bias.value().row(0);
  const auto ia = a.id(), ib = bias.id();
  return a.tape().record(a.shape(), std::move(out), {a, bias},
                         [ia, ib](BasicTape<Scalar>& t, std::uint32_t self) {
                           const auto& g = t.grad(self);
                           if (t.requires_grad(ia)) t.grad(ia) += g;
                           if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
                         });
}

/// Softmax over all elements, shape preserved. Max-subtracted.
template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& logits) {
  const auto& z = logits.value();
  if (z.size() < 1) throw ShapeError("softmax: empty input");
  detail::require_finite<Scalar>("softmax", z);
  MatrixX<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  e /= e.sum();
  const auto ia = logits.id();
  return logits.tape().record(logits.shape(), std::move(e), {logits},
                              [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                                const auto& y = t.value(self);
                                const auto& g = t.grad(self);
                                const Scalar dot = (g.array() * y.array()).sum();
                                t.grad(ia).array() += y.array() * (g.array() - dot);
                              });
}

/// -log softmax(logits)[label], fused. Returns a scalar.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, Index label) {
  const auto& z = logits.value();
  if (label < 0 || label >= z.size())
    throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                            " outside " + to_string(logits.shape()));
  detail::require_finite<Scalar>("softmax_cross_entropy", z);
  const Scalar zmax = z.maxCoeff();
  const Scalar lse = zmax + std::log((z.array() - zmax).exp().sum());
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = lse - z.data()[label];
  const auto ia = logits.id();
  return logits.tape().record(Shape{}, std::move(out), {logits},
                              [ia, lse, label](BasicTape<Scalar>& t, std::uint32_t self) {
                                const Scalar g = t.grad(self)(0, 0);
                                auto& ga = t.grad(ia);
                                const auto& zz = t.value(ia);
                                ga.array() += g * (zz.array() - lse).exp();
                                ga.data()[label] -= g;
                              });
}

/// Concatenation along `axis`. Rank-1 inputs concatenate along axis 0.
template <typename Scalar>
Var<Scalar> concat(const Var<Scalar>& a, const Var<Scalar>& b, int axis = 0) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto mismatch = [&] {
    return ShapeError("concat(axis=" + std::to_string(axis) + "): " + to_string(sa) + " vs " +
                      to_string(sb));
  };
  if (sa.size() != sb.size() || sa.empty()) throw mismatch();
  const auto& av = a.value();
  const auto& bv = b.value();
  MatrixX<Scalar> out;
  Shape shape;
  bool along_cols;
  if (sa.size() == 1) {
    if (axis != 0) throw mismatch();
    along_cols = true;
    shape = {sa[0] + sb[0]};
  } else if (axis == 0) {
    if (sa[1] != sb[1]) throw mismatch();
    along_cols = false;
    shape = {sa[0] + sb[0], sa[1]};
  } else if (axis == 1) {
    if (sa[0] != sb[0]) throw mismatch();
    along_cols = true;
    shape = {sa[0], sa[1] + sb[1]};
  } else {
    throw mismatch();
  }
  if (along_cols) {
    out.resize(av.rows(), av.cols() + bv.cols());
    out << av, bv;
  } else {
    out.resize(av.rows() + bv.rows(), av.cols());
    out << av, bv;
  }
  const auto ia = a.id(), ib = b.id();
  const Index ar = av.rows(), ac = av.cols();
  return a.tape().record(std::move(shape), std::move(out), {a, b},
                         [ia, ib, ar, ac, along_cols](BasicTape<Scalar>& t, std::uint32_t self) {
                           const auto& g = t.grad(self);
                           if (along_cols) {
                             if (t.requires_grad(ia)) t.grad(ia) += g.leftCols(ac);
                             if (t.requires_grad(ib)) t.grad(ib) += g.rightCols(g.cols() - ac);
                           } else {
                             if (t.requires_grad(ia)) t.grad(ia) += g.topRows(ar);
                             if (t.requires_grad(ib)) t.grad(ib) += g.bottomRows(g.rows() - ar);
                           }
                         });
}

/// Embedding lookup: rows `ids` of a {V, d} table as an {L, d} array.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::span<const Index> ids) {
  const auto& tv = table.value();
  if (table.shape().size() != 2) throw ShapeError("gather_rows: table must be 2-D, got " + to_string(table.shape()));
  MatrixX<Scalar> out(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows())
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table " +
                              to_string(table.shape()));
    out.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  const auto it = table.id();
  std::vector<Index> rows(ids.begin(), ids.end());
  Shape shape{static_cast<Index>(ids.size()), tv.cols()};
  return table.tape().record(std::move(shape), std::move(out), {table},
                             [it, rows = std::move(rows)](BasicTape<Scalar>& t, std::uint32_t self) {
                               const auto& g = t.grad(self);
                               auto& gt = t.grad(it);
                               for (std::size_t i = 0; i < rows.size(); ++i)
                                 gt.row(rows[i]) += g.row(static_cast<Index>(i));
                             });
}

/// Row `i` of a 2-D array as a rank-1 array.
template <typename Scalar>
Var<Scalar> row(const Var<Scalar>& a, Index i) {
  if (a.shape().size() != 2 || i < 0 || i >= a.shape()[0])
    throw ShapeError("row " + std::to_string(i) + " of " + to_string(a.shape()));
  MatrixX<Scalar> out = a.value().row(i);
  const auto ia = a.id();
  return a.tape().record(Shape{a.shape()[1]}, std::move(out), {a},
                         [ia, i](BasicTape<Scalar>& t, std::uint32_t self) {
                           t.grad(ia).row(i) += t.grad(self).row(0);
                         });
}

/// Stacks equally sized rank-1 arrays into a {k, n} array.
template <typename Scalar>
Var<Scalar> stack_rows(std::span<const Var<Scalar>> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const Index n = rows[0].value().size();
  MatrixX<Scalar> out(static_cast<Index>(rows.size()), n);
  std::vector<std::uint32_t> ids;
  ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = rows[i].value();
    if (rows[i].shape().size() != 1 || v.size() != n)
      throw ShapeError("stack_rows: row " + std::to_string(i) + " has shape " + to_string(rows[i].shape()) +
                       ", expected [" + std::to_string(n) + "]");
    if (&rows[i].tape() != &rows[0].tape()) throw std::invalid_argument("operands belong to different tapes");
    out.row(static_cast<Index>(i)) = v.row(0);
    ids.push_back(rows[i].id());
  }
  auto& tape = rows[0].tape();
  bool needs = false;
  for (auto id : ids) needs = needs || tape.requires_grad(id);
  // record() derives requires_grad from the listed inputs; pass the first
  // differentiable row so the flag is right, the closure covers the rest.
  Var<Scalar> witness = rows[0];
  for (const auto& r : rows)
    if (tape.requires_grad(r.id())) { witness = r; break; }
  Shape shape{static_cast<Index>(rows.size()), n};
  return tape.record(std::move(shape), std::move(out), {witness},
                     [ids = std::move(ids)](BasicTape<Scalar>& t, std::uint32_t self) {
                       const auto& g = t.grad(self);
                       for (std::size_t i = 0; i < ids.size(); ++i)
                         if (t.requires_grad(ids[i])) t.grad(ids[i]).row(0) += g.row(static_cast<Index>(i));
                     });
}

/// Contiguous slice of the last axis: [begin, begin + count).
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& a, Index begin, Index count) {
  const auto& av = a.value();
  if (a.shape().empty() || begin < 0 || count < 0 || begin + count > av.cols())
    throw ShapeError("slice [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " +
                     to_string(a.shape()));
  MatrixX<Scalar> out = av.middleCols(begin, count);
  Shape shape = a.shape();
  shape.back() = count;
  const auto ia = a.id();
  return a.tape().record(std::move(shape), std::move(out), {a},
                         [ia, begin, count](BasicTape<Scalar>& t, std::uint32_t self) {
                           t.grad(ia).middleCols(begin, count) += t.grad(self);
                         });
}

/// Column-wise mean of a 2-D array, as a rank-1 array.
template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  const auto& av = a.value();
  if (a.shape().size() != 2 || av.rows() == 0) throw ShapeError("mean_rows of " + to_string(a.shape()));
  MatrixX<Scalar> out = av.colwise().mean();
  const auto ia = a.id();
  const Scalar inv = Scalar(1) / static_cast<Scalar>(av.rows());
  return a.tape().record(Shape{av.cols()}, std::move(out), {a},
                         [ia, inv](BasicTape<Scalar>& t, std::uint32_t self) {
                           t.grad(ia).rowwise() += inv * t.grad(self).row(0);
                         });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  const auto ia = a.id();
  return a.tape().record(Shape{}, std::move(out), {a},
                         [ia](BasicTape<Scalar>& t, std::uint32_t self) {
                           t.grad(ia).array() += t.grad(self)(0, 0);
                         });
}

// ---------------------------------------------------------------------------
// Finite-difference verification

template <typename Scalar>
struct GradCheckEntry {
  std::string name;
  Scalar max_rel_error = 0;
  Scalar max_abs_error = 0;
  Index worst_index = 0;
  bool passed = true;
};

template <typename Scalar>
struct GradCheckReport {
  std::vector<GradCheckEntry<Scalar>> entries;
  Scalar max_rel_error = 0;
  bool passed = true;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps gradients
/// that are (numerically) zero from dividing by round-off.
template <typename Scalar>
Scalar relative_error(Scalar analytic, Scalar numeric, Scalar floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares tape gradients with central differences for every element of
/// every named parameter. `loss` builds the scalar loss on a fresh tape.
template <typename Scalar>
GradCheckReport<Scalar> finite_diff_check(
    const std::function<Var<Scalar>(BasicTape<Scalar>&)>& loss,
    std::span<const std::pair<std::string, DiffArray<Scalar>*>> params, Scalar h, Scalar tol,
    Scalar floor = Scalar(1e-6)) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  for (auto& [name, p] : params) p->zero_grad();
  {
    BasicTape<Scalar> tape;
    auto l = loss(tape);
    if (!std::isfinite(l.item())) throw std::domain_error("finite_diff_check: loss is not finite");
    tape.backward(l);
  }
  auto eval = [&] {
    BasicTape<Scalar> tape;
    const Scalar v = loss(tape).item();
    if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: loss is not finite");
    return v;
  };
  GradCheckReport<Scalar> report;
  for (auto& [name, p] : params) {
    GradCheckEntry<Scalar> e;
    e.name = name;
    Scalar* x = p->values().data();
    const Scalar* g = p->grad().data();
    for (Index i = 0; i < p->size(); ++i) {
      const Scalar saved = x[i];
      x[i] = saved + h;
      const Scalar up = eval();
      x[i] = saved - h;
      const Scalar down = eval();
      x[i] = saved;
      const Scalar numeric = (up - down) / (2 * h);
      const Scalar rel = relative_error(g[i], numeric, floor);
      if (rel > e.max_rel_error) {
        e.max_rel_error = rel;
        e.worst_index = i;
      }
      e.max_abs_error = std::max(e.max_abs_error, std::abs(g[i] - numeric));
    }
    e.passed = e.max_rel_error <= tol;
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.passed = report.passed && e.passed;
    report.entries.push_back(std::move(e));
  }
  return report;
}

// Double precision is what the model trains in.
using Array = DiffArray<double>;
using Tape = BasicTape<double>;
using Value = Var<double>;
using Matrix = MatrixX<double>;

}  // namespace swm::ad
