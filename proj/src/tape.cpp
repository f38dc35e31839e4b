#include "permlearn/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "permlearn/kernels.hpp"

namespace permlearn {

namespace k = kernels;

int Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = requires_grad ? std::move(back) : nullptr;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return Var{push(std::move(value), requires_grad, nullptr)};
}

double Tape::scalar_value(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw std::invalid_argument("scalar_value: not a 1x1 matrix");
  return m.data[0];
}

Matrix& Tape::grad_ref(int id) {
  if (grads_[id].data.empty()) grads_[id] = Matrix(nodes_[id].value.rows, nodes_[id].value.cols);
  return grads_[id];
}

void Tape::accumulate(int id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  Matrix& dst = grad_ref(id);
  k::axpy(1.0, g.data.data(), dst.data.data(), dst.size());
}

void Tape::backward(Var loss) {
  if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: invalid loss var");
  if (nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");

  grads_.assign(nodes_.size(), Matrix{});
  grad_ref(loss.id).data[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    if (grads_[id].data.empty()) continue;  // not an ancestor of the loss
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
  // Nodes that require grad but were never reached get explicit zeros so
  // grad() is always well defined after backward().
  for (size_t id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].requires_grad && grads_[id].data.empty())
      grads_[id] = Matrix(nodes_[id].value.rows, nodes_[id].value.cols);
}

const Matrix& Tape::grad(Var v) const {
  if (grads_.size() != nodes_.size())
    throw std::logic_error("grad: call backward() first");
  if (grads_[v.id].data.empty())
    throw std::logic_error("grad: node does not require grad");
  return grads_[v.id];
}

// ---- elementwise -----------------------------------------------------------

Var Tape::add(Var a, Var b) {
  const Matrix &va = value(a), &vb = value(b);
  require_same_shape(va, vb, "add");
  Matrix out(va.rows, va.cols);
  k::binary_op(k::Binary::Add, va.data.data(), vb.data.data(), out.data.data(), out.size());
  bool rg = requires_grad(a) || requires_grad(b);
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), rg, [pa, pb](Tape& t, int self) {
    t.accumulate(pa, t.grads_[self]);
    t.accumulate(pb, t.grads_[self]);
  })};
}

Var Tape::sub(Var a, Var b) {
  const Matrix &va = value(a), &vb = value(b);
  require_same_shape(va, vb, "sub");
  Matrix out(va.rows, va.cols);
  k::binary_op(k::Binary::Sub, va.data.data(), vb.data.data(), out.data.data(), out.size());
  bool rg = requires_grad(a) || requires_grad(b);
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), rg, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    t.accumulate(pa, g);
    if (t.nodes_[pb].requires_grad) {
      Matrix ng(g.rows, g.cols);
      k::unary_op(k::Unary::Neg, g.data.data(), ng.data.data(), g.size());
      t.accumulate(pb, ng);
    }
  })};
}

Var Tape::mul(Var a, Var b) {
  const Matrix &va = value(a), &vb = value(b);
  require_same_shape(va, vb, "mul");
  Matrix out(va.rows, va.cols);
  k::binary_op(k::Binary::Mul, va.data.data(), vb.data.data(), out.data.data(), out.size());
  bool rg = requires_grad(a) || requires_grad(b);
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), rg, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix tmp(g.rows, g.cols);
    if (t.nodes_[pa].requires_grad) {
      k::binary_op(k::Binary::Mul, g.data.data(), t.nodes_[pb].value.data.data(),
                   tmp.data.data(), g.size());
      t.accumulate(pa, tmp);
    }
    if (t.nodes_[pb].requires_grad) {
      k::binary_op(k::Binary::Mul, g.data.data(), t.nodes_[pa].value.data.data(),
                   tmp.data.data(), g.size());
      t.accumulate(pb, tmp);
    }
  })};
}

Var Tape::div(Var a, Var b) {
  const Matrix &va = value(a), &vb = value(b);
  require_same_shape(va, vb, "div");
  Matrix out(va.rows, va.cols);
  k::binary_op(k::Binary::Div, va.data.data(), vb.data.data(), out.data.data(), out.size());
  bool rg = requires_grad(a) || requires_grad(b);
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), rg, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    const Matrix& bv = t.nodes_[pb].value;
    Matrix tmp(g.rows, g.cols);
    if (t.nodes_[pa].requires_grad) {
      k::binary_op(k::Binary::Div, g.data.data(), bv.data.data(), tmp.data.data(), g.size());
      t.accumulate(pa, tmp);
    }
    if (t.nodes_[pb].requires_grad) {
      // d/db (a/b) = -a / b^2
      const Matrix& out_v = t.nodes_[self].value;  // a/b
      k::binary_op(k::Binary::Mul, g.data.data(), out_v.data.data(), tmp.data.data(), g.size());
      k::binary_op(k::Binary::Div, tmp.data.data(), bv.data.data(), tmp.data.data(), g.size());
      Matrix ng(g.rows, g.cols);
      k::unary_op(k::Unary::Neg, tmp.data.data(), ng.data.data(), g.size());
      t.accumulate(pb, ng);
    }
  })};
}

Var Tape::exp(Var a) {
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  k::unary_op(k::Unary::Exp, va.data.data(), out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix tmp(g.rows, g.cols);
    k::binary_op(k::Binary::Mul, g.data.data(), t.nodes_[self].value.data.data(),
                 tmp.data.data(), g.size());
    t.accumulate(pa, tmp);
  })};
}

Var Tape::log(Var a) {
  const Matrix& va = value(a);
  for (double v : va.data)
    if (!(v > 0.0)) throw std::domain_error("log: input must be strictly positive");
  Matrix out(va.rows, va.cols);
  k::unary_op(k::Unary::Log, va.data.data(), out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix tmp(g.rows, g.cols);
    k::binary_op(k::Binary::Div, g.data.data(), t.nodes_[pa].value.data.data(),
                 tmp.data.data(), g.size());
    t.accumulate(pa, tmp);
  })};
}

Var Tape::relu(Var a) {
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  k::unary_op(k::Unary::Relu, va.data.data(), out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    const Matrix& x = t.nodes_[pa].value;
    Matrix tmp(g.rows, g.cols);
    for (int i = 0; i < g.size(); ++i) tmp.data[i] = x.data[i] > 0.0 ? g.data[i] : 0.0;
    t.accumulate(pa, tmp);
  })};
}

Var Tape::square(Var a) {
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  k::unary_op(k::Unary::Square, va.data.data(), out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix tmp(g.rows, g.cols);
    k::binary_op(k::Binary::Mul, g.data.data(), t.nodes_[pa].value.data.data(),
                 tmp.data.data(), g.size());
    k::scale(tmp.data.data(), 2.0, tmp.data.data(), g.size());
    t.accumulate(pa, tmp);
  })};
}

Var Tape::neg(Var a) {
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  k::unary_op(k::Unary::Neg, va.data.data(), out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix ng(g.rows, g.cols);
    k::unary_op(k::Unary::Neg, g.data.data(), ng.data.data(), g.size());
    t.accumulate(pa, ng);
  })};
}

Var Tape::scale(Var a, double s) {
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  k::scale(va.data.data(), s, out.data.data(), out.size());
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa, s](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix tmp(g.rows, g.cols);
    k::scale(g.data.data(), s, tmp.data.data(), g.size());
    t.accumulate(pa, tmp);
  })};
}

// ---- linear algebra --------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  const Matrix &va = value(a), &vb = value(b);
  if (va.cols != vb.rows) throw std::invalid_argument("matmul: inner dimensions disagree");
  Matrix out(va.rows, vb.cols);
  k::matmul_nn(va.data.data(), vb.data.data(), out.data.data(), va.rows, va.cols, vb.cols);
  bool rg = requires_grad(a) || requires_grad(b);
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), rg, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grads_[self];  // m x n
    const Matrix& A = t.nodes_[pa].value;  // m x k
    const Matrix& B = t.nodes_[pb].value;  // k x n
    if (t.nodes_[pa].requires_grad) {
      Matrix da(A.rows, A.cols);
      // dA = G * B^T
      k::matmul_nt(g.data.data(), B.data.data(), da.data.data(), g.rows, g.cols, B.rows);
      t.accumulate(pa, da);
    }
    if (t.nodes_[pb].requires_grad) {
      Matrix db(B.rows, B.cols);
      // dB = A^T * G
      k::matmul_tn(A.data.data(), g.data.data(), db.data.data(), A.cols, A.rows, g.cols);
      t.accumulate(pb, db);
    }
  })};
}

Var Tape::transpose(Var a) {
  const Matrix& va = value(a);
  Matrix out(va.cols, va.rows);
  k::transpose(va.data.data(), out.data.data(), va.rows, va.cols);
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix gt(g.cols, g.rows);
    k::transpose(g.data.data(), gt.data.data(), g.rows, g.cols);
    t.accumulate(pa, gt);
  })};
}

Var Tape::log_softmax(Var a, Axis axis) {
  if (axis == Axis::All) throw std::invalid_argument("log_softmax: axis must be Row or Col");
  const Matrix& va = value(a);
  Matrix out(va.rows, va.cols);
  if (axis == Axis::Row)
    k::row_log_softmax(va.data.data(), out.data.data(), va.rows, va.cols);
  else
    k::col_log_softmax(va.data.data(), out.data.data(), va.rows, va.cols);
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa, axis](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    const Matrix& y = t.nodes_[self].value;
    Matrix dz(g.rows, g.cols);
    if (axis == Axis::Row)
      k::row_log_softmax_backward(y.data.data(), g.data.data(), dz.data.data(), g.rows, g.cols);
    else
      k::col_log_softmax_backward(y.data.data(), g.data.data(), dz.data.data(), g.rows, g.cols);
    t.accumulate(pa, dz);
  })};
}

Var Tape::stop_gradient(Var a) {
  // Same forward values, no parents: upstream contribution is exactly zero.
  return Var{push(value(a), false, nullptr)};
}

Var Tape::reduce(Var a, Reduce kind, Axis axis) {
  const Matrix& va = value(a);
  const int r = va.rows, c = va.cols;
  Matrix out;
  double denom = 1.0;
  switch (axis) {
    case Axis::All:
      denom = kind == Reduce::Mean ? static_cast<double>(va.size()) : 1.0;
      out = Matrix(1, 1, k::sum_all(va.data.data(), r, c) / denom);
      break;
    case Axis::Row: {
      denom = kind == Reduce::Mean ? static_cast<double>(c) : 1.0;
      out = Matrix(r, 1);
      k::row_sums(va.data.data(), out.data.data(), r, c);
      if (denom != 1.0) k::scale(out.data.data(), 1.0 / denom, out.data.data(), r);
      break;
    }
    case Axis::Col: {
      denom = kind == Reduce::Mean ? static_cast<double>(r) : 1.0;
      out = Matrix(1, c);
      k::col_sums(va.data.data(), out.data.data(), r, c);
      if (denom != 1.0) k::scale(out.data.data(), 1.0 / denom, out.data.data(), c);
      break;
    }
  }
  int pa = a.id;
  return Var{push(std::move(out), requires_grad(a), [pa, axis, denom, r, c](Tape& t, int self) {
    const Matrix& g = t.grads_[self];
    Matrix da(r, c);
    switch (axis) {
      case Axis::All: {
        const double gv = g.data[0] / denom;
        for (double& v : da.data) v = gv;
        break;
      }
      case Axis::Row:
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) da(i, j) = g.data[i] / denom;
        break;
      case Axis::Col:
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) da(i, j) = g.data[j] / denom;
        break;
    }
    t.accumulate(pa, da);
  })};
}

Var Tape::gather(Var a, std::vector<std::pair<int, int>> entries) {
  const Matrix& va = value(a);
  Matrix out(static_cast<int>(entries.size()), 1);
  for (size_t i = 0; i < entries.size(); ++i) {
    auto [r, c] = entries[i];
    if (r < 0 || r >= va.rows || c < 0 || c >= va.cols)
      throw std::invalid_argument("gather: index out of range");
    out.data[i] = va(r, c);
  }
  int pa = a.id;
  const int rows = va.rows, cols = va.cols;
  return Var{push(std::move(out), requires_grad(a),
                  [pa, rows, cols, ent = std::move(entries)](Tape& t, int self) {
                    const Matrix& g = t.grads_[self];
                    Matrix da(rows, cols);
                    for (size_t i = 0; i < ent.size(); ++i)
                      da(ent[i].first, ent[i].second) += g.data[i];
                    t.accumulate(pa, da);
                  })};
}

}  // namespace permlearn
