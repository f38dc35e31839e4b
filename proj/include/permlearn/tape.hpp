#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "permlearn/matrix.hpp"

namespace permlearn {

enum class Axis { All, Row, Col };
enum class Reduce { Sum, Mean };

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. Nodes are appended in forward order,
// so node ids are already a topological order and backward() just walks them
// in reverse. A tape is built fresh for every training step and is not
// thread-safe; share nothing.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar(double v) { return leaf(Matrix(1, 1, v), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var exp(Var a);
  Var log(Var a);  // input must be strictly positive
  Var relu(Var a);
  Var square(Var a);
  Var neg(Var a);
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var log_softmax(Var a, Axis axis);  // Axis::Row or Axis::Col
  Var stop_gradient(Var a);
  Var reduce(Var a, Reduce kind, Axis axis);
  // Picks entries[k] = (row, col) of a into a size x 1 column; backward
  // scatter-adds, so repeated entries are fine.
  Var gather(Var a, std::vector<std::pair<int, int>> entries);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar_value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node that
  // requires grad. loss must be 1 x 1.
  void backward(Var loss);
  const Matrix& grad(Var v) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    bool requires_grad = false;
    // Accumulates into the parents' grads given this node's grad.
    std::function<void(Tape&, int self)> backward;
  };

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  Matrix zero_like_cache_;

  int push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back);
  Matrix& grad_ref(int id);
  void accumulate(int id, const Matrix& g);
  friend struct TapeTestAccess;
};

}  // namespace permlearn
