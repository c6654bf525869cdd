#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dvq/matrix.hpp"

namespace dvq::ag {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// How gradient flows out of a node during the backward sweep.
enum class GradientRouting {
  Pass,  // regular differentiable op
  Stop,  // sg(): identity forward, zero gradient backward
};

/**
 * Minimal reverse-mode automatic differentiation over dense matrices.
 *
 * Nodes are appended in evaluation order, so a reverse sweep over the node
 * list is a valid topological order. Scalars are 1x1 matrices.
 */
class Tape {
 public:
  /// Leaf whose gradient is tracked (a parameter or probed input).
  Var variable(Matrix value);
  /// Leaf that never receives gradient.
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
  double scalar(Var v) const;

  Var matmul(Var a, Var b);
  Var add_row_bias(Var a, Var bias);
  Var tanh(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var stop_gradient(Var a);

  /// Output row r is row picks[r].second of sources[picks[r].first].
  Var gather_rows(std::span<const Var> sources,
                  std::vector<std::pair<std::size_t, std::size_t>> picks);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);

  /// Mean over all elements of (a - b)^2, as a 1x1 matrix.
  Var mean_squared_error(Var a, Var b);
  /// Mean over rows of the squared Euclidean distance between rows of a and b.
  Var mean_row_sq_distance(Var a, Var b);

  /// Clears all gradients, seeds d(out)/d(out) = 1 and sweeps backwards. `out` must be 1x1.
  void backward(Var out);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    GradientRouting routing = GradientRouting::Pass;
    bool tracked = false;
    std::function<void(Tape&, std::size_t)> backprop;
  };

  Var push(Matrix value, std::vector<std::size_t> parents,
           std::function<void(Tape&, std::size_t)> backprop,
           GradientRouting routing = GradientRouting::Pass);
  Matrix& grad_of(std::size_t id);
  bool wants_grad(std::size_t id) const { return nodes_[id].tracked; }

  std::vector<Node> nodes_;
};

}  // namespace dvq::ag
