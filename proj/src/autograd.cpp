#include "dvq/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dvq::ag {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw ShapeError(std::string("autograd ") + op + ": shape mismatch");
}

}  // namespace

Var Tape::push(Matrix value, std::vector<std::size_t> parents,
               std::function<void(Tape&, std::size_t)> backprop, GradientRouting routing) {
  Node node;
  node.value = std::move(value);
  node.routing = routing;
  if (routing == GradientRouting::Pass) {
    node.tracked = std::ranges::any_of(parents, [&](std::size_t p) { return nodes_[p].tracked; });
  }
  node.parents = std::move(parents);
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Var Tape::variable(Matrix value) {
  Node node;
  node.value = std::move(value);
  node.tracked = true;
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

double Tape::scalar(Var v) const {
  const auto& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError("autograd: value is not a scalar");
  return m(0, 0);
}

Matrix& Tape::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw ShapeError("autograd matmul: inner dimensions differ");
  Matrix out(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      auto brow = B.row(k);
      for (std::size_t j = 0; j < B.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& A = t.nodes_[a.id].value;
    const Matrix& B = t.nodes_[b.id].value;
    if (t.wants_grad(a.id)) {
      Matrix& GA = t.grad_of(a.id);  // G * B^T
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t k = 0; k < B.rows(); ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < G.cols(); ++j) acc += G(i, j) * B(k, j);
          GA(i, k) += acc;
        }
      }
    }
    if (t.wants_grad(b.id)) {
      Matrix& GB = t.grad_of(b.id);  // A^T * G
      for (std::size_t i = 0; i < A.rows(); ++i) {
        auto grow = G.row(i);
        for (std::size_t k = 0; k < A.cols(); ++k) {
          const double aik = A(i, k);
          auto gb = GB.row(k);
          for (std::size_t j = 0; j < G.cols(); ++j) gb[j] += aik * grow[j];
        }
      }
    }
  });
}

Var Tape::add_row_bias(Var a, Var bias) {
  const Matrix& A = value(a);
  const Matrix& b = value(bias);
  if (b.rows() != 1 || b.cols() != A.cols()) throw ShapeError("autograd add_row_bias: bad bias shape");
  Matrix out = A;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += b(0, j);
  }
  return push(std::move(out), {a.id, bias.id}, [a, bias](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    if (t.wants_grad(a.id)) {
      auto& ga = t.grad_of(a.id).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += G.data()[i];
    }
    if (t.wants_grad(bias.id)) {
      Matrix& gb = t.grad_of(bias.id);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) gb(0, j) += G(i, j);
      }
    }
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a);
  for (auto& v : out.data()) v = std::tanh(v);
  return push(std::move(out), {a.id}, [a](Tape& t, std::size_t self) {
    if (!t.wants_grad(a.id)) return;
    const auto& y = t.nodes_[self].value.data();
    const auto& g = t.nodes_[self].grad.data();
    auto& ga = t.grad_of(a.id).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Matrix out = value(a);
  const auto& bv = value(b).data();
  for (std::size_t i = 0; i < bv.size(); ++i) out.data()[i] += bv[i];
  return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad.data();
    for (auto id : {a.id, b.id}) {
      if (!t.wants_grad(id)) continue;
      auto& gp = t.grad_of(id).data();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Matrix out = value(a);
  const auto& bv = value(b).data();
  for (std::size_t i = 0; i < bv.size(); ++i) out.data()[i] -= bv[i];
  return push(std::move(out), {a.id, b.id}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad.data();
    if (t.wants_grad(a.id)) {
      auto& ga = t.grad_of(a.id).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (t.wants_grad(b.id)) {
      auto& gb = t.grad_of(b.id).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a);
  for (auto& v : out.data()) v *= s;
  return push(std::move(out), {a.id}, [a, s](Tape& t, std::size_t self) {
    if (!t.wants_grad(a.id)) return;
    const auto& g = t.nodes_[self].grad.data();
    auto& ga = t.grad_of(a.id).data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
  });
}

Var Tape::stop_gradient(Var a) {
  return push(value(a), {a.id}, nullptr, GradientRouting::Stop);
}

Var Tape::gather_rows(std::span<const Var> sources,
                      std::vector<std::pair<std::size_t, std::size_t>> picks) {
  if (sources.empty()) throw ShapeError("autograd gather_rows: no sources");
  const std::size_t cols = value(sources.front()).cols();
  std::vector<std::size_t> parents;
  for (auto s : sources) {
    if (value(s).cols() != cols) throw ShapeError("autograd gather_rows: source widths differ");
    parents.push_back(s.id);
  }
  Matrix out(picks.size(), cols);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    const auto [src, row] = picks[r];
    if (src >= sources.size() || row >= value(sources[src]).rows()) {
      throw ShapeError("autograd gather_rows: pick out of range");
    }
    std::ranges::copy(value(sources[src]).row(row), out.row(r).begin());
  }
  return push(std::move(out), parents,
              [parents, picks = std::move(picks)](Tape& t, std::size_t self) {
                const Matrix& G = t.nodes_[self].grad;
                for (std::size_t r = 0; r < picks.size(); ++r) {
                  const auto [src, row] = picks[r];
                  const auto id = parents[src];
                  if (!t.wants_grad(id)) continue;
                  auto dst = t.grad_of(id).row(row);
                  auto g = G.row(r);
                  for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
                }
              });
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  Matrix out = column_block(value(a), begin, count);
  return push(std::move(out), {a.id}, [a, begin, count](Tape& t, std::size_t self) {
    if (!t.wants_grad(a.id)) return;
    const Matrix& G = t.nodes_[self].grad;
    Matrix& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) ga(i, begin + j) += G(i, j);
    }
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  std::vector<Matrix> blocks;
  std::vector<std::size_t> parents;
  for (auto p : parts) {
    blocks.push_back(value(p));
    parents.push_back(p.id);
  }
  Matrix out = hconcat(blocks);
  return push(std::move(out), parents, [parents](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    std::size_t offset = 0;
    for (auto id : parents) {
      const std::size_t w = t.nodes_[id].value.cols();
      if (t.wants_grad(id)) {
        Matrix& gp = t.grad_of(id);
        for (std::size_t i = 0; i < G.rows(); ++i) {
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += G(i, offset + j);
        }
      }
      offset += w;
    }
  });
}

Var Tape::mean_squared_error(Var a, Var b) {
  require_same_shape(value(a), value(b), "mean_squared_error");
  const auto& av = value(a).data();
  const auto& bv = value(b).data();
  if (av.empty()) throw ShapeError("autograd mean_squared_error: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return push(Matrix(1, 1, total / n), {a.id, b.id}, [a, b, n](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0) * 2.0 / n;
    const auto& av = t.nodes_[a.id].value.data();
    const auto& bv = t.nodes_[b.id].value.data();
    if (t.wants_grad(a.id)) {
      auto& ga = t.grad_of(a.id).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (av[i] - bv[i]);
    }
    if (t.wants_grad(b.id)) {
      auto& gb = t.grad_of(b.id).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
    }
  });
}

Var Tape::mean_row_sq_distance(Var a, Var b) {
  require_same_shape(value(a), value(b), "mean_row_sq_distance");
  const auto& av = value(a).data();
  const auto& bv = value(b).data();
  const std::size_t rows = value(a).rows();
  if (rows == 0) throw ShapeError("autograd mean_row_sq_distance: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double n = static_cast<double>(rows);
  return push(Matrix(1, 1, total / n), {a.id, b.id}, [a, b, n](Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0) * 2.0 / n;
    const auto& av = t.nodes_[a.id].value.data();
    const auto& bv = t.nodes_[b.id].value.data();
    if (t.wants_grad(a.id)) {
      auto& ga = t.grad_of(a.id).data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (av[i] - bv[i]);
    }
    if (t.wants_grad(b.id)) {
      auto& gb = t.grad_of(b.id).data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
    }
  });
}

void Tape::backward(Var out) {
  const auto& v = nodes_.at(out.id).value;
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("autograd backward: output must be 1x1");
  for (auto& n : nodes_) n.grad = Matrix();
  grad_of(out.id) = Matrix(v.rows(), v.cols(), 1.0);
  for (std::size_t id = out.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.backprop || !n.tracked || !n.grad.same_shape(n.value)) continue;
    n.backprop(*this, id);
  }
  // Leaves that were never reached still report a zero gradient of the right shape.
  for (std::size_t id = 0; id < nodes_.size(); ++id) grad_of(id);
}

}  // namespace dvq::ag
