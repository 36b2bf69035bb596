#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgd/matrix.hpp"
#include "kgd/optim.hpp"

namespace kgd {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode tape over Matrix values. One tape per forward/backward pass:
/// record a forward computation, call backward() on a 1x1 loss node, then read
/// gradients off leaves or let them flush into bound ParamStore slots.
///
/// Nodes created from constant() carry no gradient buffer; nothing is ever
/// accumulated into them, which is what freezes the teacher during
/// distillation. Ops only reference earlier nodes, so creation order is a
/// valid topological order and backward is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Untracked leaf: gradients are never accumulated into it (stop-gradient).
  Var constant(Matrix value);
  /// Tracked leaf whose gradient can be read back with grad().
  Var input(Matrix value);
  /// Tracked leaf bound to store parameter `name`; after backward() the
  /// node gradient is added into the store's accumulator.
  Var param(ParamStore& store, const std::string& name);

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a · bᵀ
  /// x(n×a) · w(a×b) + bias(1×b) broadcast over rows.
  Var linear(Var x, Var w, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double shift);
  Var relu(Var a);
  /// Elementwise logistic function; outputs are pinned to the open interval
  /// (0,1) even where 64-bit rounding would saturate them to 0 or 1.
  Var sigmoid(Var a);
  /// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
  /// Identity when training is false or p == 0; mask fully determined by seed.
  Var dropout(Var a, double p, bool training, std::uint64_t seed);
  Var gather_rows(Var src, std::vector<std::size_t> rows);
  Var concat_cols(Var a, Var b);
  Var vstack(std::span<const Var> parts);
  /// out[g] = mean of src rows listed in groups[g]; every group non-empty.
  Var segment_mean(Var src, std::vector<std::vector<std::size_t>> groups);
  Var sum_all(Var a);   // 1x1
  Var mean_all(Var a);  // 1x1

  /// -Σ over mask==1 of [label·log s + (1-label)·log(1-s)], scores clamped to
  /// [1e-12, 1-1e-12] before the logs. Sum form; callers divide by the mask
  /// count when they want a mean.
  Var masked_bce(Var scores, const Matrix& labels, const Matrix& mask);
  /// Mean over all elements of (a-b)^2.
  Var mse(Var a, Var b);
  /// Mean over rows with row_mask!=0 (all rows when row_mask is empty) of
  /// -log softmax(logits[i])[labels[i]].
  Var softmax_xent(Var logits, std::vector<std::size_t> labels,
                   std::vector<std::uint8_t> row_mask);

  void backward(Var loss);

  const Matrix& value(Var v) const { return node(v).value; }
  /// Gradient of the last backward() w.r.t. node v; zeros for untracked nodes.
  Matrix grad(Var v) const;
  double scalar(Var v) const;
  bool tracked(Var v) const { return node(v).tracked; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated only when tracked
    bool tracked = false;
    std::function<void(Tape&)> backprop;  // nullptr for leaves
  };

  Var emplace(Matrix value, bool tracked, std::function<void(Tape&)> backprop);
  Node& node(Var v);
  const Node& node(Var v) const;
  /// Adds src into the gradient buffer of `target` if it is tracked.
  void accumulate(Var target, const Matrix& src);
  void accumulate_rows(Var target, std::size_t row_offset, const Matrix& src);

  std::vector<Node> nodes_;
  struct Binding {
    std::size_t node;
    ParamStore* store;
    std::string name;
  };
  std::vector<Binding> bindings_;
  bool backward_done_ = false;
};

constexpr double kBceClamp = 1e-12;

}  // namespace kgd
