#include "kgd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "kgd/rng.hpp"

namespace kgd {

namespace {

void check_finite(const char* op, const Matrix& m) {
  if (!m.all_finite()) {
    throw NumericError(std::string(op) + ": produced non-finite values");
  }
}

void require_binary(const char* op, const char* which, const Matrix& m) {
  for (double v : m.flat()) {
    if (v != 0.0 && v != 1.0) {
      throw ConfigError(std::string(op) + ": " + which + " must be 0/1");
    }
  }
}

}  // namespace

Var Tape::emplace(Matrix value, bool tracked, std::function<void(Tape&)> backprop) {
  Node node;
  if (tracked) {
    node.grad = Matrix(value.rows(), value.cols());
  }
  node.value = std::move(value);
  node.tracked = tracked;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) {
    throw ConfigError("Tape: variable does not belong to this tape");
  }
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw ConfigError("Tape: variable does not belong to this tape");
  }
  return nodes_[v.id];
}

void Tape::accumulate(Var target, const Matrix& src) {
  Node& n = node(target);
  if (!n.tracked) return;
  auto dst = n.grad.flat();
  auto add = src.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += add[i];
  }
}

void Tape::accumulate_rows(Var target, std::size_t row_offset, const Matrix& src) {
  Node& n = node(target);
  if (!n.tracked) return;
  for (std::size_t i = 0; i < src.rows(); ++i) {
    auto dst = n.grad.row(row_offset + i);
    auto add = src.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] += add[j];
    }
  }
}

Var Tape::constant(Matrix value) {
  check_finite("constant", value);
  return emplace(std::move(value), false, nullptr);
}

Var Tape::input(Matrix value) {
  check_finite("input", value);
  return emplace(std::move(value), true, nullptr);
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Var v = emplace(store.value(name), true, nullptr);
  bindings_.push_back({v.id, &store, name});
  return v;
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = kgd::matmul(value(a), value(b));
  check_finite("matmul", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    t.accumulate(a, kgd::matmul_nt(g, t.value(b)));
    t.accumulate(b, kgd::matmul_tn(t.value(a), g));
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  Matrix out = kgd::matmul_nt(value(a), value(b));
  check_finite("matmul_nt", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    t.accumulate(a, kgd::matmul(g, t.value(b)));
    t.accumulate(b, kgd::matmul_tn(g, t.value(a)));
  });
}

Var Tape::linear(Var x, Var w, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  const Matrix& bv = value(bias);
  if (xv.cols() != wv.rows()) {
    throw ShapeError("linear: x is " + shape_str(xv) + " but W is " + shape_str(wv));
  }
  if (bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeError("linear: bias is " + shape_str(bv) + " but W is " + shape_str(wv));
  }
  Matrix out = kgd::matmul(xv, wv);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] += bv.at(0, j);
    }
  }
  check_finite("linear", out);
  const bool tracked = node(x).tracked || node(w).tracked || node(bias).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [x, w, bias, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    t.accumulate(x, kgd::matmul_nt(g, t.value(w)));
    t.accumulate(w, kgd::matmul_tn(t.value(x), g));
    Matrix db(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto row = g.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        db.at(0, j) += row[j];
      }
    }
    t.accumulate(bias, db);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape("add", value(a), value(b));
  Matrix out = value(a);
  auto dst = out.flat();
  auto rhs = value(b).flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  check_finite("add", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape("sub", value(a), value(b));
  Matrix out = value(a);
  auto dst = out.flat();
  auto rhs = value(b).flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= rhs[i];
  check_finite("sub", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, self](Tape& t) {
    Matrix g = t.node(self).grad;
    t.accumulate(a, g);
    for (double& v : g.flat()) v = -v;
    t.accumulate(b, g);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape("mul", value(a), value(b));
  Matrix out = value(a);
  auto dst = out.flat();
  auto rhs = value(b).flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= rhs[i];
  check_finite("mul", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix da = g;
    {
      auto d = da.flat();
      auto bv = t.value(b).flat();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= bv[i];
    }
    t.accumulate(a, da);
    Matrix db = g;
    {
      auto d = db.flat();
      auto av = t.value(a).flat();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= av[i];
    }
    t.accumulate(b, db);
  });
}

Var Tape::scale(Var a, double factor) {
  Matrix out = value(a);
  for (double& v : out.flat()) v *= factor;
  check_finite("scale", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, factor, self](Tape& t) {
    Matrix g = t.node(self).grad;
    for (double& v : g.flat()) v *= factor;
    t.accumulate(a, g);
  });
}

Var Tape::add_scalar(Var a, double shift) {
  Matrix out = value(a);
  for (double& v : out.flat()) v += shift;
  check_finite("add_scalar", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, self](Tape& t) {
    t.accumulate(a, t.node(self).grad);
  });
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& v : out.flat()) v = std::max(v, 0.0);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, self](Tape& t) {
    Matrix g = t.node(self).grad;
    auto av = t.value(a).flat();
    auto gv = g.flat();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (av[i] <= 0.0) gv[i] = 0.0;
    }
    t.accumulate(a, g);
  });
}

Var Tape::sigmoid(Var a) {
  // Pin the output inside (0,1): 1/(1+exp(-x)) rounds to exactly 1.0 for
  // x >= ~37 and to 0.0 once exp(-x) overflows.
  static const double kHi = std::nextafter(1.0, 0.0);
  static const double kLo = std::numeric_limits<double>::min();
  Matrix out = value(a);
  for (double& v : out.flat()) {
    v = 1.0 / (1.0 + std::exp(-v));
    v = std::clamp(v, kLo, kHi);
  }
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, self](Tape& t) {
    Matrix g = t.node(self).grad;
    auto sv = t.node(self).value.flat();
    auto gv = g.flat();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      gv[i] *= sv[i] * (1.0 - sv[i]);
    }
    t.accumulate(a, g);
  });
}

Var Tape::dropout(Var a, double p, bool training, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: p must lie in [0, 1)");
  }
  if (!training || p == 0.0) {
    Matrix out = value(a);
    Var self{nodes_.size()};
    return emplace(std::move(out), node(a).tracked, [a, self](Tape& t) {
      t.accumulate(a, t.node(self).grad);
    });
  }
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(value(a).size());
  for (double& m : mask) {
    m = rng.uniform() < p ? 0.0 : keep_scale;
  }
  Matrix out = value(a);
  {
    auto dst = out.flat();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= mask[i];
  }
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked,
                 [a, self, mask = std::move(mask)](Tape& t) {
                   Matrix g = t.node(self).grad;
                   auto gv = g.flat();
                   for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= mask[i];
                   t.accumulate(a, g);
                 });
}

Var Tape::gather_rows(Var src, std::vector<std::size_t> rows) {
  const Matrix& sv = value(src);
  for (std::size_t r : rows) {
    if (r >= sv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(r) +
                       " out of range for " + shape_str(sv));
    }
  }
  Matrix out(rows.size(), sv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto dst = out.row(i);
    auto s = sv.row(rows[i]);
    std::copy(s.begin(), s.end(), dst.begin());
  }
  Var self{nodes_.size()};
  return emplace(std::move(out), node(src).tracked,
                 [src, self, rows = std::move(rows)](Tape& t) {
                   Node& target = t.node(src);
                   if (!target.tracked) return;
                   const Matrix& g = t.node(self).grad;
                   for (std::size_t i = 0; i < rows.size(); ++i) {
                     auto dst = target.grad.row(rows[i]);
                     auto add = g.row(i);
                     for (std::size_t j = 0; j < dst.size(); ++j) {
                       dst[j] += add[j];
                     }
                   }
                 });
}

Var Tape::concat_cols(Var a, Var b) {
  Matrix out = kgd::concat_cols(value(a), value(b));
  const bool tracked = node(a).tracked || node(b).tracked;
  const std::size_t a_cols = value(a).cols();
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, a_cols, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix da(g.rows(), a_cols);
    Matrix db(g.rows(), g.cols() - a_cols);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto src = g.row(i);
      std::copy(src.begin(), src.begin() + a_cols, da.row(i).begin());
      std::copy(src.begin() + a_cols, src.end(), db.row(i).begin());
    }
    t.accumulate(a, da);
    t.accumulate(b, db);
  });
}

Var Tape::vstack(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ShapeError("vstack: no parts");
  }
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) {
      throw ShapeError("vstack: column counts disagree, " +
                       shape_str(value(parts[0])) + " vs " + shape_str(value(p)));
    }
    rows += value(p).rows();
  }
  Matrix out(rows, cols);
  bool tracked = false;
  std::vector<std::pair<Var, std::size_t>> layout;  // (part, row offset)
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    for (std::size_t i = 0; i < pv.rows(); ++i) {
      auto src = pv.row(i);
      std::copy(src.begin(), src.end(), out.row(offset + i).begin());
    }
    layout.emplace_back(p, offset);
    offset += pv.rows();
    tracked = tracked || node(p).tracked;
  }
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked,
                 [self, layout = std::move(layout)](Tape& t) {
                   const Matrix& g = t.node(self).grad;
                   for (const auto& [part, off] : layout) {
                     const std::size_t n = t.value(part).rows();
                     Matrix slice(n, g.cols());
                     for (std::size_t i = 0; i < n; ++i) {
                       auto src = g.row(off + i);
                       std::copy(src.begin(), src.end(), slice.row(i).begin());
                     }
                     t.accumulate(part, slice);
                   }
                 });
}

Var Tape::segment_mean(Var src, std::vector<std::vector<std::size_t>> groups) {
  const Matrix& sv = value(src);
  for (const auto& group : groups) {
    if (group.empty()) {
      throw ShapeError("segment_mean: empty group");
    }
    for (std::size_t r : group) {
      if (r >= sv.rows()) {
        throw ShapeError("segment_mean: row " + std::to_string(r) +
                         " out of range for " + shape_str(sv));
      }
    }
  }
  Matrix out(groups.size(), sv.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto dst = out.row(g);
    for (std::size_t r : groups[g]) {
      auto s = sv.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s[j];
    }
    const double inv = 1.0 / static_cast<double>(groups[g].size());
    for (double& v : dst) v *= inv;
  }
  Var self{nodes_.size()};
  return emplace(std::move(out), node(src).tracked,
                 [src, self, groups = std::move(groups)](Tape& t) {
                   Node& target = t.node(src);
                   if (!target.tracked) return;
                   const Matrix& g = t.node(self).grad;
                   for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                     const double inv = 1.0 / static_cast<double>(groups[gi].size());
                     auto add = g.row(gi);
                     for (std::size_t r : groups[gi]) {
                       auto dst = target.grad.row(r);
                       for (std::size_t j = 0; j < dst.size(); ++j) {
                         dst[j] += add[j] * inv;
                       }
                     }
                   }
                 });
}

Var Tape::sum_all(Var a) {
  double total = 0.0;
  for (double v : value(a).flat()) total += v;
  Matrix out(1, 1, total);
  check_finite("sum_all", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, self](Tape& t) {
    const double g = t.node(self).grad.at(0, 0);
    Matrix da(t.value(a).rows(), t.value(a).cols(), g);
    t.accumulate(a, da);
  });
}

Var Tape::mean_all(Var a) {
  const std::size_t n = value(a).size();
  if (n == 0) {
    throw ShapeError("mean_all: empty matrix");
  }
  double total = 0.0;
  for (double v : value(a).flat()) total += v;
  Matrix out(1, 1, total / static_cast<double>(n));
  check_finite("mean_all", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(a).tracked, [a, n, self](Tape& t) {
    const double g = t.node(self).grad.at(0, 0) / static_cast<double>(n);
    Matrix da(t.value(a).rows(), t.value(a).cols(), g);
    t.accumulate(a, da);
  });
}

Var Tape::masked_bce(Var scores, const Matrix& labels, const Matrix& mask) {
  const Matrix& sv = value(scores);
  require_same_shape("masked_bce(scores,labels)", sv, labels);
  require_same_shape("masked_bce(scores,mask)", sv, mask);
  require_binary("masked_bce", "labels", labels);
  require_binary("masked_bce", "mask", mask);

  const double lo = kBceClamp;
  const double hi = 1.0 - kBceClamp;
  double loss = 0.0;
  {
    auto s = sv.flat();
    auto y = labels.flat();
    auto m = mask.flat();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (m[i] == 0.0) continue;
      const double cs = std::clamp(s[i], lo, hi);
      loss -= y[i] * std::log(cs) + (1.0 - y[i]) * std::log(1.0 - cs);
    }
  }
  Matrix out(1, 1, loss);
  check_finite("masked_bce", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(scores).tracked,
                 [scores, labels, mask, lo, hi, self](Tape& t) {
                   const double g = t.node(self).grad.at(0, 0);
                   const Matrix& sv = t.value(scores);
                   Matrix ds(sv.rows(), sv.cols());
                   auto s = sv.flat();
                   auto y = labels.flat();
                   auto m = mask.flat();
                   auto d = ds.flat();
                   for (std::size_t i = 0; i < s.size(); ++i) {
                     if (m[i] == 0.0) continue;
                     const double cs = std::clamp(s[i], lo, hi);
                     d[i] = g * (-y[i] / cs + (1.0 - y[i]) / (1.0 - cs));
                   }
                   t.accumulate(scores, ds);
                 });
}

Var Tape::mse(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require_same_shape("mse", av, bv);
  if (av.size() == 0) {
    throw ShapeError("mse: empty matrices");
  }
  double total = 0.0;
  {
    auto x = av.flat();
    auto y = bv.flat();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - y[i];
      total += d * d;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(av.size());
  Matrix out(1, 1, total * inv_n);
  check_finite("mse", out);
  const bool tracked = node(a).tracked || node(b).tracked;
  Var self{nodes_.size()};
  return emplace(std::move(out), tracked, [a, b, inv_n, self](Tape& t) {
    const double g = t.node(self).grad.at(0, 0);
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    Matrix d(av.rows(), av.cols());
    auto x = av.flat();
    auto y = bv.flat();
    auto dv = d.flat();
    for (std::size_t i = 0; i < dv.size(); ++i) {
      dv[i] = g * 2.0 * (x[i] - y[i]) * inv_n;
    }
    t.accumulate(a, d);
    for (double& v : d.flat()) v = -v;
    t.accumulate(b, d);
  });
}

Var Tape::softmax_xent(Var logits, std::vector<std::size_t> labels,
                       std::vector<std::uint8_t> row_mask) {
  const Matrix& lv = value(logits);
  if (labels.size() != lv.rows()) {
    throw ShapeError("softmax_xent: labels length " + std::to_string(labels.size()) +
                     " vs logits " + shape_str(lv));
  }
  if (!row_mask.empty() && row_mask.size() != lv.rows()) {
    throw ShapeError("softmax_xent: row_mask length mismatch");
  }
  for (std::size_t y : labels) {
    if (y >= lv.cols()) {
      throw ShapeError("softmax_xent: label out of range");
    }
  }
  std::size_t selected = 0;
  if (row_mask.empty()) {
    selected = lv.rows();
  } else {
    for (auto m : row_mask) selected += m ? 1 : 0;
  }
  if (selected == 0) {
    throw ConfigError("softmax_xent: no rows selected");
  }

  Matrix probs(lv.rows(), lv.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < lv.rows(); ++i) {
    auto row = lv.row(i);
    auto p = probs.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      p[j] = std::exp(row[j] - peak);
      z += p[j];
    }
    for (double& v : p) v /= z;
    const bool in = row_mask.empty() || row_mask[i];
    if (in) {
      loss += peak + std::log(z) - row[labels[i]];
    }
  }
  loss /= static_cast<double>(selected);
  Matrix out(1, 1, loss);
  check_finite("softmax_xent", out);
  Var self{nodes_.size()};
  return emplace(std::move(out), node(logits).tracked,
                 [logits, self, selected, probs = std::move(probs),
                  labels = std::move(labels),
                  row_mask = std::move(row_mask)](Tape& t) {
                   const double g =
                       t.node(self).grad.at(0, 0) / static_cast<double>(selected);
                   Matrix d(probs.rows(), probs.cols());
                   for (std::size_t i = 0; i < probs.rows(); ++i) {
                     if (!row_mask.empty() && !row_mask[i]) continue;
                     auto p = probs.row(i);
                     auto dr = d.row(i);
                     for (std::size_t j = 0; j < p.size(); ++j) {
                       dr[j] = g * p[j];
                     }
                     dr[labels[i]] -= g;
                   }
                   t.accumulate(logits, d);
                 });
}

void Tape::backward(Var loss) {
  if (backward_done_) {
    throw ConfigError("Tape: backward() may only run once per tape");
  }
  backward_done_ = true;
  Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(root.value));
  }
  if (!root.tracked) {
    return;  // no parameters feed the loss; all gradients are zero
  }
  root.grad.at(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.tracked && n.backprop) {
      n.backprop(*this);
    }
  }
  for (const auto& binding : bindings_) {
    const Matrix& g = nodes_[binding.node].grad;
    Matrix& acc = binding.store->grad(binding.name);
    auto dst = acc.flat();
    auto add = g.flat();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += add[i];
    }
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.tracked) {
    return Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar: expected 1x1, got " + shape_str(m));
  }
  return m.at(0, 0);
}

}  // namespace kgd
