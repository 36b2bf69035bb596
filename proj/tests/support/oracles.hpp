#pragma once

// Independent reference implementations used to freeze expected test values.
// Everything here is deliberately written the dumb way (explicit loops,
// exhaustive enumeration) and never calls into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "kgd/data.hpp"
#include "kgd/eval.hpp"
#include "kgd/matrix.hpp"

namespace kgd::testing {

/// Plain triple-loop matrix product.
inline Matrix oracle_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        sum += a.at(i, k) * b.at(k, j);
      }
      out.at(i, j) = sum;
    }
  }
  return out;
}

/// Scalar adaptive-moment simulation for a single parameter.
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  std::uint64_t t = 0;

  double step(double theta, double g, double rate, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    return theta - rate * mhat / (std::sqrt(vhat) + eps);
  }
};

/// All spans (p, q) with p <= q < T and width <= w, by brute-force double
/// loop over the token positions.
inline std::vector<std::pair<std::size_t, std::size_t>> oracle_valid_spans(
    std::size_t token_count, std::size_t window) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t p = 0; p < token_count; ++p) {
    for (std::size_t q = p; q < token_count; ++q) {
      if (q - p + 1 <= window) {
        out.emplace_back(p, q);
      }
    }
  }
  return out;
}

/// Micro P/R/F1 by brute-force one-to-one pair matching.
struct OracleCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline OracleCounts oracle_micro_f1(
    const std::vector<std::vector<Prediction>>& predictions,
    const std::vector<std::vector<NerSpan>>& gold) {
  OracleCounts counts;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    std::vector<bool> used(gold[s].size(), false);
    for (const auto& p : predictions[s]) {
      bool matched = false;
      for (std::size_t g = 0; g < gold[s].size(); ++g) {
        if (used[g]) continue;
        if (gold[s][g].start == p.start && gold[s][g].end == p.end &&
            gold[s][g].type == p.type) {
          used[g] = true;
          matched = true;
          break;
        }
      }
      matched ? ++counts.tp : ++counts.fp;
    }
    for (bool u : used) {
      if (!u) ++counts.fn;
    }
  }
  counts.precision = counts.tp + counts.fp
                         ? double(counts.tp) / double(counts.tp + counts.fp)
                         : 0.0;
  counts.recall = counts.tp + counts.fn
                      ? double(counts.tp) / double(counts.tp + counts.fn)
                      : 0.0;
  counts.f1 = counts.precision + counts.recall > 0
                  ? 2 * counts.precision * counts.recall /
                        (counts.precision + counts.recall)
                  : 0.0;
  return counts;
}

/// Exhaustive decoding oracle. Enumerates every subset of the candidates,
/// keeps the non-overlapping ones, and returns the unique subset closed under
/// the selection priority (descending score; ties by earlier start, shorter
/// width, lexicographic type): a candidate belongs to the subset exactly when
/// no higher-priority member overlapping it does.
inline std::vector<Prediction> oracle_decode_subset(
    std::vector<Prediction> candidates) {
  const std::size_t n = candidates.size();
  std::sort(candidates.begin(), candidates.end(),
            [](const Prediction& a, const Prediction& b) {
              const std::size_t aw = a.end - a.start;
              const std::size_t bw = b.end - b.start;
              return std::tie(b.score, a.start, aw, a.type) <
                     std::tie(a.score, b.start, bw, b.type);
            });
  auto overlap = [](const Prediction& a, const Prediction& b) {
    return a.start <= b.end && b.start <= a.end;
  };
  std::vector<Prediction> found;
  std::size_t hits = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    bool feasible = true;
    for (std::size_t i = 0; i < n && feasible; ++i) {
      if (!(mask >> i & 1)) continue;
      for (std::size_t j = i + 1; j < n && feasible; ++j) {
        if ((mask >> j & 1) && overlap(candidates[i], candidates[j])) {
          feasible = false;
        }
      }
    }
    if (!feasible) continue;
    bool closed = true;
    for (std::size_t i = 0; i < n && closed; ++i) {
      bool blocked = false;
      for (std::size_t j = 0; j < i; ++j) {
        if ((mask >> j & 1) && overlap(candidates[i], candidates[j])) {
          blocked = true;
          break;
        }
      }
      const bool member = mask >> i & 1;
      if (member == blocked) closed = false;
    }
    if (!closed) continue;
    ++hits;
    found.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) found.push_back(candidates[i]);
    }
  }
  if (hits != 1) {
    throw std::logic_error("oracle_decode_subset: closure subset not unique");
  }
  std::sort(found.begin(), found.end(),
            [](const Prediction& a, const Prediction& b) {
              return std::tie(a.start, a.end, a.type) <
                     std::tie(b.start, b.end, b.type);
            });
  return found;
}

/// Least squares via normal equations with a tiny ridge, solved by Gaussian
/// elimination with partial pivoting. Returns W minimizing ||X W - Y||^2.
inline Matrix oracle_least_squares(const Matrix& x, const Matrix& y,
                                   double ridge = 1e-8) {
  const std::size_t d = x.cols();
  Matrix gram = oracle_matmul(transpose(x), x);
  for (std::size_t i = 0; i < d; ++i) {
    gram.at(i, i) += ridge;
  }
  Matrix rhs = oracle_matmul(transpose(x), y);
  // Forward elimination with partial pivoting on [gram | rhs].
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < d; ++r) {
      if (std::abs(gram.at(r, col)) > std::abs(gram.at(pivot, col))) pivot = r;
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < d; ++c) std::swap(gram.at(col, c), gram.at(pivot, c));
      for (std::size_t c = 0; c < rhs.cols(); ++c)
        std::swap(rhs.at(col, c), rhs.at(pivot, c));
    }
    const double diag = gram.at(col, col);
    for (std::size_t r = col + 1; r < d; ++r) {
      const double factor = gram.at(r, col) / diag;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < d; ++c) {
        gram.at(r, c) -= factor * gram.at(col, c);
      }
      for (std::size_t c = 0; c < rhs.cols(); ++c) {
        rhs.at(r, c) -= factor * rhs.at(col, c);
      }
    }
  }
  Matrix w(d, rhs.cols());
  for (std::size_t col = rhs.cols(); col-- > 0;) {
    for (std::size_t r = d; r-- > 0;) {
      double sum = rhs.at(r, col);
      for (std::size_t c = r + 1; c < d; ++c) {
        sum -= gram.at(r, c) * w.at(c, col);
      }
      w.at(r, col) = sum / gram.at(r, r);
    }
  }
  return w;
}

}  // namespace kgd::testing
