#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "noisebench/nn/tensor.hpp"

namespace noisebench::nn {

template <typename S>
struct LossResult {
  double loss = 0.0;    // mean negative log-likelihood over the batch
  Tensor<S> dlogits;    // gradient wrt logits (includes the 1/N factor)
};

// Numerically stable softmax cross-entropy with mean reduction. The gradient
// at the logits is (softmax - onehot) / N. Internal sums run in double.
template <typename S>
LossResult<S> softmax_cross_entropy(const Tensor<S>& logits,
                                    const std::vector<std::uint8_t>& labels) {
  if (logits.rank() != 2)
    throw ShapeError("softmax_cross_entropy: expected [N,K] logits, got " +
                     logits.shape_string());
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");

  LossResult<S> res;
  res.dlogits = Tensor<S>(logits.shape());
  double total = 0.0;
  const double inv_n = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    if (labels[i] >= k)
      throw ValueError("softmax_cross_entropy: label " + std::to_string(int(labels[i])) +
                       " out of range");
    const S* row = logits.data() + Eigen::Index(i) * k;
    double mx = static_cast<double>(row[0]);
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(sum);
    total += lse - static_cast<double>(row[labels[i]]);
    S* grow = res.dlogits.data() + Eigen::Index(i) * k;
    for (int j = 0; j < k; ++j)
      grow[j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - lse) * inv_n);
    grow[labels[i]] -= static_cast<S>(inv_n);
  }
  res.loss = total * inv_n;
  return res;
}

// Row-wise argmax (first maximum wins), used for accuracy.
template <typename S>
std::vector<int> argmax_rows(const Tensor<S>& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows: expected a 2-d tensor");
  const int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const S* row = logits.data() + Eigen::Index(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace noisebench::nn
