#include "mvl/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace mvl {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("auroc: scores and labels must be equal-length and non-empty");
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

  // Walk tie groups ascending; integer pair counts keep the result exact.
  int64_t pos_total = 0, neg_total = 0;
  for (int l : labels) (l ? pos_total : neg_total) += 1;
  if (pos_total == 0 || neg_total == 0) throw std::invalid_argument("auroc: needs both classes");

  int64_t correct_twice = 0;  // 2*(ordered pairs) + (tied pairs)
  int64_t neg_below = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    int64_t pos_here = 0, neg_here = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos_here : neg_here) += 1;
      ++j;
    }
    correct_twice += 2 * pos_here * neg_below + pos_here * neg_here;
    neg_below += neg_here;
    i = j;
  }
  return static_cast<double>(correct_twice) / (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("average_precision: scores and labels must be equal-length and non-empty");
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

  int64_t positives = 0;
  double sum = 0.0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++positives;
      sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
    }
  }
  if (positives == 0) throw std::invalid_argument("average_precision: needs at least one positive");
  return sum / static_cast<double>(positives);
}

}  // namespace mvl
