#pragma once

#include <vector>

#include "mvl/matrix.hpp"

namespace mvl {

// Adam with bias correction; moment buffers are keyed by position in the
// tensor list, which must stay stable across steps.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const TensorRefs& params);

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace mvl
