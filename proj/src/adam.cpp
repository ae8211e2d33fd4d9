#include "mvl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mvl {

void Adam::step(const TensorRefs& params) {
  if (m_.empty()) {
    for (const Tensor* t : params) {
      m_.emplace_back(t->value.rows(), t->value.cols());
      v_.emplace_back(t->value.rows(), t->value.cols());
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: tensor list changed size");
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.value.same_shape(m_[i])) throw std::invalid_argument("Adam: tensor shape changed");
    double* val = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (size_t j = 0; j < p.value.size(); ++j) {
      m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
      v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace mvl
