#include "mvl/matrix.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

extern "C" void openblas_set_num_threads(int);

namespace mvl {

namespace {

// Summation order inside dgemm must not depend on runtime thread count.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;

void check_shape(bool ok, const char* what, const Matrix& a, const Matrix& b) {
  if (!ok) {
    std::ostringstream os;
    os << what << ": shapes " << a.shape_str() << " and " << b.shape_str() << " do not compose";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<size_t>(rows) * cols) {
    throw std::invalid_argument("Matrix: data length does not match rows*cols");
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::uniform(int rows, int cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.data_) v = rng.uniform(lo, hi);
  return m;
}

void Matrix::fill(double v) {
  for (double& x : data_) x = v;
}

void Matrix::scale(double s) {
  for (double& x : data_) x *= s;
}

void Matrix::add_scaled(const Matrix& o, double s) {
  check_shape(same_shape(o), "add_scaled", *this, o);
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::fabs(x));
  return m;
}

double Matrix::frob_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix Matrix::col_mean() const {
  Matrix m(1, cols_);
  if (rows_ == 0) return m;
  for (int r = 0; r < rows_; ++r) {
    const double* src = row(r);
    for (int c = 0; c < cols_; ++c) m(0, c) += src[c];
  }
  m.scale(1.0 / rows_);
  return m;
}

void Matrix::sub_row_vector(const Matrix& v) {
  if (v.rows() != 1 || v.cols() != cols_) {
    throw std::invalid_argument("sub_row_vector: vector shape " + v.shape_str() + " vs matrix " + shape_str());
  }
  for (int r = 0; r < rows_; ++r) {
    double* dst = row(r);
    for (int c = 0; c < cols_; ++c) dst[c] -= v(0, c);
  }
}

std::string Matrix::shape_str() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b, bool trans_a, bool trans_b, double alpha) {
  const int m = trans_a ? a.cols() : a.rows();
  const int k = trans_a ? a.rows() : a.cols();
  const int kb = trans_b ? b.cols() : b.rows();
  const int n = trans_b ? b.rows() : b.cols();
  check_shape(k == kb, "matmul", a, b);
  if (c.rows() != m || c.cols() != n) {
    throw std::invalid_argument("matmul: output shape " + c.shape_str() + " does not match result");
  }
  if (m == 0 || n == 0) return;
  if (k == 0) return;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
              alpha, a.data(), a.cols(), b.data(), b.cols(), 1.0, c.data(), c.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a, bool trans_b) {
  const int m = trans_a ? a.cols() : a.rows();
  const int n = trans_b ? b.rows() : b.cols();
  Matrix c(m, n);
  matmul_acc(c, a, b, trans_a, trans_b, 1.0);
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c.add_scaled(b, 1.0);
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c.add_scaled(b, -1.0);
  return c;
}

void zero_grads(const TensorRefs& params) {
  for (Tensor* t : params) t->zero_grad();
}

size_t param_count(const TensorRefs& params) {
  size_t n = 0;
  for (const Tensor* t : params) n += t->value.size();
  return n;
}

std::vector<double> flatten_values(const TensorRefs& params) {
  std::vector<double> flat;
  flat.reserve(param_count(params));
  for (const Tensor* t : params) flat.insert(flat.end(), t->value.data(), t->value.data() + t->value.size());
  return flat;
}

std::vector<double> flatten_grads(const TensorRefs& params) {
  std::vector<double> flat;
  flat.reserve(param_count(params));
  for (const Tensor* t : params) flat.insert(flat.end(), t->grad.data(), t->grad.data() + t->grad.size());
  return flat;
}

void assign_values(const TensorRefs& params, const std::vector<double>& flat) {
  if (flat.size() != param_count(params)) {
    throw std::invalid_argument("assign_values: flat vector length mismatch");
  }
  size_t off = 0;
  for (Tensor* t : params) {
    std::copy(flat.begin() + off, flat.begin() + off + t->value.size(), t->value.data());
    off += t->value.size();
  }
}

}  // namespace mvl
