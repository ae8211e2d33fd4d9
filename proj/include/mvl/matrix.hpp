#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvl/rng.hpp"

namespace mvl {

// Dense row-major matrix of 64-bit floats. All heavy products go through
// matmul(); everything else is plain loops.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {}
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix identity(int n);
  static Matrix uniform(int rows, int cols, Rng& rng, double lo, double hi);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v);
  void zero() { fill(0.0); }
  void scale(double s);
  // this += s * o
  void add_scaled(const Matrix& o, double s);
  void add(const Matrix& o) { add_scaled(o, 1.0); }

  double max_abs() const;
  double frob_norm() const;
  bool all_finite() const;

  Matrix transposed() const;

  // Column means as a 1 x cols matrix.
  Matrix col_mean() const;
  // Subtract the given 1 x cols row vector from every row.
  void sub_row_vector(const Matrix& v);

  std::string shape_str() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// c = op(a) * op(b). Shapes are checked; mismatch throws std::invalid_argument.
Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a = false, bool trans_b = false);

// c += alpha * op(a) * op(b), shapes checked against c.
void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b, bool trans_a = false,
                bool trans_b = false, double alpha = 1.0);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

// Trainable tensor: value plus gradient accumulator of the same shape.
struct Tensor {
  Matrix value;
  Matrix grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}
  Tensor(int rows, int cols) : value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.zero(); }
};

using TensorRefs = std::vector<Tensor*>;

void zero_grads(const TensorRefs& params);
size_t param_count(const TensorRefs& params);
std::vector<double> flatten_values(const TensorRefs& params);
std::vector<double> flatten_grads(const TensorRefs& params);
void assign_values(const TensorRefs& params, const std::vector<double>& flat);

}  // namespace mvl
