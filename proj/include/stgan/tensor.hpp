#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stgan {

using Shape = std::vector<std::size_t>;

// Row-major dense matrix used for all batched model arithmetic.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of 64-bit floats.
///
/// The public value type of the library: parameters, datasets and layer
/// inputs are all Tensors. Batched kernels view rank-2 tensors through
/// `matrix()` without copying.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_matrix(const Mat& m);
  // Rank-2 literal, row by row.
  static Tensor matrix2d(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  // Rank-2 views (rank-1 tensors are viewed as a single row).
  MatMap matrix();
  ConstMatMap matrix() const;

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  // Over-aligned so vectorized kernels peel the same way for every copy;
  // otherwise reductions could round differently between equal tensors.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

enum class Activation { Sigmoid, Tanh };

/// Matrix product of rank-2 tensors. Throws DimensionError naming both
/// shapes when the inner dimensions disagree.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor activation(Activation kind, const Tensor& x);

double sigmoid(double x);

// Elementwise kernels on batched matrices.
Mat sigmoid(const Mat& x);
Mat tanh(const Mat& x);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace stgan
