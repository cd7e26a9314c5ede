#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace trajlm {

/// Dense row-major double tensor. Rank 1-4 is what the pipeline uses: matrices
/// for sequence features, {C,H,W} for rasters, {O,C,Kh,Kw} for conv kernels.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);
  /// 2-D convenience with explicit row-major entries.
  static Tensor from_rows(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c);
  double operator()(std::size_t r, std::size_t c) const;
  double& at3(std::size_t c, std::size_t h, std::size_t w);
  double at3(std::size_t c, std::size_t h, std::size_t w) const;
  double& at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w);
  double at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Copy with a new shape of equal element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double value);
  void add_scaled(const Tensor& other, double scale);

  std::string shape_str() const;

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace trajlm
