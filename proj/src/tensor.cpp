#include "trajlm/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {
std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return shape.empty() ? 0 : n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ConfigError("tensor data size " + std::to_string(data_.size()) +
                      " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::from_rows(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  Tensor t({rows, cols});
  if (values.size() != rows * cols) {
    throw ConfigError("from_rows: got " + std::to_string(values.size()) + " values for " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::size_t i = 0;
  for (double v : values) t.data_[i++] = v;
  return t;
}

std::size_t Tensor::rows() const {
  if (ndim() != 2) throw ConfigError("rows(): tensor is not 2-D, shape " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw ConfigError("cols(): tensor is not 2-D, shape " + shape_str());
  return shape_[1];
}

double& Tensor::operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
double Tensor::operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

double& Tensor::at3(std::size_t c, std::size_t h, std::size_t w) {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}
double Tensor::at3(std::size_t c, std::size_t h, std::size_t w) const {
  return data_[(c * shape_[1] + h) * shape_[2] + w];
}

double& Tensor::at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w) {
  return data_[((o * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}
double Tensor::at4(std::size_t o, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[((o * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_numel(shape) != numel()) {
    throw ConfigError("reshape from " + shape_str() + " changes element count");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

void Tensor::add_scaled(const Tensor& other, double scale) {
  if (!same_shape(other)) {
    throw ConfigError("add_scaled: shape " + shape_str() + " vs " + other.shape_str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ConfigError("max_abs_diff: shape " + a.shape_str() + " vs " + b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace trajlm
