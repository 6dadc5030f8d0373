#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpt {

// Dense row-major double tensor. All numerics in this library run in
// double; reduced precision is simulated by value snapping, never by a
// narrower storage type.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);

  static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::int64_t> shape, double v);
  static Tensor from_data(std::vector<std::int64_t> shape, std::vector<double> data);
  static Tensor scalar(double v) { return from_data({1}, {v}); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  double max_abs() const;
  double max_value() const;
  bool all_finite() const;
  // Throws std::domain_error naming the offending tensor.
  void require_finite(const std::string& what) const;

  void fill(double v);
  Tensor reshaped(std::vector<std::int64_t> shape) const;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

std::int64_t shape_product(const std::vector<std::int64_t>& shape);

}  // namespace cpt
