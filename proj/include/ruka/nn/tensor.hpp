#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "ruka/common.hpp"

namespace ruka::nn {

/// Row-major f64 matrix.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what);

/// Uniform(-bound, bound) fill.
void fill_uniform(Tensor2& t, double bound, std::mt19937_64& rng);

void to_json(nlohmann::json& j, const Tensor2& t);
void from_json(const nlohmann::json& j, Tensor2& t);

}  // namespace ruka::nn
