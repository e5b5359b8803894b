#include "ruka/nn/tensor.hpp"

#include <cmath>
#include <string>

namespace ruka::nn {

bool Tensor2::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected " + std::to_string(rows) +
                                                  "x" + std::to_string(cols) + ", got " +
                                                  std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  }
}

void fill_uniform(Tensor2& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values()) v = u(rng);
}

void to_json(nlohmann::json& j, const Tensor2& t) {
  j = {{"rows", t.rows()}, {"cols", t.cols()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

void from_json(const nlohmann::json& j, Tensor2& t) {
  const std::size_t rows = j.at("rows");
  const std::size_t cols = j.at("cols");
  const auto& values = j.at("values");
  if (values.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "tensor value count does not match its shape");
  }
  t = Tensor2(rows, cols);
  std::size_t i = 0;
  for (const auto& v : values) t.values()[i++] = v.get<double>();
}

}  // namespace ruka::nn
