#include "mgnn/common.hpp"

#include <algorithm>
#include <cmath>

namespace mgnn {

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : Error(path + ":" + std::to_string(line) + ": " + what), path_(std::move(path)), line_(line) {}

IoError::IoError(std::string path, const std::string& what)
    : Error(what + ": " + path), path_(std::move(path)) {}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mgnn
