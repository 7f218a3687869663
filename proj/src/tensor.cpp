#include "ssc3od/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace ssc3od::nn {

namespace {
std::int64_t product(const std::vector<int>& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}
}  // namespace

Tensor Tensor::zeros(std::vector<int> s) {
  Tensor t;
  t.shape = std::move(s);
  t.data = Eigen::ArrayXd::Zero(product(t.shape));
  return t;
}

Tensor Tensor::from(std::vector<int> s, Eigen::ArrayXd values) {
  if (product(s) != values.size()) {
    throw std::invalid_argument("tensor data length does not match shape " + shape_string(s));
  }
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(values);
  return t;
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad = Eigen::ArrayXd::Zero(data.size());
}

void Tensor::zero_grad() {
  if (grad.size() != data.size()) grad = Eigen::ArrayXd::Zero(data.size());
  else grad.setZero();
}

double& Tensor::at(int c, int y, int x) {
  const int h = shape[shape.size() - 2];
  const int w = shape[shape.size() - 1];
  return data[(static_cast<std::int64_t>(c) * h + y) * w + x];
}

double Tensor::at(int c, int y, int x) const {
  const int h = shape[shape.size() - 2];
  const int w = shape[shape.size() - 1];
  return data[(static_cast<std::int64_t>(c) * h + y) * w + x];
}

Eigen::Map<Eigen::MatrixXd> Tensor::as_matrix(Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != data.size()) throw std::invalid_argument("as_matrix size mismatch");
  return {data.data(), rows, cols};
}

Eigen::Map<const Eigen::MatrixXd> Tensor::as_matrix(Eigen::Index rows, Eigen::Index cols) const {
  if (rows * cols != data.size()) throw std::invalid_argument("as_matrix size mismatch");
  return {data.data(), rows, cols};
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace ssc3od::nn
