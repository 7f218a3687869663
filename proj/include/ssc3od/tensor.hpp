#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ssc3od::nn {

/// Dense 64-bit tensor with an optional same-shape gradient buffer.
/// Data is flat, row-major over the shape; a (C, H, W) tensor indexes as
/// c * H * W + y * W + x.
struct Tensor {
  std::vector<int> shape;
  Eigen::ArrayXd data;
  Eigen::ArrayXd grad;  // size 0 until ensure_grad()

  Tensor() = default;

  static Tensor zeros(std::vector<int> s);
  static Tensor from(std::vector<int> s, Eigen::ArrayXd values);

  std::int64_t size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  bool has_grad() const { return grad.size() == data.size() && data.size() > 0; }
  void ensure_grad();
  void zero_grad();

  double& at(int c, int y, int x);
  double at(int c, int y, int x) const;

  // Reshape views for GEMM; total size must match rows * cols.
  Eigen::Map<Eigen::MatrixXd> as_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::Map<const Eigen::MatrixXd> as_matrix(Eigen::Index rows, Eigen::Index cols) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace ssc3od::nn
