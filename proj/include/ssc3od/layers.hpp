#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssc3od/rng.hpp"
#include "ssc3od/tensor.hpp"

namespace ssc3od::nn {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// ---------------------------------------------------------------------------
// Losses. Probabilities are clamped to [1e-9, 1 - 1e-9] before logs; the
// gradient is zero at clamped entries.
// ---------------------------------------------------------------------------

enum class Reduction { mean, sum };

inline constexpr double kProbClamp = 1e-9;

double bce_loss(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                Reduction red = Reduction::mean);
Eigen::ArrayXd bce_loss_grad(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                             Reduction red = Reduction::mean);

double smooth_l1(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                 double beta = 1.0, Reduction red = Reduction::mean);
Eigen::ArrayXd smooth_l1_grad(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                              double beta = 1.0, Reduction red = Reduction::mean);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::ArrayXd m, v;
  std::int64_t t = 0;
};

void adam_step(Eigen::ArrayXd& param, const Eigen::ArrayXd& grad, AdamState& state,
               const AdamConfig& cfg);

/// Per-parameter Adam over named tensors; steps use each tensor's grad buffer.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamRef>& params);
  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, AdamState> states_;
};

// ---------------------------------------------------------------------------
// Layers. forward() fills a per-call cache so one layer instance can serve
// several in-flight activations (shared-weight encoders); backward()
// accumulates parameter gradients and returns the input gradient.
// ---------------------------------------------------------------------------

struct ConvCache {
  Eigen::MatrixXd cols;  // (out locations) x (in_ch * k * k)
  int in_h = 0, in_w = 0;
};

class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad);

  void init_he(Rng& rng);

  Tensor forward(const Tensor& x, ConvCache& cache) const;
  Tensor backward(const Tensor& dy, const ConvCache& cache);

  void params(std::vector<ParamRef>& out);
  const std::string& name() const { return name_; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (out)

 private:
  std::string name_;
  int in_ch_, out_ch_, k_, stride_, pad_;
};

struct DeconvCache {
  Eigen::MatrixXd in_mat;  // (in locations) x in_ch
  int in_h = 0, in_w = 0;
};

/// Transposed convolution; exact adjoint of Conv2d with the same kernel,
/// stride, and padding. With stride s the spatial dims multiply by s
/// (kernel k = s, pad 0).
class Deconv2d {
 public:
  Deconv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad);

  void init_he(Rng& rng);

  Tensor forward(const Tensor& x, DeconvCache& cache) const;
  Tensor backward(const Tensor& dy, const DeconvCache& cache);

  void params(std::vector<ParamRef>& out);
  const std::string& name() const { return name_; }

  Tensor weight;  // (in, out, k, k)
  Tensor bias;    // (out)

 private:
  std::string name_;
  int in_ch_, out_ch_, k_, stride_, pad_;
};

struct EltwiseCache {
  Eigen::ArrayXd saved;
};

class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.1) : slope_(slope) {}
  Tensor forward(const Tensor& x, EltwiseCache& cache) const;
  Tensor backward(const Tensor& dy, const EltwiseCache& cache) const;
  double slope() const { return slope_; }

 private:
  double slope_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x, EltwiseCache& cache) const;
  Tensor backward(const Tensor& dy, const EltwiseCache& cache) const;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic "SSC3", u16 format version, then per parameter
// u32 name length, name bytes, u32 rank, u32 dims, little-endian f64 data.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& params);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

}  // namespace ssc3od::nn
