#include "ssc3od/layers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ssc3od::nn {

namespace {

int conv_out_dim(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  if (span < 0) throw std::invalid_argument("conv: kernel larger than padded input");
  return span / stride + 1;
}

int deconv_out_dim(int in, int k, int stride, int pad) {
  const int out = (in - 1) * stride + k - 2 * pad;
  if (out < 1) throw std::invalid_argument("deconv: degenerate output dim");
  return out;
}

// (Ho*Wo) x (C*k*k) patch matrix; rows follow the output lattice row-major,
// columns follow (c, ky, kx). Out-of-bounds taps read 0.
Eigen::MatrixXd im2col(const Tensor& x, int k, int stride, int pad, int out_h, int out_w) {
  const int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out_h) * out_w,
                                               static_cast<Eigen::Index>(c_in) * k * k);
  for (int c = 0; c < c_in; ++c) {
    const double* chan = x.data.data() + static_cast<std::int64_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        double* dst = cols.col(col).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src_row = chan + static_cast<std::int64_t>(iy) * w;
          double* dst_row = dst + static_cast<std::int64_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dst_row[ox] = src_row[ix];
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add patch columns back onto a (C, H, W) tensor.
Tensor col2im(const Eigen::MatrixXd& cols, int c_out, int h, int w, int k, int stride,
              int pad, int lat_h, int lat_w) {
  Tensor out = Tensor::zeros({c_out, h, w});
  for (int c = 0; c < c_out; ++c) {
    double* chan = out.data.data() + static_cast<std::int64_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
        const double* src = cols.col(col).data();
        for (int oy = 0; oy < lat_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst_row = chan + static_cast<std::int64_t>(iy) * w;
          const double* src_row = src + static_cast<std::int64_t>(oy) * lat_w;
          for (int ox = 0; ox < lat_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
  return out;
}

Eigen::ArrayXd clamp_probs(const Eigen::ArrayXd& p) {
  return p.max(kProbClamp).min(1.0 - kProbClamp);
}

}  // namespace

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double bce_loss(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target, Reduction red) {
  if (pred.size() != target.size()) throw std::invalid_argument("bce: size mismatch");
  const Eigen::ArrayXd p = clamp_probs(pred);
  const double total = -(target * p.log() + (1.0 - target) * (1.0 - p).log()).sum();
  return red == Reduction::mean ? total / static_cast<double>(pred.size()) : total;
}

Eigen::ArrayXd bce_loss_grad(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                             Reduction red) {
  if (pred.size() != target.size()) throw std::invalid_argument("bce: size mismatch");
  Eigen::ArrayXd g(pred.size());
  const double scale =
      red == Reduction::mean ? 1.0 / static_cast<double>(pred.size()) : 1.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (p <= kProbClamp || p >= 1.0 - kProbClamp) {
      g[i] = 0.0;  // clamped region
      continue;
    }
    g[i] = scale * (-target[i] / p + (1.0 - target[i]) / (1.0 - p));
  }
  return g;
}

double smooth_l1(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target, double beta,
                 Reduction red) {
  if (pred.size() != target.size()) throw std::invalid_argument("smooth_l1: size mismatch");
  if (pred.size() == 0) return 0.0;
  const Eigen::ArrayXd d = (pred - target).abs();
  const Eigen::ArrayXd elem =
      (d < beta).select(0.5 * d.square() / beta, d - 0.5 * beta);
  const double total = elem.sum();
  return red == Reduction::mean ? total / static_cast<double>(pred.size()) : total;
}

Eigen::ArrayXd smooth_l1_grad(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& target,
                              double beta, Reduction red) {
  if (pred.size() != target.size()) throw std::invalid_argument("smooth_l1: size mismatch");
  const double scale =
      red == Reduction::mean && pred.size() > 0
          ? 1.0 / static_cast<double>(pred.size())
          : 1.0;
  Eigen::ArrayXd g(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    g[i] = scale * (std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(Eigen::ArrayXd& param, const Eigen::ArrayXd& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (param.size() != grad.size()) throw std::invalid_argument("adam: size mismatch");
  if (state.m.size() != param.size()) {
    state.m = Eigen::ArrayXd::Zero(param.size());
    state.v = Eigen::ArrayXd::Zero(param.size());
    state.t = 0;
  }
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.square();
  const double mc = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double vc = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  param -= cfg.lr * (state.m / mc) / ((state.v / vc).sqrt() + cfg.eps);
}

void Adam::step(const std::vector<ParamRef>& params) {
  for (const ParamRef& p : params) {
    if (!p.tensor->has_grad()) throw std::invalid_argument("adam: parameter without grad: " + p.name);
    adam_step(p.tensor->data, p.tensor->grad, states_[p.name], cfg_);
    if (!p.tensor->data.isFinite().all()) {
      throw std::runtime_error("adam: non-finite parameter after update: " + p.name);
    }
  }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad)
    : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
  weight = Tensor::zeros({out_ch, in_ch, k, k});
  bias = Tensor::zeros({out_ch});
  weight.ensure_grad();
  bias.ensure_grad();
}

void Conv2d::init_he(Rng& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
  for (Eigen::Index i = 0; i < weight.data.size(); ++i) weight.data[i] = rng.normal(0.0, std);
  bias.data.setZero();
}

Tensor Conv2d::forward(const Tensor& x, ConvCache& cache) const {
  if (x.rank() != 3 || x.dim(0) != in_ch_) {
    throw std::invalid_argument(name_ + ": input shape " + shape_string(x.shape));
  }
  const int h = x.dim(1), w = x.dim(2);
  const int oh = conv_out_dim(h, k_, stride_, pad_);
  const int ow = conv_out_dim(w, k_, stride_, pad_);
  cache.cols = im2col(x, k_, stride_, pad_, oh, ow);
  cache.in_h = h;
  cache.in_w = w;

  Tensor y = Tensor::zeros({out_ch_, oh, ow});
  auto y_mat = y.as_matrix(static_cast<Eigen::Index>(oh) * ow, out_ch_);
  const auto w_mat = weight.as_matrix(static_cast<Eigen::Index>(in_ch_) * k_ * k_, out_ch_);
  y_mat.noalias() = cache.cols * w_mat;
  for (int o = 0; o < out_ch_; ++o) y_mat.col(o).array() += bias.data[o];
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, const ConvCache& cache) {
  const int oh = dy.dim(1), ow = dy.dim(2);
  const auto dy_mat = dy.as_matrix(static_cast<Eigen::Index>(oh) * ow, out_ch_);

  Eigen::Map<Eigen::MatrixXd> dw_mat(weight.grad.data(),
                                     static_cast<Eigen::Index>(in_ch_) * k_ * k_, out_ch_);
  dw_mat.noalias() += cache.cols.transpose() * dy_mat;
  for (int o = 0; o < out_ch_; ++o) bias.grad[o] += dy_mat.col(o).sum();

  const auto w_mat = weight.as_matrix(static_cast<Eigen::Index>(in_ch_) * k_ * k_, out_ch_);
  const Eigen::MatrixXd dcols = dy_mat * w_mat.transpose();
  return col2im(dcols, in_ch_, cache.in_h, cache.in_w, k_, stride_, pad_, oh, ow);
}

void Conv2d::params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight});
  out.push_back({name_ + ".bias", &bias});
}

// ---------------------------------------------------------------------------
// Deconv2d
// ---------------------------------------------------------------------------

Deconv2d::Deconv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad)
    : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
  weight = Tensor::zeros({in_ch, out_ch, k, k});
  bias = Tensor::zeros({out_ch});
  weight.ensure_grad();
  bias.ensure_grad();
}

void Deconv2d::init_he(Rng& rng) {
  const double std = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
  for (Eigen::Index i = 0; i < weight.data.size(); ++i) weight.data[i] = rng.normal(0.0, std);
  bias.data.setZero();
}

Tensor Deconv2d::forward(const Tensor& x, DeconvCache& cache) const {
  if (x.rank() != 3 || x.dim(0) != in_ch_) {
    throw std::invalid_argument(name_ + ": input shape " + shape_string(x.shape));
  }
  const int h = x.dim(1), w = x.dim(2);
  const int oh = deconv_out_dim(h, k_, stride_, pad_);
  const int ow = deconv_out_dim(w, k_, stride_, pad_);
  cache.in_mat = x.as_matrix(static_cast<Eigen::Index>(h) * w, in_ch_);
  cache.in_h = h;
  cache.in_w = w;

  const auto w_mat = weight.as_matrix(static_cast<Eigen::Index>(out_ch_) * k_ * k_, in_ch_);
  const Eigen::MatrixXd cols = cache.in_mat * w_mat.transpose();
  Tensor y = col2im(cols, out_ch_, oh, ow, k_, stride_, pad_, h, w);
  auto y_mat = y.as_matrix(static_cast<Eigen::Index>(oh) * ow, out_ch_);
  for (int o = 0; o < out_ch_; ++o) y_mat.col(o).array() += bias.data[o];
  return y;
}

Tensor Deconv2d::backward(const Tensor& dy, const DeconvCache& cache) {
  const int oh = dy.dim(1), ow = dy.dim(2);
  const Eigen::MatrixXd dcols = im2col(dy, k_, stride_, pad_, cache.in_h, cache.in_w);

  Eigen::Map<Eigen::MatrixXd> dw_mat(weight.grad.data(),
                                     static_cast<Eigen::Index>(out_ch_) * k_ * k_, in_ch_);
  dw_mat.noalias() += dcols.transpose() * cache.in_mat;
  const auto dy_mat = dy.as_matrix(static_cast<Eigen::Index>(oh) * ow, out_ch_);
  for (int o = 0; o < out_ch_; ++o) bias.grad[o] += dy_mat.col(o).sum();

  const auto w_mat = weight.as_matrix(static_cast<Eigen::Index>(out_ch_) * k_ * k_, in_ch_);
  Tensor dx = Tensor::zeros({in_ch_, cache.in_h, cache.in_w});
  auto dx_mat = dx.as_matrix(static_cast<Eigen::Index>(cache.in_h) * cache.in_w, in_ch_);
  dx_mat.noalias() = dcols * w_mat;
  return dx;
}

void Deconv2d::params(std::vector<ParamRef>& out) {
  out.push_back({name_ + ".weight", &weight});
  out.push_back({name_ + ".bias", &bias});
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Tensor LeakyRelu::forward(const Tensor& x, EltwiseCache& cache) const {
  cache.saved = x.data;
  Tensor y;
  y.shape = x.shape;
  y.data = (x.data >= 0.0).select(x.data, slope_ * x.data);
  return y;
}

Tensor LeakyRelu::backward(const Tensor& dy, const EltwiseCache& cache) const {
  Tensor dx;
  dx.shape = dy.shape;
  dx.data = (cache.saved >= 0.0).select(dy.data, slope_ * dy.data);
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, EltwiseCache& cache) const {
  Tensor y;
  y.shape = x.shape;
  y.data = 1.0 / (1.0 + (-x.data).exp());
  cache.saved = y.data;
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy, const EltwiseCache& cache) const {
  Tensor dx;
  dx.shape = dy.shape;
  dx.data = dy.data * cache.saved * (1.0 - cache.saved);
  return dx;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write("SSC3", 4);
  put_u16(os, kCheckpointVersion);
  for (const auto& [name, tensor] : params) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(tensor->shape.size()));
    for (int d : tensor->shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < tensor->data.size(); ++i) put_f64(os, tensor->data[i]);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SSC3", 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const std::uint16_t version = get_u16(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version in " + path);
  }
  std::map<std::string, Tensor> out;
  while (true) {
    const std::uint32_t name_len = get_u32(is);
    if (is.eof() || !is) break;
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(is);
    std::vector<int> shape(rank);
    std::int64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(get_u32(is));
      n *= shape[i];
    }
    Eigen::ArrayXd data(n);
    for (std::int64_t i = 0; i < n; ++i) data[i] = get_f64(is);
    if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    out.emplace(std::move(name), Tensor::from(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace ssc3od::nn
