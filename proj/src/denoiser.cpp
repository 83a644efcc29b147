#include "dosmct/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "dosmct/rng.hpp"

namespace dosmct {

namespace {

constexpr int kInPlanes = 2;

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct Shift {
  int dy, dx, y0, y1, x0, x1;
};

Shift shift_for(int ky, int kx, int d, int nx, int ny) {
  Shift s;
  s.dy = (ky - 1) * d;
  s.dx = (kx - 1) * d;
  s.y0 = std::max(0, -s.dy);
  s.y1 = std::min(ny, ny - s.dy);
  s.x0 = std::max(0, -s.dx);
  s.x1 = std::min(nx, nx - s.dx);
  return s;
}

// col[(ci*9 + tap), pixel] = in[ci] at the tap's shifted position, zero
// outside the image.
void im2col(const float* in, int cin, int d, int nx, int ny, float* col) {
  const std::size_t hw = static_cast<std::size_t>(nx) * ny;
  std::fill(col, col + static_cast<std::size_t>(cin) * 9 * hw, 0.0f);
  for (int ci = 0; ci < cin; ++ci)
    for (int tap = 0; tap < 9; ++tap) {
      const Shift s = shift_for(tap / 3, tap % 3, d, nx, ny);
      const float* src = in + ci * hw;
      float* dst = col + (static_cast<std::size_t>(ci) * 9 + tap) * hw;
      for (int y = s.y0; y < s.y1; ++y) {
        const float* irow = src + static_cast<std::ptrdiff_t>(y + s.dy) * nx + s.dx;
        float* orow = dst + static_cast<std::size_t>(y) * nx;
        for (int x = s.x0; x < s.x1; ++x) orow[x] = irow[x];
      }
    }
}

// Adjoint of im2col: scatter-adds col back onto the input planes.
void col2im(const float* col, int cin, int d, int nx, int ny, float* in) {
  const std::size_t hw = static_cast<std::size_t>(nx) * ny;
  std::fill(in, in + static_cast<std::size_t>(cin) * hw, 0.0f);
  for (int ci = 0; ci < cin; ++ci)
    for (int tap = 0; tap < 9; ++tap) {
      const Shift s = shift_for(tap / 3, tap % 3, d, nx, ny);
      float* dst = in + ci * hw;
      const float* src = col + (static_cast<std::size_t>(ci) * 9 + tap) * hw;
      for (int y = s.y0; y < s.y1; ++y) {
        float* irow = dst + static_cast<std::ptrdiff_t>(y + s.dy) * nx + s.dx;
        const float* crow = src + static_cast<std::size_t>(y) * nx;
        for (int x = s.x0; x < s.x1; ++x) irow[x] += crow[x];
      }
    }
}

}  // namespace

void DenoiserArch::validate() const {
  if (hidden_channels < 1) throw std::invalid_argument("denoiser: hidden_channels must be >= 1");
  if (dilations.size() < 2) throw std::invalid_argument("denoiser: at least 2 layers are required");
  for (int d : dilations)
    if (d < 1) throw std::invalid_argument("denoiser: dilations must be >= 1");
  if (!(sigma_data > 0.0)) throw std::invalid_argument("denoiser: sigma_data must be positive");
}

int DenoiserArch::receptive_field() const {
  int r = 1;
  for (int d : dilations) r += 2 * d;
  return r;
}

Preconditioning Preconditioning::at(double sigma, double sd) {
  const double v = sigma * sigma + sd * sd;
  return {sd * sd / v, sigma * sd / std::sqrt(v), 1.0 / std::sqrt(v), 0.25 * std::log(sigma)};
}

DenoiserModel::DenoiserModel(DenoiserArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t offset = 0;
  for (int l = 0; l < arch_.layers(); ++l) {
    Layer layer;
    layer.cin = l == 0 ? kInPlanes : arch_.hidden_channels;
    layer.cout = l + 1 == arch_.layers() ? 1 : arch_.hidden_channels;
    layer.dilation = arch_.dilations[l];
    layer.w_offset = offset;
    offset += static_cast<std::size_t>(layer.cout) * layer.cin * 9;
    layer.b_offset = offset;
    offset += static_cast<std::size_t>(layer.cout);
    layers_.push_back(layer);
  }
  params_.assign(offset, 0.0f);
}

void DenoiserModel::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0f);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const double std_dev = std::sqrt(2.0 / (9.0 * layer.cin));
    const std::size_t n = static_cast<std::size_t>(layer.cout) * layer.cin * 9;
    for (std::size_t i = 0; i < n; ++i)
      params_[layer.w_offset + i] = static_cast<float>(std_dev * rng.normal());
  }
}

void DenoiserModel::forward(std::span<const double> x, int nx, int ny, double sigma,
                            DenoiserWorkspace& ws) const {
  const std::size_t hw = static_cast<std::size_t>(nx) * ny;
  if (x.size() != hw) throw std::invalid_argument("denoiser: input size does not match nx*ny");
  if (!(sigma > 0.0)) throw std::invalid_argument("denoiser: sigma must be positive");
  const Preconditioning pc = Preconditioning::at(sigma, arch_.sigma_data);
  ws.acts.resize(layers_.size());
  ws.acts[0].resize(kInPlanes * hw);
  for (std::size_t i = 0; i < hw; ++i) {
    ws.acts[0][i] = static_cast<float>(pc.c_in * x[i]);
    ws.acts[0][hw + i] = static_cast<float>(pc.c_noise);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    std::vector<float>& dst = last ? ws.out : ws.acts[l + 1];
    dst.resize(layer.cout * hw);
    ws.col.resize(static_cast<std::size_t>(layer.cin) * 9 * hw);
    im2col(ws.acts[l].data(), layer.cin, layer.dilation, nx, ny, ws.col.data());
    const ConstMatrixMap w(params_.data() + layer.w_offset, layer.cout, layer.cin * 9);
    const Eigen::Map<const Eigen::VectorXf> b(params_.data() + layer.b_offset, layer.cout);
    const ConstMatrixMap col(ws.col.data(), layer.cin * 9, static_cast<Eigen::Index>(hw));
    MatrixMap out(dst.data(), layer.cout, static_cast<Eigen::Index>(hw));
    out.noalias() = w * col;
    out.colwise() += b;
    if (!last)
      for (float& v : dst) v = std::max(v, 0.0f);
  }
}

void DenoiserModel::network(std::span<const double> x, int nx, int ny, double sigma,
                            std::span<double> out) const {
  DenoiserWorkspace ws;
  forward(x, nx, ny, sigma, ws);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ws.out[i];
}

Image DenoiserModel::denoise(const Image& x, double sigma) const {
  const Preconditioning pc = Preconditioning::at(sigma, arch_.sigma_data);
  Image out(x.grid);
  network(x.values, x.grid.nx, x.grid.ny, sigma, out.values);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = pc.c_skip * x.values[i] + pc.c_out * out.values[i];
  return out;
}

Image DenoiserModel::score(const Image& x, double sigma) const {
  Image d = denoise(x, sigma);
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = (d.values[i] - x.values[i]) * inv;
  return d;
}

double DenoiserModel::accumulate_gradient(std::span<const double> x0, std::span<const double> z,
                                          int nx, int ny, double sigma, std::span<double> grad,
                                          DenoiserWorkspace& ws) const {
  const std::size_t hw = static_cast<std::size_t>(nx) * ny;
  if (x0.size() != hw || z.size() != hw) throw std::invalid_argument("denoiser: sample size mismatch");
  if (grad.size() != params_.size()) throw std::invalid_argument("denoiser: gradient size mismatch");
  const Preconditioning pc = Preconditioning::at(sigma, arch_.sigma_data);
  std::vector<double> xt(hw);
  for (std::size_t i = 0; i < hw; ++i) xt[i] = x0[i] + sigma * z[i];
  forward(xt, nx, ny, sigma, ws);

  ws.grad_out.resize(hw);
  double loss = 0.0;
  const double scale = 2.0 / static_cast<double>(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    const double target = (x0[i] - pc.c_skip * xt[i]) / pc.c_out;
    const double diff = ws.out[i] - target;
    loss += diff * diff;
    ws.grad_out[i] = static_cast<float>(scale * diff);
  }
  loss /= static_cast<double>(hw);

  std::vector<float>* g = &ws.grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    if (l + 1 < layers_.size()) {
      const std::vector<float>& act = ws.acts[l + 1];
      for (std::size_t i = 0; i < g->size(); ++i)
        if (act[i] <= 0.0f) (*g)[i] = 0.0f;
    }
    std::vector<float>* gin = nullptr;
    if (l > 0) {
      gin = g == &ws.grad_a ? &ws.grad_b : &ws.grad_a;
      gin->resize(layer.cin * hw);
    }
    const Eigen::Index k = layer.cin * 9;
    ws.col.resize(static_cast<std::size_t>(k) * hw);
    im2col(ws.acts[l].data(), layer.cin, layer.dilation, nx, ny, ws.col.data());
    const ConstMatrixMap col(ws.col.data(), k, static_cast<Eigen::Index>(hw));
    const ConstMatrixMap gm(g->data(), layer.cout, static_cast<Eigen::Index>(hw));
    const RowMatrix gw = gm * col.transpose();
    const Eigen::VectorXf gb = gm.rowwise().sum();
    for (Eigen::Index r = 0; r < gw.rows(); ++r)
      for (Eigen::Index c = 0; c < k; ++c) grad[layer.w_offset + r * k + c] += gw(r, c);
    for (Eigen::Index r = 0; r < gb.size(); ++r) grad[layer.b_offset + r] += gb(r);
    if (gin) {
      const ConstMatrixMap w(params_.data() + layer.w_offset, layer.cout, k);
      ws.gcol.resize(static_cast<std::size_t>(k) * hw);
      MatrixMap gcol(ws.gcol.data(), k, static_cast<Eigen::Index>(hw));
      gcol.noalias() = w.transpose() * gm;
      col2im(ws.gcol.data(), layer.cin, layer.dilation, nx, ny, gin->data());
      g = gin;
    }
  }
  return loss;
}

nlohmann::json DenoiserModel::descriptor() const {
  return {{"type", "conv_denoiser"},
          {"hidden_channels", arch_.hidden_channels},
          {"dilations", arch_.dilations},
          {"sigma_data", arch_.sigma_data},
          {"input_planes", kInPlanes},
          {"conditioning", "input_concat_log_sigma"},
          {"output", "score=(c_skip*x+c_out*F-x)/sigma^2"},
          {"receptive_field", arch_.receptive_field()},
          {"parameter_count", params_.size()}};
}

DenoiserScore::DenoiserScore(std::shared_ptr<const DenoiserModel> model, NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(schedule) {
  if (!model_) throw std::invalid_argument("DenoiserScore: null model");
  schedule_.validate();
}

Image DenoiserScore::evaluate(const Image& x, std::size_t step) const {
  return model_->score(x, sigma_at(schedule_, step));
}

}  // namespace dosmct
