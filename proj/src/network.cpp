#include "fas/network.hpp"

#include <cmath>
#include <random>

#include "fas/error.hpp"
#include "fas/kernels.hpp"

namespace fas::network {

namespace k = kernels;

ModelConfig::Widths ModelConfig::widths() const {
  auto scale = [&](int base) {
    return std::max(1, static_cast<int>(std::lround(base * width_multiplier)));
  };
  return {scale(64), scale(64), scale(128), scale(128), scale(64)};
}

void ModelConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("theta must lie in [0, 1]");
  if (!(width_multiplier > 0.0)) throw ValidationError("width multiplier must be positive");
  if (output_channels != 3) throw ValidationError("the network always emits 3 channels");
  if (input_height <= 0 || input_width <= 0 || input_height % 8 || input_width % 8)
    throw ValidationError("input size must be a positive multiple of 8");
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0))
    throw ValidationError("loss weights must be non-negative and not both zero");
}

namespace {

enum ParamIndex : std::size_t {
  kStem = 0,
  kStage0 = 1,  // per stage: stream a, stream b, fusion weight, fusion bias
  kHeadCdc = 13,
  kHeadOut = 14,
  kHeadBias = 15,
};

constexpr std::size_t stream_a(int s) { return kStage0 + 4 * s; }
constexpr std::size_t stream_b(int s) { return kStage0 + 4 * s + 1; }
constexpr std::size_t fuse_w(int s) { return kStage0 + 4 * s + 2; }
constexpr std::size_t fuse_b(int s) { return kStage0 + 4 * s + 3; }

template <typename T>
std::span<const T> view(const Param<T>& p) {
  return p.value;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Network<T>::Network(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto wd = config_.widths();
  const int stage_c[3] = {wd.stage1, wd.stage2, wd.stage3};
  std::mt19937_64 rng(seed);

  auto add = [&](std::string name, std::size_t count, double stddev) {
    Param<T> p;
    p.name = std::move(name);
    p.value.resize(count);
    p.grad.assign(count, T{0});
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : p.value) v = stddev > 0.0 ? static_cast<T>(dist(rng)) : T{0};
    params_.push_back(std::move(p));
  };

  add("stem.cdc", static_cast<std::size_t>(wd.stem) * 3 * 9, std::sqrt(2.0 / (3 * 9)));
  int prev = wd.stem;
  for (int s = 0; s < 3; ++s) {
    const int c = stage_c[s];
    const std::string tag = "stage" + std::to_string(s + 1);
    const double he = std::sqrt(2.0 / (prev * 9));
    add("stream_a." + tag + ".cdc", static_cast<std::size_t>(c) * prev * 9, he);
    add("stream_b." + tag + ".cdc", static_cast<std::size_t>(c) * prev * 9, he);
    add("cfim." + tag + ".weight", static_cast<std::size_t>(2 * c) * (2 * c),
        0.5 / std::sqrt(2.0 * c));
    add("cfim." + tag + ".bias", static_cast<std::size_t>(2 * c), 0.0);
    prev = c;
  }
  const int feat = 2 * (wd.stage1 + wd.stage2 + wd.stage3);
  add("head.cdc", static_cast<std::size_t>(wd.head) * feat * 9, std::sqrt(2.0 / (feat * 9)));
  add("head.out.weight", static_cast<std::size_t>(3) * wd.head, std::sqrt(1.0 / wd.head));
  add("head.out.bias", 3, 0.0);
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
Param<T>& Network<T>::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ValidationError("no parameter named '" + name + "'");
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T{0});
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& images, ForwardCache<T>* cache) const {
  if (images.c != 3 || images.h != config_.input_height || images.w != config_.input_width)
    throw ValidationError("input is " + std::to_string(images.c) + "x" +
                          std::to_string(images.h) + "x" + std::to_string(images.w) +
                          ", model expects 3x" + std::to_string(config_.input_height) + "x" +
                          std::to_string(config_.input_width));
  const T theta = static_cast<T>(config_.theta);
  const auto wd = config_.widths();
  const int stage_c[3] = {wd.stage1, wd.stage2, wd.stage3};
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;

  c.input = images;
  c.stem = k::cdc_conv<T>(images, view(params_[kStem]), wd.stem, theta);
  k::relu_forward(c.stem);

  const Tensor<T>* prev_a = &c.stem;
  const Tensor<T>* prev_b = &c.stem;
  for (int s = 0; s < 3; ++s) {
    const int ch = stage_c[s];
    c.conv_a[s] = k::cdc_conv<T>(*prev_a, view(params_[stream_a(s)]), ch, theta);
    c.conv_b[s] = k::cdc_conv<T>(*prev_b, view(params_[stream_b(s)]), ch, theta);
    k::relu_forward(c.conv_a[s]);
    k::relu_forward(c.conv_b[s]);
    Tensor<T> pa, pb;
    k::maxpool2_forward(c.conv_a[s], pa, c.pool_a[s]);
    k::maxpool2_forward(c.conv_b[s], pb, c.pool_b[s]);
    const Tensor<T>* both[] = {&pa, &pb};
    c.fused_in[s] = k::concat_channels<T>(both);
    Tensor<T> z;
    k::conv1x1_forward<T>(c.fused_in[s], view(params_[fuse_w(s)]), view(params_[fuse_b(s)]),
                          2 * ch, z);
    const int split[] = {ch, ch};
    auto parts = k::split_channels<T>(z, split);
    add_into(pa, parts[0]);
    add_into(pb, parts[1]);
    c.out_a[s] = std::move(pa);
    c.out_b[s] = std::move(pb);
    prev_a = &c.out_a[s];
    prev_b = &c.out_b[s];
  }

  const int gh = config_.input_height / 4, gw = config_.input_width / 4;
  Tensor<T> resized[6];
  for (int s = 0; s < 3; ++s) {
    k::resize_bilinear_forward(c.out_a[s], gh, gw, resized[2 * s]);
    k::resize_bilinear_forward(c.out_b[s], gh, gw, resized[2 * s + 1]);
  }
  const Tensor<T>* feats[] = {&resized[0], &resized[1], &resized[2],
                              &resized[3], &resized[4], &resized[5]};
  c.features = k::concat_channels<T>(feats);

  c.head = k::cdc_conv<T>(c.features, view(params_[kHeadCdc]), wd.head, theta);
  k::relu_forward(c.head);
  Tensor<T> logits;
  k::conv1x1_forward<T>(c.head, view(params_[kHeadOut]), view(params_[kHeadBias]), 3, logits);
  k::resize_bilinear_forward(logits, config_.input_height, config_.input_width, c.output);
  k::sigmoid_forward(c.output);
  return c.output;
}

namespace {

// Backward through a CDC conv: returns grad wrt input, accumulates weight grad.
template <typename T>
Tensor<T> cdc_layer_backward(const Tensor<T>& input, const Tensor<T>& grad_out, Param<T>& p,
                       T theta) {
  Tensor<T> grad_in;
  std::vector<T> g_w(p.value.size());
  k::cdc_backward<T>(input, grad_out, view(p), theta, grad_in, g_w);
  accumulate(p.grad, g_w);
  return grad_in;
}

}  // namespace

template <typename T>
Tensor<T> Network<T>::backward(const ForwardCache<T>& c, const Tensor<T>& grad_output) {
  if (!grad_output.same_shape(c.output))
    throw ValidationError("output gradient does not match the cached forward pass");
  const T theta = static_cast<T>(config_.theta);
  const auto wd = config_.widths();
  const int stage_c[3] = {wd.stage1, wd.stage2, wd.stage3};

  Tensor<T> g = grad_output;
  k::sigmoid_backward(c.output, g);
  const int gh = config_.input_height / 4, gw = config_.input_width / 4;
  Tensor<T> g_logits;
  k::resize_bilinear_backward(g, gh, gw, g_logits);

  Tensor<T> g_head;
  {
    std::vector<T> gw_out(params_[kHeadOut].value.size()), gb_out(3);
    k::conv1x1_backward<T>(c.head, g_logits, view(params_[kHeadOut]), g_head, gw_out, gb_out);
    accumulate(params_[kHeadOut].grad, gw_out);
    accumulate(params_[kHeadBias].grad, gb_out);
  }
  k::relu_backward(c.head, g_head);
  Tensor<T> g_feat = cdc_layer_backward(c.features, g_head, params_[kHeadCdc], theta);

  const int split6[] = {stage_c[0], stage_c[0], stage_c[1], stage_c[1], stage_c[2], stage_c[2]};
  auto g_parts = k::split_channels<T>(g_feat, split6);
  Tensor<T> g_out_a[3], g_out_b[3];
  for (int s = 0; s < 3; ++s) {
    k::resize_bilinear_backward(g_parts[2 * s], c.out_a[s].h, c.out_a[s].w, g_out_a[s]);
    k::resize_bilinear_backward(g_parts[2 * s + 1], c.out_b[s].h, c.out_b[s].w, g_out_b[s]);
  }

  Tensor<T> g_prev_a, g_prev_b;
  for (int s = 2; s >= 0; --s) {
    const int ch = stage_c[s];
    if (s < 2) {
      add_into(g_out_a[s], g_prev_a);
      add_into(g_out_b[s], g_prev_b);
    }
    const Tensor<T>* gz_parts[] = {&g_out_a[s], &g_out_b[s]};
    const Tensor<T> gz = k::concat_channels<T>(gz_parts);
    Tensor<T> g_fused;
    std::vector<T> gwf(params_[fuse_w(s)].value.size()), gbf(2 * ch);
    k::conv1x1_backward<T>(c.fused_in[s], gz, view(params_[fuse_w(s)]), g_fused, gwf, gbf);
    accumulate(params_[fuse_w(s)].grad, gwf);
    accumulate(params_[fuse_b(s)].grad, gbf);
    const int split[] = {ch, ch};
    auto gf = k::split_channels<T>(g_fused, split);
    add_into(g_out_a[s], gf[0]);
    add_into(g_out_b[s], gf[1]);

    Tensor<T> g_conv_a, g_conv_b;
    k::maxpool2_backward(g_out_a[s], c.pool_a[s], g_conv_a);
    k::maxpool2_backward(g_out_b[s], c.pool_b[s], g_conv_b);
    k::relu_backward(c.conv_a[s], g_conv_a);
    k::relu_backward(c.conv_b[s], g_conv_b);
    const Tensor<T>& in_a = s == 0 ? c.stem : c.out_a[s - 1];
    const Tensor<T>& in_b = s == 0 ? c.stem : c.out_b[s - 1];
    g_prev_a = cdc_layer_backward(in_a, g_conv_a, params_[stream_a(s)], theta);
    g_prev_b = cdc_layer_backward(in_b, g_conv_b, params_[stream_b(s)], theta);
  }

  Tensor<T> g_stem = std::move(g_prev_a);
  add_into(g_stem, g_prev_b);
  k::relu_backward(c.stem, g_stem);
  return cdc_layer_backward(c.input, g_stem, params_[kStem], theta);
}

template class Network<float>;
template class Network<double>;

template <typename T>
Adam<T>::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

template <typename T>
void Adam<T>::step(std::vector<Param<T>>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

Tensor<float> images_to_tensor(std::span<const ColorImage* const> images) {
  if (images.empty()) return {};
  const int h = images.front()->height, w = images.front()->width;
  Tensor<float> t(static_cast<int>(images.size()), 3, h, w);
  for (int ni = 0; ni < t.n; ++ni) {
    const auto& img = *images[ni];
    if (img.height != h || img.width != w) throw ValidationError("images differ in size");
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const auto* p = img.px(u, v);
        for (int ch = 0; ch < 3; ++ch) t.at(ni, ch, v, u) = p[ch] / 255.0f;
      }
  }
  return t;
}

Tensor<float> maps_to_tensor(std::span<const ThreeChannelMap* const> maps) {
  if (maps.empty()) return {};
  const int h = maps.front()->height(), w = maps.front()->width();
  Tensor<float> t(static_cast<int>(maps.size()), 3, h, w);
  for (int ni = 0; ni < t.n; ++ni) {
    const auto& m = *maps[ni];
    if (m.height() != h || m.width() != w) throw ValidationError("maps differ in size");
    std::copy(m.attack.data.begin(), m.attack.data.end(), t.plane(ni, 0));
    std::copy(m.living.data.begin(), m.living.data.end(), t.plane(ni, 1));
    std::copy(m.background.data.begin(), m.background.data.end(), t.plane(ni, 2));
  }
  return t;
}

ThreeChannelMap tensor_to_map(const Tensor<float>& t, int index) {
  if (t.c != 3 || index < 0 || index >= t.n) throw ValidationError("not a three-channel batch");
  ThreeChannelMap m(t.h, t.w);
  const std::size_t hw = t.plane_size();
  std::copy_n(t.plane(index, 0), hw, m.attack.data.begin());
  std::copy_n(t.plane(index, 1), hw, m.living.data.begin());
  std::copy_n(t.plane(index, 2), hw, m.background.data.begin());
  return m;
}

}  // namespace fas::network
