#include <cmath>

#include "fas/error.hpp"
#include "fas/network.hpp"

namespace fas::network {

namespace {

constexpr int kDirections[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                   {0, 1},   {1, -1}, {1, 0},  {1, 1}};

template <typename T>
void check_pair(const Tensor<T>& pred, const Tensor<T>& label) {
  if (!pred.same_shape(label)) throw ValidationError("prediction and label shapes differ");
  if (pred.size() == 0) throw ValidationError("empty tensors");
}

// Accumulates the contrastive loss and, when `grad` is non-null, adds
// `scale * d loss / d pred` into it.
template <typename T>
double contrastive_impl(const Tensor<T>& pred, const Tensor<T>& label, Tensor<T>* grad,
                        double scale) {
  if (pred.h < 3 || pred.w < 3)
    throw ValidationError("contrastive depth loss needs at least 3x3 planes");
  const int h = pred.h, w = pred.w;
  const double denom = static_cast<double>(pred.n) * pred.c * (h - 2) * (w - 2);
  double total = 0.0;
  std::vector<double> err(pred.plane_size());
  for (int ni = 0; ni < pred.n; ++ni)
    for (int ci = 0; ci < pred.c; ++ci) {
      const T* p = pred.plane(ni, ci);
      const T* l = label.plane(ni, ci);
      for (std::size_t i = 0; i < err.size(); ++i)
        err[i] = static_cast<double>(p[i]) - static_cast<double>(l[i]);
      T* g = grad ? grad->plane(ni, ci) : nullptr;
      for (const auto& d : kDirections)
        for (int y = 1; y < h - 1; ++y)
          for (int x = 1; x < w - 1; ++x) {
            const std::size_t c0 = static_cast<std::size_t>(y) * w + x;
            const std::size_t c1 = static_cast<std::size_t>(y + d[0]) * w + (x + d[1]);
            const double diff = err[c0] - err[c1];
            total += diff * diff;
            if (g) {
              const double gd = scale * 2.0 * diff / denom;
              g[c0] += static_cast<T>(gd);
              g[c1] -= static_cast<T>(gd);
            }
          }
    }
  return total / denom;
}

}  // namespace

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& label) {
  check_pair(pred, label);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(label.data[i]);
    s += d * d;
  }
  return static_cast<T>(s / static_cast<double>(pred.size()));
}

template <typename T>
T contrastive_depth_loss(const Tensor<T>& pred, const Tensor<T>& label) {
  check_pair(pred, label);
  return static_cast<T>(contrastive_impl<T>(pred, label, nullptr, 0.0));
}

template <typename T>
LossValue<T> total_loss(const Tensor<T>& pred, const Tensor<T>& label, const LossConfig& cfg) {
  cfg.validate();
  check_pair(pred, label);
  LossValue<T> out;
  out.grad = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
  const double n = static_cast<double>(pred.size());
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(label.data[i]);
    mse += d * d;
    out.grad.data[i] = static_cast<T>(cfg.alpha * 2.0 * d / n);
  }
  mse /= n;
  double cd = 0.0;
  if (cfg.beta > 0.0) cd = contrastive_impl<T>(pred, label, &out.grad, cfg.beta);
  else cd = contrastive_impl<T>(pred, label, nullptr, 0.0);
  out.mse = static_cast<T>(mse);
  out.contrastive = static_cast<T>(cd);
  out.total = static_cast<T>(cfg.alpha * mse + cfg.beta * cd);
  return out;
}

#define FAS_INSTANTIATE(T)                                                          \
  template T mse_loss<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template T contrastive_depth_loss<T>(const Tensor<T>&, const Tensor<T>&);         \
  template LossValue<T> total_loss<T>(const Tensor<T>&, const Tensor<T>&, const LossConfig&);
FAS_INSTANTIATE(float)
FAS_INSTANTIATE(double)
#undef FAS_INSTANTIATE

}  // namespace fas::network
