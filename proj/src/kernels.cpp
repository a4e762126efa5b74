#include "fas/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fas/error.hpp"

namespace fas::kernels {

namespace {

template <typename T>
void require_weights(std::span<const T> w, std::size_t expected, const char* what) {
  if (w.size() != expected)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(expected) +
                          " weights, got " + std::to_string(w.size()));
}

// out[x] += k0 * in[x - 1] + k1 * in[x] + k2 * in[x + 1] with zero padding.
template <typename T>
inline void row_taps(T* __restrict out, const T* __restrict in, int w, T k0, T k1, T k2) {
  if (w == 1) {
    out[0] += k1 * in[0];
    return;
  }
  out[0] += k1 * in[0] + k2 * in[1];
  for (int x = 1; x < w - 1; ++x) out[x] += k0 * in[x - 1] + k1 * in[x] + k2 * in[x + 1];
  out[w - 1] += k0 * in[w - 2] + k1 * in[w - 1];
}

// Same traversal as row_taps, applied to in[x + d] - theta * ctr[x].
template <typename T>
inline void row_taps_centered(T* __restrict out, const T* __restrict in,
                              const T* __restrict ctr, int w, T k0, T k1, T k2, T theta) {
  if (w == 1) {
    out[0] += k1 * (in[0] - theta * ctr[0]);
    return;
  }
  {
    const T c = theta * ctr[0];
    out[0] += k1 * (in[0] - c) + k2 * (in[1] - c);
  }
  for (int x = 1; x < w - 1; ++x) {
    const T c = theta * ctr[x];
    out[x] += k0 * (in[x - 1] - c) + k1 * (in[x] - c) + k2 * (in[x + 1] - c);
  }
  const T c = theta * ctr[w - 1];
  out[w - 1] += k0 * (in[w - 2] - c) + k1 * (in[w - 1] - c);
}

}  // namespace

template <typename T>
void conv3x3_forward(const Tensor<T>& x, std::span<const T> weights, int cout, Tensor<T>& y) {
  const int cin = x.c, h = x.h, w = x.w;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "conv3x3");
  y = Tensor<T>(x.n, cout, h, w);
  const int jobs = x.n * cout;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int ni = job / cout, co = job % cout;
    T* out = y.plane(ni, co);
    for (int ci = 0; ci < cin; ++ci) {
      const T* in = x.plane(ni, ci);
      const T* k = weights.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int r = y0; r < y1; ++r)
          row_taps(out + static_cast<std::size_t>(r) * w, in + static_cast<std::size_t>(r + dy) * w,
                   w, k[3 * ky], k[3 * ky + 1], k[3 * ky + 2]);
      }
    }
  }
}

template <typename T>
void conv3x3_forward_reference(const Tensor<T>& x, std::span<const T> weights, int cout,
                               Tensor<T>& y) {
  const int cin = x.c;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "conv3x3");
  y = Tensor<T>(x.n, cout, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int r = 0; r < x.h; ++r)
        for (int q = 0; q < x.w; ++q) {
          T acc = 0;
          for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r + ky - 1, xx = q + kx - 1;
                if (yy < 0 || xx < 0 || yy >= x.h || xx >= x.w) continue;
                acc += weights[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx] *
                       x.at(ni, ci, yy, xx);
              }
          y.at(ni, co, r, q) = acc;
        }
}

template <typename T>
void conv3x3_backward_input(const Tensor<T>& grad_y, std::span<const T> weights, int cin,
                            Tensor<T>& grad_x) {
  const int cout = grad_y.c, h = grad_y.h, w = grad_y.w;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "conv3x3");
  grad_x = Tensor<T>(grad_y.n, cin, h, w);
  const int jobs = grad_y.n * cin;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int ni = job / cin, ci = job % cin;
    T* out = grad_x.plane(ni, ci);
    for (int co = 0; co < cout; ++co) {
      const T* g = grad_y.plane(ni, co);
      const T* k = weights.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        // grad_x(r) collects grad_y(r - dy) through tap ky.
        const int dy = ky - 1;
        const int y0 = std::max(0, dy), y1 = std::min(h, h + dy);
        for (int r = y0; r < y1; ++r)
          row_taps(out + static_cast<std::size_t>(r) * w, g + static_cast<std::size_t>(r - dy) * w,
                   w, k[3 * ky + 2], k[3 * ky + 1], k[3 * ky]);
      }
    }
  }
}

template <typename T>
void conv3x3_backward_input_reference(const Tensor<T>& grad_y, std::span<const T> weights,
                                      int cin, Tensor<T>& grad_x) {
  const int cout = grad_y.c;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "conv3x3");
  grad_x = Tensor<T>(grad_y.n, cin, grad_y.h, grad_y.w);
  for (int ni = 0; ni < grad_y.n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int r = 0; r < grad_y.h; ++r)
        for (int q = 0; q < grad_y.w; ++q) {
          const T g = grad_y.at(ni, co, r, q);
          for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r + ky - 1, xx = q + kx - 1;
                if (yy < 0 || xx < 0 || yy >= grad_y.h || xx >= grad_y.w) continue;
                grad_x.at(ni, ci, yy, xx) +=
                    g * weights[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx];
              }
        }
}

template <typename T>
void conv3x3_backward_weight(const Tensor<T>& x, const Tensor<T>& grad_y,
                             std::span<T> grad_weights) {
  const int cin = x.c, cout = grad_y.c, h = x.h, w = x.w;
  if (grad_weights.size() != static_cast<std::size_t>(cout) * cin * 9)
    throw ValidationError("conv3x3 weight gradient has the wrong size");
  const int jobs = cout * cin;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int co = job / cin, ci = job % cin;
    T acc[9] = {};
    for (int ni = 0; ni < x.n; ++ni) {
      const T* g = grad_y.plane(ni, co);
      const T* in = x.plane(ni, ci);
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        T s0 = 0, s1 = 0, s2 = 0;
        for (int r = y0; r < y1; ++r) {
          const T* gr = g + static_cast<std::size_t>(r) * w;
          const T* ir = in + static_cast<std::size_t>(r + dy) * w;
          for (int q = 1; q < w; ++q) s0 += gr[q] * ir[q - 1];
          for (int q = 0; q < w; ++q) s1 += gr[q] * ir[q];
          for (int q = 0; q < w - 1; ++q) s2 += gr[q] * ir[q + 1];
        }
        acc[3 * ky] += s0;
        acc[3 * ky + 1] += s1;
        acc[3 * ky + 2] += s2;
      }
    }
    std::copy_n(acc, 9, grad_weights.data() + static_cast<std::size_t>(job) * 9);
  }
}

template <typename T>
void conv3x3_backward_weight_reference(const Tensor<T>& x, const Tensor<T>& grad_y,
                                       std::span<T> grad_weights) {
  const int cin = x.c, cout = grad_y.c;
  if (grad_weights.size() != static_cast<std::size_t>(cout) * cin * 9)
    throw ValidationError("conv3x3 weight gradient has the wrong size");
  std::fill(grad_weights.begin(), grad_weights.end(), T{0});
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T acc = 0;
          for (int ni = 0; ni < x.n; ++ni)
            for (int r = 0; r < x.h; ++r)
              for (int q = 0; q < x.w; ++q) {
                const int yy = r + ky - 1, xx = q + kx - 1;
                if (yy < 0 || xx < 0 || yy >= x.h || xx >= x.w) continue;
                acc += grad_y.at(ni, co, r, q) * x.at(ni, ci, yy, xx);
              }
          grad_weights[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx] = acc;
        }
}

namespace {

// Index into a 2x2x2x2 table of partial kernel sums: which of the first and
// last kernel rows and columns fall outside the image at (r, q).
inline int border_class(int r, int q, int h, int w) {
  return (r == 0 ? 8 : 0) | (r == h - 1 ? 4 : 0) | (q == 0 ? 2 : 0) | (q == w - 1 ? 1 : 0);
}

// sums[16 * (co * cin + ci) + class]: sum of the taps that stay inside.
template <typename T>
std::vector<T> inside_tap_sums(std::span<const T> weights, int cout, int cin) {
  std::vector<T> sums(static_cast<std::size_t>(cout) * cin * 16, T{0});
  for (std::size_t k = 0; k < static_cast<std::size_t>(cout) * cin; ++k)
    for (int cls = 0; cls < 16; ++cls) {
      const int ky0 = (cls & 8) ? 1 : 0, ky1 = (cls & 4) ? 1 : 2;
      const int kx0 = (cls & 2) ? 1 : 0, kx1 = (cls & 1) ? 1 : 2;
      T acc = 0;
      for (int ky = ky0; ky <= ky1; ++ky)
        for (int kx = kx0; kx <= kx1; ++kx) acc += weights[k * 9 + 3 * ky + kx];
      sums[k * 16 + cls] = acc;
    }
  return sums;
}

}  // namespace

template <typename T>
Tensor<T> cdc_conv(const Tensor<T>& x, std::span<const T> weights, int cout, T theta) {
  const int cin = x.c, h = x.h, w = x.w;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "cdc");
  Tensor<T> y(x.n, cout, h, w);
  const int jobs = x.n * cout;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int ni = job / cout, co = job % cout;
    T* out = y.plane(ni, co);
    for (int ci = 0; ci < cin; ++ci) {
      const T* in = x.plane(ni, ci);
      const T* k = weights.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int r = y0; r < y1; ++r)
          row_taps_centered(out + static_cast<std::size_t>(r) * w,
                            in + static_cast<std::size_t>(r + dy) * w,
                            in + static_cast<std::size_t>(r) * w, w, k[3 * ky], k[3 * ky + 1],
                            k[3 * ky + 2], theta);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> cdc_conv_reference(const Tensor<T>& x, std::span<const T> weights, int cout,
                             T theta) {
  const int cin = x.c;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "cdc");
  Tensor<T> y(x.n, cout, x.h, x.w);
  for (int ni = 0; ni < x.n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int r = 0; r < x.h; ++r)
        for (int q = 0; q < x.w; ++q) {
          T acc = 0;
          for (int ci = 0; ci < cin; ++ci) {
            const T* k = weights.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
            const T centre = x.at(ni, ci, r, q);
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r + ky - 1, xx = q + kx - 1;
                if (yy < 0 || xx < 0 || yy >= x.h || xx >= x.w) continue;
                acc += k[3 * ky + kx] * (x.at(ni, ci, yy, xx) - theta * centre);
              }
          }
          y.at(ni, co, r, q) = acc;
        }
  return y;
}

template <typename T>
void cdc_backward(const Tensor<T>& x, const Tensor<T>& grad_y, std::span<const T> weights,
                  T theta, Tensor<T>& grad_x, std::span<T> grad_weights) {
  const int cin = x.c, cout = grad_y.c, h = x.h, w = x.w;
  require_weights(weights, static_cast<std::size_t>(cout) * cin * 9, "cdc");
  if (grad_y.n != x.n || grad_y.h != h || grad_y.w != w)
    throw ValidationError("cdc gradient does not match the input shape");
  if (grad_weights.size() != weights.size())
    throw ValidationError("cdc weight gradient has the wrong size");
  conv3x3_backward_input<T>(grad_y, weights, cin, grad_x);
  conv3x3_backward_weight<T>(x, grad_y, grad_weights);
  if (theta == T{0}) return;
  const auto sums = inside_tap_sums(weights, cout, cin);

#pragma omp parallel for schedule(static)
  for (int job = 0; job < x.n * cin; ++job) {
    const int ni = job / cin, ci = job % cin;
    T* gx = grad_x.plane(ni, ci);
    for (int co = 0; co < cout; ++co) {
      const T* gy = grad_y.plane(ni, co);
      const T* s = sums.data() + (static_cast<std::size_t>(co) * cin + ci) * 16;
      for (int r = 0; r < h; ++r)
        for (int q = 0; q < w; ++q) {
          const std::size_t i = static_cast<std::size_t>(r) * w + q;
          gx[i] -= theta * s[border_class(r, q, h, w)] * gy[i];
        }
    }
  }

#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    std::vector<T> prod(static_cast<std::size_t>(h) * w);
    for (int ci = 0; ci < cin; ++ci) {
      std::fill(prod.begin(), prod.end(), T{0});
      for (int ni = 0; ni < x.n; ++ni) {
        const T* gy = grad_y.plane(ni, co);
        const T* in = x.plane(ni, ci);
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] += gy[i] * in[i];
      }
      T* gw = grad_weights.data() + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int r0 = std::max(0, 1 - ky), r1 = std::min(h - 1, h - ky);
          const int q0 = std::max(0, 1 - kx), q1 = std::min(w - 1, w - kx);
          T acc = 0;
          for (int r = r0; r <= r1; ++r)
            for (int q = q0; q <= q1; ++q) acc += prod[static_cast<std::size_t>(r) * w + q];
          gw[3 * ky + kx] -= theta * acc;
        }
    }
  }
}

template <typename T>
void conv1x1_forward(const Tensor<T>& x, std::span<const T> weights, std::span<const T> bias,
                     int cout, Tensor<T>& y) {
  const int cin = x.c;
  require_weights(weights, static_cast<std::size_t>(cout) * cin, "conv1x1");
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(cout))
    throw ValidationError("conv1x1 bias has the wrong size");
  y = Tensor<T>(x.n, cout, x.h, x.w);
  const std::size_t hw = x.plane_size();
  const int jobs = x.n * cout;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int ni = job / cout, co = job % cout;
    T* out = y.plane(ni, co);
    std::fill_n(out, hw, bias.empty() ? T{0} : bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T k = weights[static_cast<std::size_t>(co) * cin + ci];
      const T* in = x.plane(ni, ci);
      for (std::size_t p = 0; p < hw; ++p) out[p] += k * in[p];
    }
  }
}

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Tensor<T>& grad_y, std::span<const T> weights,
                      Tensor<T>& grad_x, std::span<T> grad_weights, std::span<T> grad_bias) {
  const int cin = x.c, cout = grad_y.c;
  const std::size_t hw = x.plane_size();
  grad_x = Tensor<T>(x.n, cin, x.h, x.w);
  const int in_jobs = x.n * cin;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < in_jobs; ++job) {
    const int ni = job / cin, ci = job % cin;
    T* out = grad_x.plane(ni, ci);
    for (int co = 0; co < cout; ++co) {
      const T k = weights[static_cast<std::size_t>(co) * cin + ci];
      const T* g = grad_y.plane(ni, co);
      for (std::size_t p = 0; p < hw; ++p) out[p] += k * g[p];
    }
  }
  const int w_jobs = cout * cin;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < w_jobs; ++job) {
    const int co = job / cin, ci = job % cin;
    T acc = 0;
    for (int ni = 0; ni < x.n; ++ni) {
      const T* g = grad_y.plane(ni, co);
      const T* in = x.plane(ni, ci);
      for (std::size_t p = 0; p < hw; ++p) acc += g[p] * in[p];
    }
    grad_weights[static_cast<std::size_t>(job)] = acc;
  }
  if (!grad_bias.empty())
    for (int co = 0; co < cout; ++co) {
      T acc = 0;
      for (int ni = 0; ni < x.n; ++ni) {
        const T* g = grad_y.plane(ni, co);
        for (std::size_t p = 0; p < hw; ++p) acc += g[p];
      }
      grad_bias[co] = acc;
    }
}

template <typename T>
void relu_forward(Tensor<T>& x) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  T* d = x.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > T{0} ? d[i] : T{0};
}

template <typename T>
void relu_backward(const Tensor<T>& activated, Tensor<T>& grad) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad.size());
  const T* a = activated.data.data();
  T* g = grad.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (!(a[i] > T{0})) g[i] = T{0};
}

template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int64_t>& argmax) {
  if (x.h % 2 || x.w % 2) throw ValidationError("max pooling needs even spatial sizes");
  const int oh = x.h / 2, ow = x.w / 2;
  y = Tensor<T>(x.n, x.c, oh, ow);
  argmax.assign(y.size(), 0);
  const int jobs = x.n * x.c;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const std::size_t in_base = static_cast<std::size_t>(job) * x.plane_size();
    const std::size_t out_base = static_cast<std::size_t>(job) * y.plane_size();
    for (int r = 0; r < oh; ++r)
      for (int q = 0; q < ow; ++q) {
        std::size_t best = in_base + static_cast<std::size_t>(2 * r) * x.w + 2 * q;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                in_base + static_cast<std::size_t>(2 * r + dy) * x.w + 2 * q + dx;
            if (x.data[idx] > x.data[best]) best = idx;
          }
        const std::size_t o = out_base + static_cast<std::size_t>(r) * ow + q;
        y.data[o] = x.data[best];
        argmax[o] = static_cast<std::int64_t>(best);
      }
  }
}

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_y, const std::vector<std::int64_t>& argmax,
                       Tensor<T>& grad_x) {
  grad_x = Tensor<T>(grad_y.n, grad_y.c, grad_y.h * 2, grad_y.w * 2);
  // Windows do not overlap, so every input index receives at most one write.
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad_y.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) grad_x.data[argmax[i]] += grad_y.data[i];
}

namespace {

struct Tap {
  int i0, i1;
  double l1;  // weight of i1
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
void resize_bilinear_forward(const Tensor<T>& x, int out_h, int out_w, Tensor<T>& y) {
  if (out_h == x.h && out_w == x.w) {
    y = x;
    return;
  }
  const auto ty = bilinear_taps(x.h, out_h), tx = bilinear_taps(x.w, out_w);
  y = Tensor<T>(x.n, x.c, out_h, out_w);
  const int jobs = x.n * x.c;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const T* in = x.data.data() + static_cast<std::size_t>(job) * x.plane_size();
    T* out = y.data.data() + static_cast<std::size_t>(job) * y.plane_size();
    for (int r = 0; r < out_h; ++r) {
      const T ly = static_cast<T>(ty[r].l1);
      const T* r0 = in + static_cast<std::size_t>(ty[r].i0) * x.w;
      const T* r1 = in + static_cast<std::size_t>(ty[r].i1) * x.w;
      for (int q = 0; q < out_w; ++q) {
        const T lx = static_cast<T>(tx[q].l1);
        const T top = (1 - lx) * r0[tx[q].i0] + lx * r0[tx[q].i1];
        const T bot = (1 - lx) * r1[tx[q].i0] + lx * r1[tx[q].i1];
        out[static_cast<std::size_t>(r) * out_w + q] = (1 - ly) * top + ly * bot;
      }
    }
  }
}

template <typename T>
void resize_bilinear_backward(const Tensor<T>& grad_y, int in_h, int in_w, Tensor<T>& grad_x) {
  if (in_h == grad_y.h && in_w == grad_y.w) {
    grad_x = grad_y;
    return;
  }
  const auto ty = bilinear_taps(in_h, grad_y.h), tx = bilinear_taps(in_w, grad_y.w);
  grad_x = Tensor<T>(grad_y.n, grad_y.c, in_h, in_w);
  const int jobs = grad_y.n * grad_y.c;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const T* g = grad_y.data.data() + static_cast<std::size_t>(job) * grad_y.plane_size();
    T* out = grad_x.data.data() + static_cast<std::size_t>(job) * grad_x.plane_size();
    for (int r = 0; r < grad_y.h; ++r) {
      const T ly = static_cast<T>(ty[r].l1);
      T* r0 = out + static_cast<std::size_t>(ty[r].i0) * in_w;
      T* r1 = out + static_cast<std::size_t>(ty[r].i1) * in_w;
      for (int q = 0; q < grad_y.w; ++q) {
        const T lx = static_cast<T>(tx[q].l1);
        const T v = g[static_cast<std::size_t>(r) * grad_y.w + q];
        r0[tx[q].i0] += (1 - ly) * (1 - lx) * v;
        r0[tx[q].i1] += (1 - ly) * lx * v;
        r1[tx[q].i0] += ly * (1 - lx) * v;
        r1[tx[q].i1] += ly * lx * v;
      }
    }
  }
}

template <typename T>
void sigmoid_forward(Tensor<T>& x) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  T* d = x.data.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = T{1} / (T{1} + std::exp(-d[i]));
}

template <typename T>
void sigmoid_backward(const Tensor<T>& activated, Tensor<T>& grad) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const T s = activated.data[i];
    grad.data[i] *= s * (T{1} - s);
  }
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) return {};
  const auto& first = *parts.front();
  int channels = 0;
  for (const auto* p : parts) {
    if (p->n != first.n || p->h != first.h || p->w != first.w)
      throw ValidationError("concatenated tensors differ in shape");
    channels += p->c;
  }
  Tensor<T> out(first.n, channels, first.h, first.w);
  for (int ni = 0; ni < first.n; ++ni) {
    int offset = 0;
    for (const auto* p : parts) {
      std::copy_n(p->plane(ni, 0), p->c * p->plane_size(), out.plane(ni, offset));
      offset += p->c;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const int> channels) {
  std::vector<Tensor<T>> out;
  int total = 0;
  for (int c : channels) {
    out.emplace_back(x.n, c, x.h, x.w);
    total += c;
  }
  if (total != x.c) throw ValidationError("channel split does not cover the tensor");
  for (int ni = 0; ni < x.n; ++ni) {
    int offset = 0;
    for (auto& part : out) {
      std::copy_n(x.plane(ni, offset), part.c * part.plane_size(), part.plane(ni, 0));
      offset += part.c;
    }
  }
  return out;
}

#define FAS_INSTANTIATE_KERNELS(T)                                                            \
  template void conv3x3_forward<T>(const Tensor<T>&, std::span<const T>, int, Tensor<T>&);    \
  template void conv3x3_forward_reference<T>(const Tensor<T>&, std::span<const T>, int,       \
                                             Tensor<T>&);                                     \
  template void conv3x3_backward_input<T>(const Tensor<T>&, std::span<const T>, int,          \
                                          Tensor<T>&);                                        \
  template void conv3x3_backward_input_reference<T>(const Tensor<T>&, std::span<const T>,     \
                                                    int, Tensor<T>&);                         \
  template void conv3x3_backward_weight<T>(const Tensor<T>&, const Tensor<T>&, std::span<T>); \
  template void conv3x3_backward_weight_reference<T>(const Tensor<T>&, const Tensor<T>&,      \
                                                     std::span<T>);                           \
  template void cdc_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>, T,   \
                                Tensor<T>&, std::span<T>);                                   \
  template Tensor<T> cdc_conv<T>(const Tensor<T>&, std::span<const T>, int, T);               \
  template Tensor<T> cdc_conv_reference<T>(const Tensor<T>&, std::span<const T>, int, T);     \
  template void conv1x1_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,  \
                                   int, Tensor<T>&);                                          \
  template void conv1x1_backward<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>,   \
                                    Tensor<T>&, std::span<T>, std::span<T>);                  \
  template void relu_forward<T>(Tensor<T>&);                                                  \
  template void relu_backward<T>(const Tensor<T>&, Tensor<T>&);                               \
  template void maxpool2_forward<T>(const Tensor<T>&, Tensor<T>&,                             \
                                    std::vector<std::int64_t>&);                              \
  template void maxpool2_backward<T>(const Tensor<T>&, const std::vector<std::int64_t>&,      \
                                     Tensor<T>&);                                             \
  template void resize_bilinear_forward<T>(const Tensor<T>&, int, int, Tensor<T>&);           \
  template void resize_bilinear_backward<T>(const Tensor<T>&, int, int, Tensor<T>&);          \
  template void sigmoid_forward<T>(Tensor<T>&);                                               \
  template void sigmoid_backward<T>(const Tensor<T>&, Tensor<T>&);                            \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>* const>);                   \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&, std::span<const int>);

FAS_INSTANTIATE_KERNELS(float)
FAS_INSTANTIATE_KERNELS(double)

#undef FAS_INSTANTIATE_KERNELS

}  // namespace fas::kernels
