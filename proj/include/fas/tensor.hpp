#ifndef FAS_TENSOR_HPP_
#define FAS_TENSOR_HPP_

#include <cstddef>
#include <vector>

namespace fas {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T{})
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  T* plane(int ni, int ci) {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
  }
  const T* plane(int ni, int ci) const {
    return data.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
  }
  T& at(int ni, int ci, int y, int x) {
    return plane(ni, ci)[static_cast<std::size_t>(y) * w + x];
  }
  const T& at(int ni, int ci, int y, int x) const {
    return plane(ni, ci)[static_cast<std::size_t>(y) * w + x];
  }
};

}  // namespace fas

#endif  // FAS_TENSOR_HPP_
