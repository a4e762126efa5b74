#ifndef FAS_KERNELS_HPP_
#define FAS_KERNELS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "fas/tensor.hpp"

// Dense kernels for the network. The 3x3 convolutions come in two flavours:
// an OpenMP-parallel version used for training and inference, and a plain
// serial `_reference` version kept for tests and benchmarks. Both are
// instantiated for float and double.
namespace fas::kernels {

// 3x3, stride 1, zero padding 1, no bias. Weights are [cout][cin][3][3].
template <typename T>
void conv3x3_forward(const Tensor<T>& x, std::span<const T> weights, int cout, Tensor<T>& y);
template <typename T>
void conv3x3_forward_reference(const Tensor<T>& x, std::span<const T> weights, int cout,
                               Tensor<T>& y);

/// Gradient with respect to the convolution input.
template <typename T>
void conv3x3_backward_input(const Tensor<T>& grad_y, std::span<const T> weights, int cin,
                            Tensor<T>& grad_x);
template <typename T>
void conv3x3_backward_input_reference(const Tensor<T>& grad_y, std::span<const T> weights,
                                      int cin, Tensor<T>& grad_x);

/// Gradient with respect to the weights, summed over the batch. Overwrites.
template <typename T>
void conv3x3_backward_weight(const Tensor<T>& x, const Tensor<T>& grad_y,
                             std::span<T> grad_weights);
template <typename T>
void conv3x3_backward_weight_reference(const Tensor<T>& x, const Tensor<T>& grad_y,
                                       std::span<T> grad_weights);

// Central difference convolution:
//   y(p0) = sum_{pn in R(p0)} w(pn) * (x(p0 + pn) - theta * x(p0))
// where R(p0) holds the taps that land inside the image. Equals a zero-padded
// 3x3 convolution at theta = 0 and maps constant input to 0 at theta = 1.

template <typename T>
Tensor<T> cdc_conv(const Tensor<T>& x, std::span<const T> weights, int cout, T theta);
/// Serial evaluation of the defining formula, tap by tap.
template <typename T>
Tensor<T> cdc_conv_reference(const Tensor<T>& x, std::span<const T> weights, int cout,
                             T theta);
/// Overwrites grad_x and grad_weights.
template <typename T>
void cdc_backward(const Tensor<T>& x, const Tensor<T>& grad_y, std::span<const T> weights,
                  T theta, Tensor<T>& grad_x, std::span<T> grad_weights);

// 1x1 convolution with optional bias (empty span = no bias).
template <typename T>
void conv1x1_forward(const Tensor<T>& x, std::span<const T> weights, std::span<const T> bias,
                     int cout, Tensor<T>& y);
template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Tensor<T>& grad_y, std::span<const T> weights,
                      Tensor<T>& grad_x, std::span<T> grad_weights, std::span<T> grad_bias);

template <typename T>
void relu_forward(Tensor<T>& x);
/// grad *= (activated > 0)
template <typename T>
void relu_backward(const Tensor<T>& activated, Tensor<T>& grad);

/// 2x2 max pooling, stride 2. `argmax` receives the flat input index per output.
template <typename T>
void maxpool2_forward(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int64_t>& argmax);
template <typename T>
void maxpool2_backward(const Tensor<T>& grad_y, const std::vector<std::int64_t>& argmax,
                       Tensor<T>& grad_x);

/// Bilinear resampling with half-pixel centres (align_corners = false).
template <typename T>
void resize_bilinear_forward(const Tensor<T>& x, int out_h, int out_w, Tensor<T>& y);
template <typename T>
void resize_bilinear_backward(const Tensor<T>& grad_y, int in_h, int in_w, Tensor<T>& grad_x);

template <typename T>
void sigmoid_forward(Tensor<T>& x);
/// grad *= s * (1 - s), `activated` holding s.
template <typename T>
void sigmoid_backward(const Tensor<T>& activated, Tensor<T>& grad);

/// Channel concatenation and its inverse.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const int> channels);

}  // namespace fas::kernels

#endif  // FAS_KERNELS_HPP_
