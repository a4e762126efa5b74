#ifndef FAS_NETWORK_HPP_
#define FAS_NETWORK_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fas/core.hpp"
#include "fas/tensor.hpp"

namespace fas::network {

struct ModelConfig {
  double theta = 0.7;
  double width_multiplier = 0.25;
  int input_height = 64;
  int input_width = 64;
  int output_channels = 3;

  struct Widths {
    int stem, stage1, stage2, stage3, head;
  };
  /// Channel counts after applying `width_multiplier` to the base widths.
  Widths widths() const;
  void validate() const;
};

struct LossConfig {
  double alpha = 1.0;
  double beta = 0.5;
  void validate() const;
};

template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
};

template <typename T>
struct ForwardCache;

/// Dual-stream central-difference network with a three-channel pixel head.
///
/// A CDC stem feeds two streams of three CDC stages (conv, ReLU, 2x2 max
/// pool). After every stage a cross-feature interaction block runs a 1x1
/// convolution over both streams' concatenated features and adds the result
/// back to each stream. The six stage outputs are resampled to a 1/4-scale
/// grid, concatenated, decoded by a CDC layer and a 1x1 projection to three
/// planes, upsampled to input size and squashed by a sigmoid.
template <typename T>
class Network {
 public:
  Network(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t parameter_count() const;
  Param<T>& param(const std::string& name);

  /// images: N x 3 x H x W in [0, 1]; returns N x 3 x H x W in (0, 1).
  /// Pass a cache to enable `backward`.
  Tensor<T> forward(const Tensor<T>& images, ForwardCache<T>* cache = nullptr) const;

  /// Accumulates parameter gradients and returns the gradient with respect
  /// to the input images.
  Tensor<T> backward(const ForwardCache<T>& cache, const Tensor<T>& grad_output);

  void zero_grad();

 private:
  ModelConfig config_;
  std::vector<Param<T>> params_;
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  Tensor<T> stem;
  Tensor<T> conv_a[3], conv_b[3];
  std::vector<std::int64_t> pool_a[3], pool_b[3];
  Tensor<T> fused_in[3];
  Tensor<T> out_a[3], out_b[3];
  Tensor<T> features;
  Tensor<T> head;
  Tensor<T> output;
};

// Losses over N x C x H x W tensors --------------------------------------

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& label);

/// Eight 3x3 contrast kernels (centre +1, one neighbour -1) evaluated at
/// every interior pixel; per direction the mean squared difference between
/// prediction and label responses, summed over directions, averaged over
/// batch and channels.
template <typename T>
T contrastive_depth_loss(const Tensor<T>& pred, const Tensor<T>& label);

template <typename T>
struct LossValue {
  T total = 0;
  T mse = 0;
  T contrastive = 0;
  Tensor<T> grad;  // d total / d pred
};

template <typename T>
LossValue<T> total_loss(const Tensor<T>& pred, const Tensor<T>& label, const LossConfig& cfg);

/// Adam with bias correction.
template <typename T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  void step(std::vector<Param<T>>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Checkpoints ---------------------------------------------------------------

struct Checkpoint {
  ModelConfig model;
  LossConfig loss;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  Network<float> network{ModelConfig{}, 0};
};

/// Writes `config.json` and `params.bin` (per block: u32 LE name length,
/// name bytes, u32 LE value count, f32 LE values) into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::vector<std::uint8_t> encode_params(const std::vector<Param<float>>& params);
void decode_params(std::span<const std::uint8_t> bytes, std::vector<Param<float>>& params);

// Conversions between samples and tensors.
Tensor<float> images_to_tensor(std::span<const ColorImage* const> images);
Tensor<float> maps_to_tensor(std::span<const ThreeChannelMap* const> maps);
ThreeChannelMap tensor_to_map(const Tensor<float>& t, int index);

}  // namespace fas::network

#endif  // FAS_NETWORK_HPP_
