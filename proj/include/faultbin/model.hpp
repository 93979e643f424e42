#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "faultbin/dataset.hpp"

namespace faultbin {

enum class LayerKind : std::uint8_t { Linear, Conv, ReLU, MaxPool, Flatten };

std::string_view to_string(LayerKind k);
LayerKind layer_kind_from_string(std::string_view s);

/// Linear: in -> out features. Conv: in -> out channels, square kernel,
/// stride 1, zero padding. MaxPool: non-overlapping pool x pool windows.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int in = 0;
  int out = 0;
  int kernel = 0;
  int pad = 0;
  int pool = 2;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  int channels = 1;
  int height = 28;
  int width = 28;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TensorShape {
  int c = 0;
  int h = 0;
  int w = 0;
  int size() const { return c * h * w; }
};

/// Shape after each layer; throws LearnError when layers do not chain.
std::vector<TensorShape> layer_shapes(const ModelSpec& spec);
/// Indices of Linear and Conv layers.
std::vector<int> param_layers(const ModelSpec& spec);

/// Fully connected ReLU network over flattened input; sizes include the input
/// and output widths (e.g. 784, 256, 256, 10).
ModelSpec mlp_spec(const std::vector<int>& sizes, int height = 28, int width = 28);
/// LeNet-5 on 28x28 input padded to 32x32: three 5x5 convolutions with max
/// pooling after the first two, then 120-84-10 fully connected.
ModelSpec lenet5_spec();

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& doc);

struct MacCount {
  long long multiplications = 0;
  long long additions = 0;
};

/// Closed forms per layer: n_in * n_out for Linear and
/// n_in_channel * k^2 * d_f^2 * n_out_channel for Conv. Additions count one
/// accumulate per multiplication (the bias takes the place of the first).
MacCount count_macs(const ModelSpec& spec);

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Trainable parameters of every Linear/Conv layer, as reduction x outputs
/// matrices. Conv reduction index is (in_channel * k + ky) * k + kx.
template <class T>
struct Model {
  ModelSpec spec;
  std::vector<RowMatrix<T>> weights;
  std::vector<RowVector<T>> biases;
};

using FloatModel = Model<float>;

template <class T>
struct Gradients {
  std::vector<RowMatrix<T>> weights;
  std::vector<RowVector<T>> biases;
};

/// Per Linear/Conv layer, a constant added to each output column before the
/// activation; an empty entry adds nothing.
template <class T>
using OutputOffsets = std::vector<RowVector<T>>;

template <class T>
Model<T> init_model(const ModelSpec& spec, std::uint64_t seed);

template <class T>
RowMatrix<T> forward_logits(const Model<T>& model, const RowMatrix<T>& x, const OutputOffsets<T>* offsets = nullptr);

/// Mean softmax cross-entropy over the batch; fills grads when non-null.
template <class T>
T loss_and_gradients(const Model<T>& model, const RowMatrix<T>& x, std::span<const std::uint8_t> labels,
                     Gradients<T>* grads, const OutputOffsets<T>* offsets = nullptr);

/// Activations entering each Linear/Conv layer (the first is the input).
std::vector<RowMatrixF> layer_inputs(const FloatModel& model, const RowMatrixF& x);

struct TrainOptions {
  int epochs = 5;
  int batch = 64;
  float lr = 0.05F;
  float momentum = 0.9F;
  float lr_decay = 0.7F;  // per epoch
  float weight_decay = 0.0F;
  std::uint64_t seed = 1;
  /// Pruning masks (1 keep, 0 zero) per weight matrix, re-applied every step.
  const std::vector<RowMatrixF>* masks = nullptr;
  /// Recomputed at the start of every epoch from the current weights.
  std::function<OutputOffsets<float>(const FloatModel&)> offsets;
};

void train(FloatModel& model, const Dataset& data, const TrainOptions& opts);
FloatModel train_baseline(const Dataset& data, const ModelSpec& spec, const TrainOptions& opts);

std::vector<int> predict(const FloatModel& model, const RowMatrixF& x);
double accuracy(const FloatModel& model, const Dataset& data);

/// Zeroes the smallest-magnitude fraction of all weights (biases untouched),
/// ties broken by position. Returns the keep-masks.
std::vector<RowMatrixF> prune(FloatModel& model, double fraction);
long long count_zero_weights(const FloatModel& model);
long long count_weights(const FloatModel& model);

nlohmann::json model_to_json(const FloatModel& model);
FloatModel model_from_json(const nlohmann::json& doc);

/// im2col for one convolution over a batch: rows b * (ho * wo) + oy * wo + ox.
template <class T>
RowMatrix<T> im2col(const RowMatrix<T>& x, const TensorShape& in, int kernel, int pad);

}  // namespace faultbin
