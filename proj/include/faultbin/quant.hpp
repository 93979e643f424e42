#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faultbin/array.hpp"
#include "faultbin/model.hpp"

namespace faultbin {

using RowMatrixI64 = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One Linear/Conv layer in int8: q_out_acc = q_in * Wq + bq, with real value
/// acc * in_scale * w_scale.
struct QuantLayer {
  IntMatrix weights;  // int8 values, reduction x outputs
  std::vector<std::int32_t> bias;
  double w_scale = 1.0;
  double in_scale = 1.0;  // scale of the int8 activations entering the layer
};

struct QuantizedModel {
  ModelSpec spec;
  std::vector<QuantLayer> layers;  // one per Linear/Conv layer

  /// Real value of one unit of the final accumulator.
  double output_scale() const { return layers.back().in_scale * layers.back().w_scale; }
};

std::int32_t quantize_value(double x, double scale);

/// Symmetric per-tensor post-training quantization. Activation scales come
/// from the largest magnitude seen on the calibration samples.
QuantizedModel quantize(const FloatModel& model, const RowMatrixF& calibration);

nlohmann::json quantized_to_json(const QuantizedModel& q);
QuantizedModel quantized_from_json(const nlohmann::json& doc);

/// PE-array injection for every matmul of the forward pass. Reduction index
/// maps to array rows and output neuron / channel j to column j mod cols.
struct Injection {
  const FaultMap* map = nullptr;
  ArrayErrorModel err;
  ExecMode mode = ExecMode::Systolic;
  /// Run the PE-level simulators instead of adding precomputed worst-case
  /// offsets. Required for per-fault errors; slow.
  bool literal = false;
};

struct QuantForward {
  RowMatrixI64 logits;  // final accumulators; real logits = logits * scale
  double scale = 1.0;
  long long macs = 0;  // multiplications executed by the matmuls
};

/// Integer forward pass. Without injection this is the reference quantized
/// forward; with an all-healthy map it is bit-identical to it.
QuantForward quantized_forward(const QuantizedModel& q, const RowMatrixF& x, const Injection* inj = nullptr);

std::vector<int> argmax_rows(const RowMatrixI64& logits);
std::vector<int> forward_faulty(const QuantizedModel& q, const RowMatrixF& x, const FaultMap& map,
                                const ArrayErrorModel& err, ExecMode mode = ExecMode::Systolic);

/// Test-set accuracy of the quantized model, optionally with injection.
/// Chunks run in parallel; the result does not depend on the thread count.
double quantized_accuracy(const QuantizedModel& q, const Dataset& data, const Injection* inj = nullptr, int threads = 0);

/// Worst-case error offsets of each Linear/Conv layer in accumulator units.
std::vector<std::vector<std::int64_t>> layer_offsets(const QuantizedModel& q, const FaultMap& map, ExecMode mode,
                                                     const ErrorModel& model);

/// Weight-load steps of one inference: sum over layers of the array tiles.
long inference_steps(const QuantizedModel& q, int rows, int cols);

}  // namespace faultbin
