#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faultbin/quant.hpp"

namespace faultbin {

struct SweepConfig {
  std::vector<double> fault_rates{0.0, 2.5, 5.0, 7.5, 10.0};
  int trials = 10;
  ErrorModel err{ErrorFormat::Int8Mac, 1, ErrorMode::WorstCaseSigned};
  /// Netlist faults drawn per PE in per-fault mode.
  const std::vector<FaultErrorTable>* fault_tables = nullptr;
  int rows = 128;
  int cols = 128;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Systolic;
  /// Deactivate down to this rate before inference; negative keeps every
  /// faulty PE active.
  double fr_max = -1.0;
  int threads = 0;
};

struct SweepRow {
  double rate = 0.0;
  int trial = 0;
  std::uint64_t map_seed = 0;
  double accuracy = 0.0;
  double normalized = 0.0;
};

struct SweepPoint {
  double rate = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double normalized_mean = 0.0;
  /// 100 * (1 - normalized_mean): percentage points of normalized accuracy lost.
  double normalized_drop_pct = 0.0;
};

struct SweepResult {
  double baseline_accuracy = 0.0;  // fault-free quantized model
  std::vector<SweepRow> rows;
  std::vector<SweepPoint> points;
};

/// Seed of the fault map for one (rate index, trial) cell.
std::uint64_t sweep_map_seed(std::uint64_t seed, std::size_t rate_index, int trial);

SweepResult accuracy_sweep(const QuantizedModel& q, const Dataset& test, const SweepConfig& cfg);
std::string sweep_to_csv(const SweepResult& r);
nlohmann::json sweep_to_json(const SweepResult& r, const SweepConfig& cfg);

struct FaultAwareConfig {
  double initial_fr = 7.5;        // FR_non-crit of the chip, percent
  double acc_threshold = 0.97;    // Acc_Inf_threshold, fraction
  double delta_step = 2.5;        // percent
  ErrorModel err{ErrorFormat::Int8Mac, 1, ErrorMode::WorstCaseSigned};
  ExecMode mode = ExecMode::Systolic;
  TrainOptions train;             // per iteration
  int calibration_samples = 1000;
  int threads = 0;
};

struct TrainOutcome {
  double acc_train = 0.0;
  double fr_max_non_crit = 0.0;
  bool threshold_met = false;
  int iterations = 0;
  std::vector<std::pair<double, double>> history;  // (FR_max tried, Acc_Train)
  FloatModel model;
  QuantizedModel qmodel;
};

/// Offsets of the chip's active faulty PEs expressed in each layer's float
/// output units, for the straight-through training forward.
OutputOffsets<float> float_offsets(const FloatModel& model, const RowMatrixF& calibration, const FaultMap& map,
                                   ExecMode mode, const ErrorModel& err);

/// The chip's map is deactivated down to FR_max; the model is trained with
/// the remaining faults' effect in its forward pass, then Acc_Train is the
/// faulty int8 accuracy on `validation`. While it misses the threshold FR_max
/// drops by delta_step, ending at 0 with threshold_met = false if needed.
TrainOutcome fault_aware_train(const FloatModel& start, const Dataset& train, const Dataset& validation,
                               const FaultMap& map, const FaultAwareConfig& cfg);

struct FsrInference {
  std::vector<int> predictions;
  ThroughputReport throughput;
  FaultMap applied;
};

FsrInference infer_with_fsr(const QuantizedModel& q, const FsrFile& fsr, const RowMatrixF& inputs,
                            const ArrayErrorModel& err, ExecMode mode = ExecMode::Systolic);

}  // namespace faultbin
