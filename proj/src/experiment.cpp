#include "faultbin/experiment.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "faultbin/parallel.hpp"
#include "faultbin/rng.hpp"

namespace faultbin {

namespace {

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::uint64_t sweep_map_seed(std::uint64_t seed, std::size_t rate_index, int trial) {
  return derive_seed(seed, rate_index, static_cast<std::uint64_t>(trial));
}

SweepResult accuracy_sweep(const QuantizedModel& q, const Dataset& test, const SweepConfig& cfg) {
  if (cfg.trials < 1) throw LearnError("trials must be at least 1");
  for (double r : cfg.fault_rates) {
    if (!(r >= 0.0 && r <= 100.0)) throw LearnError("fault rates must be within [0, 100]");
  }
  SweepResult res;
  res.baseline_accuracy = quantized_accuracy(q, test, nullptr, cfg.threads);
  const std::size_t cells = cfg.fault_rates.size() * static_cast<std::size_t>(cfg.trials);
  res.rows.resize(cells);
  parallel_chunks(cells, cfg.threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t ri = i / cfg.trials;
      const int trial = static_cast<int>(i % cfg.trials);
      auto& row = res.rows[i];
      row.rate = cfg.fault_rates[ri];
      row.trial = trial;
      row.map_seed = sweep_map_seed(cfg.seed, ri, trial);
      FaultMap map = build_fault_map(cfg.rows, cfg.cols, row.rate, row.map_seed);
      if (cfg.fr_max >= 0.0) map = deactivate_to_threshold(map, cfg.fr_max);
      const Injection inj{&map, {cfg.err, cfg.fault_tables}, cfg.mode, cfg.err.mode == ErrorMode::PerFaultNetlist};
      row.accuracy = quantized_accuracy(q, test, &inj, 1);
      row.normalized = res.baseline_accuracy > 0 ? row.accuracy / res.baseline_accuracy : 0.0;
    }
  });
  for (std::size_t ri = 0; ri < cfg.fault_rates.size(); ++ri) {
    SweepPoint pt;
    pt.rate = cfg.fault_rates[ri];
    double sum = 0.0;
    double nsum = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      sum += res.rows[ri * cfg.trials + t].accuracy;
      nsum += res.rows[ri * cfg.trials + t].normalized;
    }
    pt.mean = sum / cfg.trials;
    pt.normalized_mean = nsum / cfg.trials;
    double var = 0.0;
    for (int t = 0; t < cfg.trials; ++t) var += std::pow(res.rows[ri * cfg.trials + t].accuracy - pt.mean, 2);
    pt.stddev = cfg.trials > 1 ? std::sqrt(var / (cfg.trials - 1)) : 0.0;
    pt.normalized_drop_pct = 100.0 * (1.0 - pt.normalized_mean);
    res.points.push_back(pt);
  }
  return res;
}

std::string sweep_to_csv(const SweepResult& r) {
  std::string out = "rate,trial,map_seed,accuracy,normalized_accuracy\n";
  for (const auto& row : r.rows) {
    out += fmt(row.rate, 3) + "," + std::to_string(row.trial) + "," + std::to_string(row.map_seed) + "," +
           fmt(row.accuracy) + "," + fmt(row.normalized) + "\n";
  }
  return out;
}

nlohmann::json sweep_to_json(const SweepResult& r, const SweepConfig& cfg) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"rate", p.rate},
                      {"mean_accuracy", p.mean},
                      {"std_accuracy", p.stddev},
                      {"normalized_accuracy", p.normalized_mean},
                      {"normalized_drop_pct", p.normalized_drop_pct}});
  }
  return {{"baseline_accuracy", r.baseline_accuracy},
          {"trials", cfg.trials},
          {"k", cfg.err.k},
          {"format", to_string(cfg.err.format)},
          {"error_mode", to_string(cfg.err.mode)},
          {"exec_mode", to_string(cfg.mode)},
          {"array", {cfg.rows, cfg.cols}},
          {"fr_max", cfg.fr_max},
          {"seed", cfg.seed},
          {"points", points}};
}

OutputOffsets<float> float_offsets(const FloatModel& model, const RowMatrixF& calibration, const FaultMap& map,
                                   ExecMode mode, const ErrorModel& err) {
  const auto q = quantize(model, calibration);
  const auto ints = layer_offsets(q, map, mode, err);
  OutputOffsets<float> out;
  for (std::size_t p = 0; p < ints.size(); ++p) {
    const double unit = q.layers[p].in_scale * q.layers[p].w_scale;
    RowVector<float> v(static_cast<Eigen::Index>(ints[p].size()));
    for (std::size_t j = 0; j < ints[p].size(); ++j) v(static_cast<Eigen::Index>(j)) = static_cast<float>(ints[p][j] * unit);
    out.push_back(std::move(v));
  }
  return out;
}

TrainOutcome fault_aware_train(const FloatModel& start, const Dataset& train_set, const Dataset& validation,
                               const FaultMap& map, const FaultAwareConfig& cfg) {
  if (!(cfg.initial_fr >= 0.0 && cfg.initial_fr <= 100.0)) throw LearnError("initial fault rate must be within [0, 100]");
  if (!(cfg.delta_step > 0.0)) throw LearnError("delta_step must be positive");
  if (cfg.err.mode != ErrorMode::WorstCaseSigned) {
    throw LearnError("fault-aware training models the worst-case error only");
  }
  const int n_calib = std::min(cfg.calibration_samples, train_set.size());
  const RowMatrixF calib = train_set.images.topRows(n_calib);

  TrainOutcome out;
  out.model = start;
  double fr = cfg.initial_fr;
  for (;;) {
    ++out.iterations;
    const FaultMap active = deactivate_to_threshold(map, fr);
    TrainOptions opts = cfg.train;
    opts.offsets = [&](const FloatModel& m) { return float_offsets(m, calib, active, cfg.mode, cfg.err); };
    train(out.model, train_set, opts);
    out.qmodel = quantize(out.model, calib);
    const Injection inj{&active, {cfg.err}, cfg.mode, false};
    out.acc_train = quantized_accuracy(out.qmodel, validation, &inj, cfg.threads);
    out.fr_max_non_crit = fr;
    out.history.emplace_back(fr, out.acc_train);
    if (out.acc_train >= cfg.acc_threshold) {
      out.threshold_met = true;
      break;
    }
    if (fr <= 0.0) break;
    fr = std::max(0.0, fr - cfg.delta_step);
  }
  return out;
}

FsrInference infer_with_fsr(const QuantizedModel& q, const FsrFile& fsr, const RowMatrixF& inputs,
                            const ArrayErrorModel& err, ExecMode mode) {
  FsrInference out;
  out.applied = deactivate_to_threshold(fsr.map, fsr.fr_max_non_crit);
  out.predictions = forward_faulty(q, inputs, out.applied, err, mode);
  out.throughput = throughput(out.applied, inference_steps(q, fsr.map.rows(), fsr.map.cols()));
  return out;
}

}  // namespace faultbin
