#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "faultbin/macsim.hpp"

namespace faultbin {

class ArrayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PeStatus : std::uint8_t { Healthy, NonCriticalFaulty, CriticalFaulty, Deactivated };

char status_code(PeStatus s);  // H, N, C, D

/// Per-PE status grid of the accelerator.
class FaultMap {
 public:
  FaultMap() = default;
  FaultMap(int rows, int cols, std::uint64_t seed = 0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::uint64_t seed() const { return seed_; }

  PeStatus at(int r, int c) const { return status_[index(r, c)]; }
  void set(int r, int c, PeStatus s) { status_[index(r, c)] = s; }

  /// Scheduled for work: healthy or non-critically faulty. Critical PEs are
  /// never scheduled, deactivated or not.
  bool live(int r, int c) const;
  bool faulty_active(int r, int c) const { return at(r, c) == PeStatus::NonCriticalFaulty; }

  long count(PeStatus s) const;
  int column_count(int c, PeStatus s) const;
  /// Active non-critical faulty PEs in a column, as a percentage of rows.
  double column_fault_rate(int c) const;
  double max_column_fault_rate() const;

  /// Fixed error sign (+1/-1) of a PE, drawn once from the map seed.
  int polarity(int r, int c) const;
  /// Stable per-PE draw in [0, n), for picking a fault model per PE.
  std::uint64_t pe_draw(int r, int c, std::uint64_t n) const;

  /// PE ids (r * cols + c) with the given status, row-major.
  std::vector<long> fail_ids(PeStatus s) const;

  friend bool operator==(const FaultMap&, const FaultMap&) = default;

 private:
  std::size_t index(int r, int c) const;

  int rows_ = 0;
  int cols_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<PeStatus> status_;
};

/// Number of faulty PEs per column for a fault rate in percent: round half up.
int faulty_per_column(int rows, double fr_percent);
/// Largest per-column count whose rate stays at or below fr_max percent.
int deactivation_quota(int rows, double fr_max_percent);

/// Every column gets faulty_per_column(rows, fr) non-critical faults at
/// uniformly drawn rows; optionally crit_percent critical faults among the
/// remaining rows.
FaultMap build_fault_map(int rows, int cols, double fr_percent, std::uint64_t seed, double crit_percent = 0.0);

/// Deactivates every critical PE and, per column, randomly chosen
/// non-critical faulty PEs beyond the quota for fr_max.
FaultMap deactivate_to_threshold(const FaultMap& map, double fr_max_percent);

/// Failure-status-register file: the map plus chip metadata.
struct FsrFile {
  FaultMap map;
  std::string chip_id;
  double fr_max_non_crit = 0.0;

  friend bool operator==(const FsrFile&, const FsrFile&) = default;
};

nlohmann::json fsr_to_json(const FsrFile& fsr);
FsrFile fsr_from_json(const nlohmann::json& doc);
std::string encode_status_rle(const FaultMap& map);

struct ThroughputReport {
  long n_total_pe = 0;
  long n_remaining_pe = 0;
  double simd_factor = 1.0;
  long n_dim_sys_arr = 0;
  long n_sys_arr_faulty_cols = 0;
  long n_steps = 0;
  long systolic_extra_macs = 0;
};

ThroughputReport throughput(const FaultMap& map, long workload_steps);
nlohmann::json throughput_to_json(const ThroughputReport& r);

template <class T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T{}) {}
  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using IntMatrix = Matrix<std::int32_t>;
using AccMatrix = Matrix<std::int64_t>;

/// Dense reference: x (m x k) times w (k x n).
AccMatrix matmul(const IntMatrix& x, const IntMatrix& w);

/// Weight-stationary mapping with software bypass. Reduction index k maps to
/// row (k mod rows) of its tile and output j to column (j mod cols). In a
/// column with deactivated PEs the tile's weights shift down past each dead
/// PE (which holds a zero), spilling into extra passes.
struct BypassPlan {
  int rows = 0;
  int cols = 0;
  int k_dim = 0;
  int n_dim = 0;
  int k_tiles = 0;
  int n_tiles = 0;
  /// Live rows of each physical column, top to bottom.
  std::vector<std::vector<int>> live_rows;
  /// Physical column that executes the work of each logical column (itself
  /// unless it has no live PE).
  std::vector<int> exec_column;
  /// Per tile: lock-step passes needed (max over physical columns).
  std::vector<int> tile_passes;
  int base_steps = 0;
  int extra_steps = 0;

  /// For one logical column and a tile slice of `slice` reductions: per pass,
  /// per row of the executing column, the slice index held there or -1 (a
  /// zero weight and a skipped activation).
  std::vector<std::vector<int>> column_passes(int logical_col, int slice) const;
};

BypassPlan plan_bypass(int k_dim, int n_dim, const FaultMap& map);
inline BypassPlan plan_bypass(const IntMatrix& weights, const FaultMap& map) {
  return plan_bypass(weights.rows, weights.cols, map);
}

/// Error injected by active non-critical faulty PEs. Each PE keeps its sign
/// (worst-case mode) or its drawn netlist fault (per-fault mode).
struct ArrayErrorModel {
  ErrorModel model;
  /// Candidate faults for per-fault mode; each faulty PE draws one.
  const std::vector<FaultErrorTable>* fault_tables = nullptr;

  std::int64_t error(const FaultMap& map, int r, int c, std::int64_t w, std::int64_t x, std::int64_t acc) const;
};

/// Weight-stationary systolic execution following the plan pass by pass; the
/// partial sum of each column flows through the rows. Faulty active PEs add
/// their error on every real MAC they perform.
AccMatrix systolic_exec(const IntMatrix& weights, const IntMatrix& activations, const FaultMap& map,
                        const BypassPlan& plan, const std::optional<ArrayErrorModel>& err);

/// Independent PEs: each MAC (k, j) runs on PE (k mod rows, j mod cols);
/// a dead PE's MACs move to a buddy live PE in the same column (or the next
/// column with a live PE).
AccMatrix simd_exec(const IntMatrix& weights, const IntMatrix& activations, const FaultMap& map,
                    const std::optional<ArrayErrorModel>& err);

enum class ExecMode : std::uint8_t { Systolic, Simd };
std::string_view to_string(ExecMode m);
ExecMode exec_mode_from_string(std::string_view s);

/// PE (row, col) performing reduction index k of output column j.
std::pair<int, int> assigned_pe(const FaultMap& map, const BypassPlan& plan, ExecMode mode, int k, int j);

/// For data-independent (worst-case) errors, the total error each output
/// column receives; exec result = exact matmul + offset broadcast over rows.
std::vector<std::int64_t> worst_case_offsets(const FaultMap& map, int k_dim, int n_dim, ExecMode mode,
                                             const ErrorModel& model);

}  // namespace faultbin
