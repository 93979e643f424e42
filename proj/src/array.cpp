#include "faultbin/array.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "faultbin/rng.hpp"

namespace faultbin {

namespace {

void check_rate(double fr, const char* what) {
  if (!(fr >= 0.0 && fr <= 100.0)) throw ArrayError(std::string(what) + " must be within [0, 100]");
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

PeStatus status_from_code(char c) {
  switch (c) {
    case 'H': return PeStatus::Healthy;
    case 'N': return PeStatus::NonCriticalFaulty;
    case 'C': return PeStatus::CriticalFaulty;
    case 'D': return PeStatus::Deactivated;
    default: throw ArrayError(std::string("unknown PE status code '") + c + "'");
  }
}

// SIMD routing: where each PE's MACs actually run.
struct SimdRouting {
  int rows = 0;
  std::vector<std::pair<int, int>> target;  // per (r, c), row-major

  SimdRouting(const FaultMap& map, const BypassPlan& plan) : rows(map.rows()) {
    const int R = map.rows();
    const int C = map.cols();
    target.resize(static_cast<std::size_t>(R) * C);
    for (int c = 0; c < C; ++c) {
      const auto& own = plan.live_rows[c];
      const int e = plan.exec_column[c];
      const auto& borrowed = plan.live_rows[e];
      int dead_seen = 0;
      for (int r = 0; r < R; ++r) {
        auto& t = target[static_cast<std::size_t>(r) * C + c];
        if (map.live(r, c)) {
          t = {r, c};
        } else if (!own.empty()) {
          t = {own[dead_seen++ % own.size()], c};
        } else {
          t = {borrowed[r % borrowed.size()], e};
        }
      }
    }
  }
};

void check_shapes(const IntMatrix& w, const IntMatrix& x) {
  if (w.rows != x.cols) {
    throw ArrayError("shape mismatch: activations are " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                     ", weights " + std::to_string(w.rows) + "x" + std::to_string(w.cols));
  }
}

}  // namespace

char status_code(PeStatus s) {
  switch (s) {
    case PeStatus::Healthy: return 'H';
    case PeStatus::NonCriticalFaulty: return 'N';
    case PeStatus::CriticalFaulty: return 'C';
    case PeStatus::Deactivated: return 'D';
  }
  return '?';
}

FaultMap::FaultMap(int rows, int cols, std::uint64_t seed) : rows_(rows), cols_(cols), seed_(seed) {
  if (rows <= 0 || cols <= 0) throw ArrayError("array dimensions must be positive");
  status_.assign(static_cast<std::size_t>(rows) * cols, PeStatus::Healthy);
}

std::size_t FaultMap::index(int r, int c) const {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
    throw ArrayError("PE (" + std::to_string(r) + ", " + std::to_string(c) + ") outside the array");
  }
  return static_cast<std::size_t>(r) * cols_ + c;
}

bool FaultMap::live(int r, int c) const {
  const auto s = at(r, c);
  return s == PeStatus::Healthy || s == PeStatus::NonCriticalFaulty;
}

long FaultMap::count(PeStatus s) const { return static_cast<long>(std::count(status_.begin(), status_.end(), s)); }

int FaultMap::column_count(int c, PeStatus s) const {
  int n = 0;
  for (int r = 0; r < rows_; ++r) n += at(r, c) == s;
  return n;
}

double FaultMap::column_fault_rate(int c) const {
  return 100.0 * column_count(c, PeStatus::NonCriticalFaulty) / rows_;
}

double FaultMap::max_column_fault_rate() const {
  double m = 0.0;
  for (int c = 0; c < cols_; ++c) m = std::max(m, column_fault_rate(c));
  return m;
}

int FaultMap::polarity(int r, int c) const {
  return (mix64(seed_ ^ mix64(index(r, c) + 0x5157ULL)) & 1U) ? 1 : -1;
}

std::uint64_t FaultMap::pe_draw(int r, int c, std::uint64_t n) const {
  if (n == 0) throw ArrayError("pe_draw over an empty range");
  return mix64(seed_ ^ mix64(index(r, c) + 0xfa17ULL)) % n;
}

std::vector<long> FaultMap::fail_ids(PeStatus s) const {
  std::vector<long> out;
  for (std::size_t i = 0; i < status_.size(); ++i) {
    if (status_[i] == s) out.push_back(static_cast<long>(i));
  }
  return out;
}

int faulty_per_column(int rows, double fr_percent) {
  check_rate(fr_percent, "fault rate");
  return static_cast<int>(std::floor(0.01 * fr_percent * rows + 0.5 + 1e-9));
}

int deactivation_quota(int rows, double fr_max_percent) {
  if (!(fr_max_percent >= 0.0)) throw ArrayError("fr_max must be non-negative");
  return std::min(rows, static_cast<int>(std::floor(0.01 * fr_max_percent * rows + 1e-9)));
}

FaultMap build_fault_map(int rows, int cols, double fr_percent, std::uint64_t seed, double crit_percent) {
  FaultMap map(rows, cols, seed);
  const int n_faulty = faulty_per_column(rows, fr_percent);
  const int n_crit = faulty_per_column(rows, crit_percent);
  if (n_faulty + n_crit > rows) throw ArrayError("fault rates exceed the column height");
  std::mt19937_64 rng(mix64(seed));
  std::vector<int> order(rows);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) order[r] = r;
    partial_shuffle(order, rng, static_cast<std::size_t>(n_faulty + n_crit));
    for (int i = 0; i < n_faulty; ++i) map.set(order[i], c, PeStatus::NonCriticalFaulty);
    for (int i = n_faulty; i < n_faulty + n_crit; ++i) map.set(order[i], c, PeStatus::CriticalFaulty);
  }
  return map;
}

FaultMap deactivate_to_threshold(const FaultMap& map, double fr_max_percent) {
  const int quota = deactivation_quota(map.rows(), fr_max_percent);
  FaultMap out = map;
  std::mt19937_64 rng(mix64(map.seed() ^ 0xdeac7ULL));
  std::vector<int> faulty;
  for (int c = 0; c < map.cols(); ++c) {
    faulty.clear();
    for (int r = 0; r < map.rows(); ++r) {
      if (map.at(r, c) == PeStatus::CriticalFaulty) out.set(r, c, PeStatus::Deactivated);
      if (map.at(r, c) == PeStatus::NonCriticalFaulty) faulty.push_back(r);
    }
    if (static_cast<int>(faulty.size()) <= quota) continue;
    partial_shuffle(faulty, rng, static_cast<std::size_t>(quota));
    for (std::size_t i = quota; i < faulty.size(); ++i) out.set(faulty[i], c, PeStatus::Deactivated);
  }
  return out;
}

std::string encode_status_rle(const FaultMap& map) {
  std::string out;
  char cur = 0;
  long run = 0;
  auto flush = [&] {
    if (run > 0) out += std::to_string(run) + cur;
  };
  for (int r = 0; r < map.rows(); ++r) {
    for (int c = 0; c < map.cols(); ++c) {
      const char s = status_code(map.at(r, c));
      if (s != cur) {
        flush();
        cur = s;
        run = 0;
      }
      ++run;
    }
  }
  flush();
  return out;
}

nlohmann::json fsr_to_json(const FsrFile& fsr) {
  const auto& m = fsr.map;
  return {
      {"format", "faultbin-fsr"},
      {"version", 1},
      {"chip_id", fsr.chip_id},
      {"rows", m.rows()},
      {"cols", m.cols()},
      {"seed", m.seed()},
      {"fr_max_non_crit", fsr.fr_max_non_crit},
      {"status", encode_status_rle(m)},
      {"fail_id_crit", m.fail_ids(PeStatus::CriticalFaulty)},
      {"fail_id_noncrit", m.fail_ids(PeStatus::NonCriticalFaulty)},
      {"deactivated", m.fail_ids(PeStatus::Deactivated)},
  };
}

FsrFile fsr_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw ArrayError("FSR document is not an object");
    FsrFile fsr;
    const int rows = doc.at("rows").get<int>();
    const int cols = doc.at("cols").get<int>();
    fsr.map = FaultMap(rows, cols, doc.at("seed").get<std::uint64_t>());
    fsr.chip_id = doc.value("chip_id", std::string{});
    fsr.fr_max_non_crit = doc.at("fr_max_non_crit").get<double>();
    if (!(fsr.fr_max_non_crit >= 0.0 && fsr.fr_max_non_crit <= 100.0)) throw ArrayError("fr_max_non_crit out of range");

    const auto rle = doc.at("status").get<std::string>();
    const long total = static_cast<long>(rows) * cols;
    long pos = 0;
    std::size_t i = 0;
    while (i < rle.size()) {
      std::size_t j = i;
      while (j < rle.size() && rle[j] >= '0' && rle[j] <= '9') ++j;
      if (j == i || j == rle.size() || j - i > 12) throw ArrayError("malformed status run at offset " + std::to_string(i));
      const long run = std::stol(rle.substr(i, j - i));
      const PeStatus s = status_from_code(rle[j]);
      if (run <= 0 || pos + run > total) throw ArrayError("status runs exceed the array size");
      for (long k = 0; k < run; ++k, ++pos) fsr.map.set(static_cast<int>(pos / cols), static_cast<int>(pos % cols), s);
      i = j + 1;
    }
    if (pos != total) throw ArrayError("status runs cover " + std::to_string(pos) + " of " + std::to_string(total) + " PEs");

    for (const auto& [key, s] : {std::pair{"fail_id_crit", PeStatus::CriticalFaulty},
                                 std::pair{"fail_id_noncrit", PeStatus::NonCriticalFaulty},
                                 std::pair{"deactivated", PeStatus::Deactivated}}) {
      if (doc.contains(key) && doc.at(key).get<std::vector<long>>() != fsr.map.fail_ids(s)) {
        throw ArrayError(std::string(key) + " disagrees with the status grid");
      }
    }
    return fsr;
  } catch (const nlohmann::json::exception& e) {
    throw ArrayError(std::string("corrupt FSR: ") + e.what());
  }
}

ThroughputReport throughput(const FaultMap& map, long workload_steps) {
  ThroughputReport r;
  r.n_total_pe = static_cast<long>(map.rows()) * map.cols();
  for (int c = 0; c < map.cols(); ++c) {
    bool dead = false;
    for (int rr = 0; rr < map.rows(); ++rr) {
      if (map.live(rr, c)) {
        ++r.n_remaining_pe;
      } else {
        dead = true;
      }
    }
    r.n_sys_arr_faulty_cols += dead;
  }
  r.simd_factor = static_cast<double>(r.n_remaining_pe) / static_cast<double>(r.n_total_pe);
  r.n_dim_sys_arr = map.rows();
  r.n_steps = workload_steps;
  r.systolic_extra_macs = r.n_dim_sys_arr * r.n_sys_arr_faulty_cols * r.n_steps;
  return r;
}

nlohmann::json throughput_to_json(const ThroughputReport& r) {
  return {{"n_total_pe", r.n_total_pe},       {"n_remaining_pe", r.n_remaining_pe},
          {"simd_factor", r.simd_factor},     {"n_dim_sys_arr", r.n_dim_sys_arr},
          {"n_sys_arr_faulty_cols", r.n_sys_arr_faulty_cols}, {"n_steps", r.n_steps},
          {"systolic_extra_macs", r.systolic_extra_macs}};
}

AccMatrix matmul(const IntMatrix& x, const IntMatrix& w) {
  check_shapes(w, x);
  AccMatrix y(x.rows, w.cols);
  for (int m = 0; m < x.rows; ++m) {
    for (int k = 0; k < x.cols; ++k) {
      const std::int64_t xv = x(m, k);
      if (xv == 0) continue;
      for (int j = 0; j < w.cols; ++j) y(m, j) += xv * w(k, j);
    }
  }
  return y;
}

std::vector<std::vector<int>> BypassPlan::column_passes(int logical_col, int slice) const {
  const auto& live = live_rows[exec_column[logical_col]];
  const int n = static_cast<int>(live.size());
  std::vector<std::vector<int>> passes(ceil_div(slice, n), std::vector<int>(rows, -1));
  for (int i = 0; i < slice; ++i) passes[i / n][live[i % n]] = i;
  return passes;
}

BypassPlan plan_bypass(int k_dim, int n_dim, const FaultMap& map) {
  if (k_dim <= 0 || n_dim <= 0) throw ArrayError("matrix dimensions must be positive");
  BypassPlan p;
  p.rows = map.rows();
  p.cols = map.cols();
  p.k_dim = k_dim;
  p.n_dim = n_dim;
  p.k_tiles = ceil_div(k_dim, p.rows);
  p.n_tiles = ceil_div(n_dim, p.cols);
  p.live_rows.resize(p.cols);
  for (int c = 0; c < p.cols; ++c) {
    for (int r = 0; r < p.rows; ++r) {
      if (map.live(r, c)) p.live_rows[c].push_back(r);
    }
  }
  p.exec_column.resize(p.cols);
  for (int c = 0; c < p.cols; ++c) {
    int e = c;
    for (int step = 0; step < p.cols && p.live_rows[e].empty(); ++step) e = (e + 1) % p.cols;
    if (p.live_rows[e].empty()) throw ArrayError("no live PE left in the array");
    p.exec_column[c] = e;
  }

  std::vector<int> load(p.cols);
  for (int tk = 0; tk < p.k_tiles; ++tk) {
    const int slice = std::min(p.rows, k_dim - tk * p.rows);
    for (int tn = 0; tn < p.n_tiles; ++tn) {
      std::fill(load.begin(), load.end(), 0);
      for (int c = 0; c < p.cols && tn * p.cols + c < n_dim; ++c) {
        const int e = p.exec_column[c];
        load[e] += ceil_div(slice, static_cast<int>(p.live_rows[e].size()));
      }
      const int passes = std::max(1, *std::max_element(load.begin(), load.end()));
      p.tile_passes.push_back(passes);
      p.base_steps += 1;
      p.extra_steps += passes - 1;
    }
  }
  return p;
}

std::int64_t ArrayErrorModel::error(const FaultMap& map, int r, int c, std::int64_t w, std::int64_t x,
                                    std::int64_t acc) const {
  if (!map.faulty_active(r, c)) return 0;
  if (model.format != ErrorFormat::Int8Mac) throw ArrayError("the array model executes int8 MACs only");
  if (model.mode == ErrorMode::WorstCaseSigned) return map.polarity(r, c) * worst_case_magnitude(model.k);
  if (fault_tables == nullptr || fault_tables->empty()) throw ArrayError("per-fault mode needs candidate faults");
  const auto& t = (*fault_tables)[map.pe_draw(r, c, fault_tables->size())];
  return t.error(w, x, acc);
}

AccMatrix systolic_exec(const IntMatrix& weights, const IntMatrix& activations, const FaultMap& map,
                        const BypassPlan& plan, const std::optional<ArrayErrorModel>& err) {
  check_shapes(weights, activations);
  if (plan.k_dim != weights.rows || plan.n_dim != weights.cols || plan.rows != map.rows() || plan.cols != map.cols()) {
    throw ArrayError("bypass plan does not match the weights or the array");
  }
  const int M = activations.rows;
  AccMatrix y(M, weights.cols);
  for (int tk = 0; tk < plan.k_tiles; ++tk) {
    const int k0 = tk * plan.rows;
    const int slice = std::min(plan.rows, plan.k_dim - k0);
    for (int tn = 0; tn < plan.n_tiles; ++tn) {
      for (int c = 0; c < plan.cols; ++c) {
        const int j = tn * plan.cols + c;
        if (j >= plan.n_dim) break;
        const int e = plan.exec_column[c];
        for (const auto& pass : plan.column_passes(c, slice)) {
          for (int m = 0; m < M; ++m) {
            std::int64_t acc = 0;
            for (int r = 0; r < plan.rows; ++r) {
              if (pass[r] < 0) continue;  // dead PE bypassed, or a zero weight
              const int k = k0 + pass[r];
              const std::int64_t w = weights(k, j);
              const std::int64_t x = activations(m, k);
              const std::int64_t e_val = err ? err->error(map, r, e, w, x, acc) : 0;
              acc += w * x + e_val;
            }
            y(m, j) += acc;
          }
        }
      }
    }
  }
  return y;
}

AccMatrix simd_exec(const IntMatrix& weights, const IntMatrix& activations, const FaultMap& map,
                    const std::optional<ArrayErrorModel>& err) {
  check_shapes(weights, activations);
  const auto plan = plan_bypass(weights.rows, weights.cols, map);
  const SimdRouting routing(map, plan);
  const int R = map.rows();
  const int C = map.cols();
  AccMatrix y(activations.rows, weights.cols);
  std::vector<std::int64_t> partial(R);
  for (int j = 0; j < weights.cols; ++j) {
    const int c = j % C;
    for (int m = 0; m < activations.rows; ++m) {
      std::fill(partial.begin(), partial.end(), 0);
      for (int k = 0; k < weights.rows; ++k) {
        const auto [pr, pc] = routing.target[static_cast<std::size_t>(k % R) * C + c];
        const std::int64_t w = weights(k, j);
        const std::int64_t x = activations(m, k);
        const std::int64_t e_val = err ? err->error(map, pr, pc, w, x, partial[pr]) : 0;
        partial[pr] += w * x + e_val;
      }
      std::int64_t sum = 0;
      for (auto v : partial) sum += v;
      y(m, j) = sum;
    }
  }
  return y;
}

std::string_view to_string(ExecMode m) { return m == ExecMode::Systolic ? "systolic" : "simd"; }

ExecMode exec_mode_from_string(std::string_view s) {
  if (s == "systolic") return ExecMode::Systolic;
  if (s == "simd") return ExecMode::Simd;
  throw ArrayError("unknown execution mode '" + std::string(s) + "' (expected systolic or simd)");
}

std::pair<int, int> assigned_pe(const FaultMap& map, const BypassPlan& plan, ExecMode mode, int k, int j) {
  const int i = k % plan.rows;
  const int c = j % plan.cols;
  if (mode == ExecMode::Systolic) {
    const int e = plan.exec_column[c];
    const auto& live = plan.live_rows[e];
    return {live[i % live.size()], e};
  }
  return SimdRouting(map, plan).target[static_cast<std::size_t>(i) * plan.cols + c];
}

std::vector<std::int64_t> worst_case_offsets(const FaultMap& map, int k_dim, int n_dim, ExecMode mode,
                                             const ErrorModel& model) {
  if (model.format != ErrorFormat::Int8Mac || model.mode != ErrorMode::WorstCaseSigned) {
    throw ArrayError("offsets exist only for the int8 worst-case model");
  }
  const auto plan = plan_bypass(k_dim, n_dim, map);
  const int R = map.rows();
  const int C = map.cols();
  const std::int64_t mag = worst_case_magnitude(model.k);
  std::optional<SimdRouting> routing;
  if (mode == ExecMode::Simd) routing.emplace(map, plan);

  // Number of reduction indices landing on tile row i.
  std::vector<std::int64_t> uses(R, 0);
  for (int i = 0; i < R && i < k_dim; ++i) uses[i] = (k_dim - 1 - i) / R + 1;

  std::vector<std::int64_t> per_col(C, 0);
  for (int c = 0; c < C; ++c) {
    std::int64_t total = 0;
    for (int i = 0; i < R; ++i) {
      if (uses[i] == 0) continue;
      std::pair<int, int> pe;
      if (routing) {
        pe = routing->target[static_cast<std::size_t>(i) * C + c];
      } else {
        const auto& live = plan.live_rows[plan.exec_column[c]];
        pe = {live[i % live.size()], plan.exec_column[c]};
      }
      if (map.faulty_active(pe.first, pe.second)) total += uses[i] * map.polarity(pe.first, pe.second) * mag;
    }
    per_col[c] = total;
  }
  std::vector<std::int64_t> out(n_dim);
  for (int j = 0; j < n_dim; ++j) out[j] = per_col[j % C];
  return out;
}

}  // namespace faultbin
