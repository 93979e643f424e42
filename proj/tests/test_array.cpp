#include <random>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "faultbin/array.hpp"
#include "faultbin/cones.hpp"

using namespace faultbin;

namespace {

IntMatrix random_matrix(int r, int c, std::mt19937_64& rng, int lo = -128, int hi = 127) {
  IntMatrix m(r, c);
  for (auto& v : m.data) v = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  return m;
}

AccMatrix oracle_matmul(const IntMatrix& x, const IntMatrix& w) {
  AccMatrix y(x.rows, w.cols);
  for (int m = 0; m < x.rows; ++m)
    for (int j = 0; j < w.cols; ++j) {
      std::int64_t s = 0;
      for (int k = 0; k < x.cols; ++k) s += static_cast<std::int64_t>(x(m, k)) * w(k, j);
      y(m, j) = s;
    }
  return y;
}

FaultMap random_dead_map(int rows, int cols, int dead, std::mt19937_64& rng) {
  FaultMap map(rows, cols, rng());
  for (int placed = 0; placed < dead;) {
    const int r = static_cast<int>(rng() % rows);
    const int c = static_cast<int>(rng() % cols);
    if (map.at(r, c) != PeStatus::Healthy) continue;
    map.set(r, c, (rng() & 1U) ? PeStatus::Deactivated : PeStatus::CriticalFaulty);
    ++placed;
  }
  return map;
}

const ArrayErrorModel kWorstK1{{ErrorFormat::Int8Mac, 1, ErrorMode::WorstCaseSigned}};

}  // namespace

TEST_CASE("fault map construction") {
  CHECK(build_fault_map(16, 8, 0, 1).count(PeStatus::Healthy) == 128);
  CHECK(build_fault_map(16, 8, 100, 1).count(PeStatus::NonCriticalFaulty) == 128);
  const auto m = build_fault_map(128, 128, 5, 3);
  for (int c = 0; c < 128; ++c) CHECK(m.column_count(c, PeStatus::NonCriticalFaulty) == 6);
  CHECK(faulty_per_column(128, 7.5) == 10);
  CHECK(faulty_per_column(128, 10) == 13);
  CHECK(faulty_per_column(8, 6.25) == 1);  // 0.5 rounds up
  CHECK(build_fault_map(32, 32, 5, 9) == build_fault_map(32, 32, 5, 9));
  CHECK_FALSE(build_fault_map(32, 32, 5, 9) == build_fault_map(32, 32, 5, 10));
  CHECK_THROWS_AS(build_fault_map(8, 8, 101, 1), ArrayError);
  CHECK_THROWS_AS(build_fault_map(8, 8, -1, 1), ArrayError);
  const auto crit = build_fault_map(64, 4, 10, 2, 5);
  for (int c = 0; c < 4; ++c) {
    CHECK(crit.column_count(c, PeStatus::NonCriticalFaulty) == 6);
    CHECK(crit.column_count(c, PeStatus::CriticalFaulty) == 3);
  }
}

TEST_CASE("deactivation quota, idempotence and limits") {
  const auto m10 = build_fault_map(128, 128, 10, 4);
  const auto d = deactivate_to_threshold(m10, 5);
  for (int c = 0; c < 128; ++c) {
    CHECK(d.column_fault_rate(c) <= 5.0);
    CHECK(d.column_count(c, PeStatus::NonCriticalFaulty) == 6);
    CHECK(d.column_count(c, PeStatus::Deactivated) == 7);
  }
  CHECK(deactivate_to_threshold(d, 5) == d);
  CHECK(deactivate_to_threshold(build_fault_map(128, 128, 5, 4), 5) == build_fault_map(128, 128, 5, 4));
  CHECK(deactivate_to_threshold(m10, 50) == m10);

  const auto crit = build_fault_map(64, 16, 5, 8, 5);
  const auto zero = deactivate_to_threshold(crit, 0);
  CHECK(zero.count(PeStatus::NonCriticalFaulty) == 0);
  CHECK(zero.count(PeStatus::CriticalFaulty) == 0);
  CHECK(zero.count(PeStatus::Deactivated) == crit.count(PeStatus::NonCriticalFaulty) + crit.count(PeStatus::CriticalFaulty));
  CHECK(throughput(zero, 1).simd_factor == doctest::Approx(static_cast<double>(crit.count(PeStatus::Healthy)) / (64 * 16)));

  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const int rows = 8 + static_cast<int>(rng() % 121);
    const double fr = static_cast<double>(rng() % 400) / 10.0;
    const double fr_max = static_cast<double>(rng() % 200) / 10.0;
    const auto m = deactivate_to_threshold(build_fault_map(rows, 8, fr, rng()), fr_max);
    CHECK(m.max_column_fault_rate() <= fr_max);
  }
}

TEST_CASE("fsr round trip and corruption") {
  FsrFile fsr{deactivate_to_threshold(build_fault_map(20, 12, 15, 6, 5), 10), "chip-7", 10.0};
  const auto doc = fsr_to_json(fsr);
  CHECK(fsr_from_json(nlohmann::json::parse(doc.dump())) == fsr);
  CHECK(encode_status_rle(FaultMap(4, 30)) == "120H");

  auto bad = doc;
  bad["status"] = "119H";
  CHECK_THROWS_AS(fsr_from_json(bad), ArrayError);
  bad["status"] = "240X";
  CHECK_THROWS_AS(fsr_from_json(bad), ArrayError);
  bad = doc;
  bad["fail_id_crit"] = std::vector<long>{0};
  CHECK_THROWS_AS(fsr_from_json(bad), ArrayError);
  bad = doc;
  bad.erase("rows");
  CHECK_THROWS_AS(fsr_from_json(bad), ArrayError);
}

TEST_CASE("throughput formulas") {
  const auto clean = throughput(FaultMap(128, 128), 5);
  CHECK(clean.simd_factor == 1.0);
  CHECK(clean.systolic_extra_macs == 0);

  FaultMap m(128, 128);
  for (int i = 0; i < 819; ++i) m.set(i % 128, i / 128, PeStatus::Deactivated);
  const auto r = throughput(m, 3);
  CHECK(r.n_total_pe == 16384);
  CHECK(r.n_remaining_pe == 16384 - 819);
  CHECK(r.simd_factor == doctest::Approx(0.95).epsilon(1e-3));
  CHECK(r.n_sys_arr_faulty_cols == 7);

  FaultMap four(128, 128);
  for (int c : {3, 40, 41, 127}) four.set(c % 128, c, PeStatus::Deactivated);
  const auto f = throughput(four, 3);
  CHECK(f.n_dim_sys_arr == 128);
  CHECK(f.n_sys_arr_faulty_cols == 4);
  CHECK(f.systolic_extra_macs == 1536);
}

TEST_CASE("bypass plan on a 4x4 tile with one dead PE") {
  FaultMap m(4, 4);
  m.set(1, 3, PeStatus::Deactivated);
  const auto plan = plan_bypass(4, 4, m);
  for (int c = 0; c < 3; ++c) CHECK(plan.column_passes(c, 4) == std::vector<std::vector<int>>{{0, 1, 2, 3}});
  CHECK(plan.column_passes(3, 4) == std::vector<std::vector<int>>{{0, -1, 1, 2}, {3, -1, -1, -1}});
  CHECK(plan.extra_steps == 1);

  const auto identity = plan_bypass(300, 70, FaultMap(32, 32));
  CHECK(identity.extra_steps == 0);
  CHECK(identity.base_steps == 10 * 3);
}

TEST_CASE("bypass soundness against the matmul oracle") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 60; ++t) {
    const int rows = 2 + static_cast<int>(rng() % 31);
    const int cols = 2 + static_cast<int>(rng() % 31);
    const int dead = 1 + static_cast<int>(rng() % 8);
    const auto map = random_dead_map(rows, cols, std::min(dead, rows * cols - 1), rng);
    const auto w = random_matrix(1 + static_cast<int>(rng() % 80), 1 + static_cast<int>(rng() % 40), rng);
    const auto x = random_matrix(1 + static_cast<int>(rng() % 5), w.rows, rng);
    const auto exact = oracle_matmul(x, w);
    CHECK(systolic_exec(w, x, map, plan_bypass(w, map), std::nullopt) == exact);
    CHECK(simd_exec(w, x, map, std::nullopt) == exact);
    // Deactivated-only maps have no active faults, so the error model is inert.
    CHECK(systolic_exec(w, x, map, plan_bypass(w, map), kWorstK1) == exact);
  }
  // A fully dead column borrows its neighbour.
  FaultMap m(4, 3);
  for (int r = 0; r < 4; ++r) m.set(r, 1, PeStatus::Deactivated);
  const auto w = random_matrix(9, 7, rng);
  const auto x = random_matrix(3, 9, rng);
  CHECK(systolic_exec(w, x, m, plan_bypass(w, m), std::nullopt) == oracle_matmul(x, w));
  CHECK(simd_exec(w, x, m, std::nullopt) == oracle_matmul(x, w));
  CHECK_THROWS_AS(systolic_exec(w, random_matrix(3, 8, rng), m, plan_bypass(w, m), std::nullopt), ArrayError);
}

TEST_CASE("a single faulty PE adds +-7 per pass through it") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    FaultMap m(8, 8, rng());
    const int fr = static_cast<int>(rng() % 8);
    const int fc = static_cast<int>(rng() % 8);
    m.set(fr, fc, PeStatus::NonCriticalFaulty);
    const auto w = random_matrix(21, 19, rng);
    const auto x = random_matrix(4, 21, rng);
    auto expect = oracle_matmul(x, w);
    int passes = 0;
    for (int k = 0; k < 21; ++k) passes += k % 8 == fr;
    for (int mi = 0; mi < 4; ++mi)
      for (int j = fc; j < 19; j += 8) expect(mi, j) += 7L * m.polarity(fr, fc) * passes;
    CHECK(systolic_exec(w, x, m, plan_bypass(w, m), kWorstK1) == expect);
    CHECK(simd_exec(w, x, m, kWorstK1) == expect);
  }
}

TEST_CASE("worst-case offsets equal the literal simulators") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 30; ++t) {
    const int rows = 4 + static_cast<int>(rng() % 13);
    const int cols = 4 + static_cast<int>(rng() % 13);
    auto map = deactivate_to_threshold(build_fault_map(rows, cols, 30, rng(), 10), 15);
    const auto w = random_matrix(1 + static_cast<int>(rng() % 50), 1 + static_cast<int>(rng() % 30), rng);
    const auto x = random_matrix(3, w.rows, rng);
    const auto exact = oracle_matmul(x, w);
    for (ExecMode mode : {ExecMode::Systolic, ExecMode::Simd}) {
      const auto off = worst_case_offsets(map, w.rows, w.cols, mode, kWorstK1.model);
      const auto lit = mode == ExecMode::Systolic ? systolic_exec(w, x, map, plan_bypass(w, map), kWorstK1)
                                                  : simd_exec(w, x, map, kWorstK1);
      for (int m = 0; m < x.rows; ++m)
        for (int j = 0; j < w.cols; ++j) CHECK(lit(m, j) == exact(m, j) + off[j]);
    }
  }
}

TEST_CASE("per-fault netlist errors stay within the bound per MAC") {
  const auto nl = gen_mac_int8();
  const auto part = partition(nl, 1);
  std::vector<FaultErrorTable> tables;
  for (std::size_t i = 0; i < part.f_noncrit.size(); i += 5) tables.emplace_back(nl, part.f_noncrit.sites[i]);
  const ArrayErrorModel err{{ErrorFormat::Int8Mac, 1, ErrorMode::PerFaultNetlist}, &tables};
  std::mt19937_64 rng(2);
  const auto map = build_fault_map(8, 8, 25, 3);
  const auto w = random_matrix(16, 8, rng);
  const auto x = random_matrix(5, 16, rng);
  const auto exact = oracle_matmul(x, w);
  const auto y = systolic_exec(w, x, map, plan_bypass(w, map), err);
  // Two tiles of 8 rows, two faulty PEs per column: at most 4 faulty MACs.
  for (int m = 0; m < 5; ++m)
    for (int j = 0; j < 8; ++j) CHECK(std::abs(y(m, j) - exact(m, j)) <= 4 * 7);
  CHECK_THROWS_AS(systolic_exec(w, x, map, plan_bypass(w, map), ArrayErrorModel{{ErrorFormat::Int8Mac, 1, ErrorMode::PerFaultNetlist}}),
                  ArrayError);
}
