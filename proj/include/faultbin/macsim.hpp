#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faultbin/faults.hpp"
#include "faultbin/netlist.hpp"

namespace faultbin {

/// Evaluates with every listed fault applied at once.
BusValues inject_eval(const Netlist& netlist, std::span<const FaultSite> faults, const BusValues& inputs);
BitVec inject_evaluate(const Netlist& netlist, std::span<const FaultSite> faults, const BitVec& inputs);

/// Signed value of a primary-output vector (two's complement over all
/// output bits, LSB first; at most 64 bits).
std::int64_t signed_output(const BitVec& outputs);

/// Primary-input positions that structurally reach any of the output bits a
/// fault at this site can disturb.
std::vector<int> fault_input_support(const Netlist& netlist, const FaultSite& fault);

struct MaxErrorOptions {
  /// Exhaustive when the support has at most this many bits; sampled beyond.
  int max_exhaustive_bits = 24;
  long samples = 1L << 16;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct MaxErrorResult {
  std::int64_t max_error = 0;
  /// Exhaustive over the fault's input support (exact); otherwise a lower
  /// bound from sampling.
  bool exhaustive = true;
  long patterns = 0;
  int support_bits = 0;
  BitVec witness;  // primary inputs reaching max_error (empty when 0)
};

/// max |faulty - exact| over inputs, outputs read as one signed value. Inputs
/// outside the support cannot change the difference, so enumerating the
/// support (others held at 0) is exhaustive over the whole input space.
MaxErrorResult max_error(const Netlist& netlist, const FaultSite& fault, const MaxErrorOptions& opts = {});

/// Reference sweep: full-evaluation simulator over every input combination
/// (only for netlists with few inputs).
std::int64_t max_error_bruteforce(const Netlist& netlist, const FaultSite& fault);

enum class ErrorFormat : std::uint8_t { Int8Mac, Bfloat16Behavioral };
enum class ErrorMode : std::uint8_t { WorstCaseSigned, PerFaultNetlist };

std::string_view to_string(ErrorFormat f);
std::string_view to_string(ErrorMode m);
ErrorFormat error_format_from_string(std::string_view s);
ErrorMode error_mode_from_string(std::string_view s);

struct ErrorModel {
  ErrorFormat format = ErrorFormat::Int8Mac;
  int k = 1;
  ErrorMode mode = ErrorMode::WorstCaseSigned;
};

/// Magnitude of the worst-case int8 MAC error: sum of 2^i for i = 0..k+1.
std::int64_t worst_case_magnitude(int k);

/// int8: exact + polarity * worst_case_magnitude(k).
std::int64_t behavioral_error(const ErrorModel& model, int polarity, std::int64_t exact_mac);
/// bfloat16: the product moved by the value of its k+1 lowest mantissa bits
/// (all set) in the direction of polarity. Zero products are left exact.
float behavioral_error_bf16(const ErrorModel& model, int polarity, float product);

/// Data-dependent error of one netlist fault on the int8 MAC, tabulated over
/// the fault's input support. The MAC error depends only on those bits, so
/// the table applies to any accumulator width whose low bits match.
class FaultErrorTable {
 public:
  FaultErrorTable(const Netlist& mac, const FaultSite& fault, int max_bits = 20);

  const FaultSite& fault() const { return fault_; }
  /// Error for multiplicand a, multiplier b and the incoming accumulator.
  std::int64_t error(std::int64_t a, std::int64_t b, std::int64_t acc) const;
  std::int64_t max_abs() const { return max_abs_; }

 private:
  FaultSite fault_;
  // Per support bit: which MAC operand (0 a, 1 b, 2 acc) and bit index.
  std::vector<std::pair<int, int>> bits_;
  std::vector<std::int32_t> table_;
  std::int64_t max_abs_ = 0;
};

}  // namespace faultbin
