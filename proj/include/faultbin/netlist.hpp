#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace faultbin {

enum class GateKind : std::uint8_t { And, Or, Nand, Nor, Xor, Xnor, Not, Buf };

std::string_view to_string(GateKind kind);
std::optional<GateKind> gate_kind_from_string(std::string_view text);

using NetId = int;
using GateId = int;

/// Carry annotation value for a bit whose carry-in is structurally constant 0.
inline constexpr NetId kConstZeroCarry = -1;

struct Gate {
  GateId id = 0;
  GateKind kind = GateKind::Buf;
  std::vector<NetId> inputs;
  NetId output = 0;
};

/// A reference to one input pin of a gate (gate is an index into
/// Netlist::gates(), not the user-visible id).
struct PinRef {
  int gate = 0;
  int pin = 0;
};

struct Bus {
  std::string name;
  std::vector<NetId> nets;  // LSB first
};

/// Fixed-width bit vector; bits above width are always zero.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(int width);

  static BitVec from_uint(int width, std::uint64_t value);
  /// Two's complement encoding of value truncated to width.
  static BitVec from_int(int width, std::int64_t value);

  int width() const { return width_; }
  bool bit(int i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(int i, bool v);

  /// Low 64 bits as unsigned.
  std::uint64_t to_uint() const;
  /// Sign-extended value; requires width <= 64.
  std::int64_t to_int() const;

  std::span<const std::uint64_t> words() const { return words_; }
  std::string to_hex() const;
  static BitVec from_hex(int width, std::string_view hex);

  friend bool operator==(const BitVec&, const BitVec&) = default;

 private:
  int width_ = 0;
  std::vector<std::uint64_t> words_;
};

enum class NetlistErrc {
  Syntax,
  UnknownNet,
  DuplicateName,
  DuplicateGateId,
  BadArity,
  MultiplyDriven,
  Cycle,
  Dangling,
  BadAnnotation,
  InvalidParameter,
  BadInput,
};

std::string_view to_string(NetlistErrc code);

class NetlistError : public std::runtime_error {
 public:
  NetlistError(NetlistErrc code, std::string message, int line = 0, int column = 0,
               std::string net = {});

  NetlistErrc code() const { return code_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& net() const { return net_; }

 private:
  NetlistErrc code_;
  int line_;
  int column_;
  std::string net_;
};

/// Unvalidated, name-based netlist description. Both the text/JSON readers
/// and the structural generators produce one of these; Netlist::create is
/// the single validation path.
struct NetlistDescription {
  struct BusDecl {
    std::string name;
    int width = 0;
    int line = 0;
  };
  struct NetDecl {
    std::string name;
    int line = 0;
  };
  struct GateDecl {
    GateId id = 0;
    GateKind kind = GateKind::Buf;
    std::string output;
    std::vector<std::string> inputs;
    int line = 0;
  };
  struct CarryDecl {
    int bit = 0;
    std::string net;  // "-" marks a constant-zero carry
    int line = 0;
  };

  std::vector<BusDecl> inputs;
  std::vector<BusDecl> outputs;
  std::vector<NetDecl> nets;
  std::vector<GateDecl> gates;
  std::vector<CarryDecl> carries;
};

std::string bus_bit_name(std::string_view bus, int bit);

/// Immutable, validated combinational netlist.
///
/// Nets are numbered input-bus bits first (declaration order), then output
/// bus bits, then internal nets in declaration order. Primary outputs are the
/// concatenation of the output buses, LSB first, so output bit position i is
/// primary_outputs()[i] and the MSB position is msb_position().
class Netlist {
 public:
  static Netlist create(const NetlistDescription& desc);

  const std::vector<Gate>& gates() const { return gates_; }
  const std::vector<std::string>& net_names() const { return net_names_; }
  int net_count() const { return static_cast<int>(net_names_.size()); }
  int gate_count() const { return static_cast<int>(gates_.size()); }

  std::optional<NetId> find_net(std::string_view name) const;
  /// Index into gates() for a user-visible id, or -1.
  int gate_index(GateId id) const;

  const std::vector<Bus>& input_buses() const { return inputs_; }
  const std::vector<Bus>& output_buses() const { return outputs_; }
  const Bus* find_input_bus(std::string_view name) const;
  const Bus* find_output_bus(std::string_view name) const;
  const std::vector<NetId>& primary_inputs() const { return pis_; }
  const std::vector<NetId>& primary_outputs() const { return pos_; }
  int msb_position() const { return static_cast<int>(pos_.size()) - 1; }

  /// Gate indices in a topological order.
  const std::vector<int>& topo_order() const { return topo_; }
  /// Driving gate index, or -1 for a primary input.
  int driver(NetId net) const { return driver_[net]; }
  std::span<const PinRef> fanout(NetId net) const;
  /// Position in primary_inputs(), or -1.
  int pi_position(NetId net) const { return pi_pos_[net]; }
  /// Output bit position, or -1.
  int po_position(NetId net) const { return po_pos_[net]; }

  /// carry_in_of_bit annotations: bit -> net (kConstZeroCarry when constant).
  const std::map<int, NetId>& carry_annotations() const { return carries_; }
  std::optional<NetId> carry_in_of_bit(int bit) const;
  Netlist with_carry_annotation(int bit, NetId net) const;

  /// Total stuck-at sites, 2 * (arity + 1) per gate.
  long uncollapsed_fault_count() const;

  NetlistDescription describe() const;

 private:
  Netlist() = default;
  void index();

  std::vector<std::string> net_names_;
  std::vector<Gate> gates_;
  std::vector<Bus> inputs_;
  std::vector<Bus> outputs_;
  std::vector<NetId> pis_;
  std::vector<NetId> pos_;
  std::vector<int> topo_;
  std::vector<int> driver_;
  std::vector<int> fanout_offsets_;
  std::vector<PinRef> fanout_pins_;
  std::vector<int> pi_pos_;
  std::vector<int> po_pos_;
  std::map<int, NetId> carries_;
  std::map<std::string, NetId, std::less<>> net_lookup_;
  std::vector<std::pair<GateId, int>> id_lookup_;
};

// Text and JSON formats.
Netlist parse_netlist(std::string_view text);
std::string emit_netlist(const Netlist& netlist);
nlohmann::json netlist_to_json(const Netlist& netlist);
Netlist netlist_from_json(const nlohmann::json& doc);

// Evaluation.
using BusValues = std::map<std::string, BitVec, std::less<>>;

/// Evaluates one input assignment given per bus.
BusValues eval(const Netlist& netlist, const BusValues& inputs);
/// Packs bus values into a primary-input vector (validates widths).
BitVec assemble_inputs(const Netlist& netlist, const BusValues& inputs);
BusValues split_outputs(const Netlist& netlist, const BitVec& outputs);
/// Primary-output vector for a primary-input vector.
BitVec evaluate(const Netlist& netlist, const BitVec& inputs);

std::uint64_t eval_gate_word(GateKind kind, std::span<const std::uint64_t> in);

/// Bit-parallel simulation of 64 patterns. pi_words[i] holds primary input i
/// across the 64 patterns; net_words receives every net (size net_count()).
void simulate_block(const Netlist& netlist, std::span<const std::uint64_t> pi_words,
                    std::span<std::uint64_t> net_words);

// Structural generators.
Netlist gen_baugh_wooley(int width = 8);
Netlist gen_cla_adder(int width = 16);
Netlist gen_mac_int8();
/// Ripple-carry adder; when cut_after is set, the carry out of that bit is
/// not propagated into the next bit.
Netlist gen_ripple_adder(int width, std::optional<int> cut_after = std::nullopt);

}  // namespace faultbin
