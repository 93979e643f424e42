#include "faultbin/netlist.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <set>

namespace faultbin {

namespace {

constexpr std::array<std::string_view, 8> kKindNames = {"AND", "OR",  "NAND", "NOR",
                                                        "XOR", "XNOR", "NOT", "BUF"};

bool unary(GateKind kind) { return kind == GateKind::Not || kind == GateKind::Buf; }

}  // namespace

std::string_view to_string(GateKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<GateKind> gate_kind_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == text) return static_cast<GateKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(NetlistErrc code) {
  switch (code) {
    case NetlistErrc::Syntax: return "syntax";
    case NetlistErrc::UnknownNet: return "unknown-net";
    case NetlistErrc::DuplicateName: return "duplicate-name";
    case NetlistErrc::DuplicateGateId: return "duplicate-gate-id";
    case NetlistErrc::BadArity: return "bad-arity";
    case NetlistErrc::MultiplyDriven: return "multiply-driven-net";
    case NetlistErrc::Cycle: return "combinational-cycle";
    case NetlistErrc::Dangling: return "dangling-net";
    case NetlistErrc::BadAnnotation: return "bad-annotation";
    case NetlistErrc::InvalidParameter: return "invalid-parameter";
    case NetlistErrc::BadInput: return "bad-input";
  }
  return "unknown";
}

static std::string format_error(NetlistErrc code, const std::string& message, int line, int column) {
  std::string out(to_string(code));
  if (line > 0) {
    out += " at " + std::to_string(line);
    if (column > 0) out += ":" + std::to_string(column);
  }
  out += ": " + message;
  return out;
}

NetlistError::NetlistError(NetlistErrc code, std::string message, int line, int column,
                           std::string net)
    : std::runtime_error(format_error(code, message, line, column)),
      code_(code),
      line_(line),
      column_(column),
      net_(std::move(net)) {}

// ---------------------------------------------------------------------------
// BitVec

BitVec::BitVec(int width) : width_(width), words_((width + 63) / 64, 0) {
  if (width <= 0) throw std::invalid_argument("BitVec width must be positive");
}

BitVec BitVec::from_uint(int width, std::uint64_t value) {
  BitVec v(width);
  if (width < 64) value &= (std::uint64_t{1} << width) - 1;
  v.words_[0] = value;
  return v;
}

BitVec BitVec::from_int(int width, std::int64_t value) {
  BitVec v(width);
  for (int i = 0; i < width; ++i) {
    const int shift = std::min(i, 63);
    v.set(i, (static_cast<std::uint64_t>(value >> shift) & 1U) != 0);
  }
  return v;
}

void BitVec::set(int i, bool v) {
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (v) {
    words_[i >> 6] |= mask;
  } else {
    words_[i >> 6] &= ~mask;
  }
}

std::uint64_t BitVec::to_uint() const { return words_.empty() ? 0 : words_[0]; }

std::int64_t BitVec::to_int() const {
  if (width_ > 64) throw std::logic_error("BitVec::to_int needs width <= 64");
  std::uint64_t v = words_[0];
  if (width_ < 64 && bit(width_ - 1)) v |= ~((std::uint64_t{1} << width_) - 1);
  return static_cast<std::int64_t>(v);
}

std::string BitVec::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const int digits = (width_ + 3) / 4;
  std::string out(digits, '0');
  for (int d = 0; d < digits; ++d) {
    int nibble = 0;
    for (int b = 0; b < 4; ++b) {
      const int i = d * 4 + b;
      if (i < width_ && bit(i)) nibble |= 1 << b;
    }
    out[digits - 1 - d] = kDigits[nibble];
  }
  return out;
}

BitVec BitVec::from_hex(int width, std::string_view hex) {
  BitVec v(width);
  int pos = 0;
  for (auto it = hex.rbegin(); it != hex.rend(); ++it) {
    const char c = *it;
    int nibble;
    if (c >= '0' && c <= '9') {
      nibble = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      nibble = c - 'a' + 10;
    } else if (c >= 'A' && c <= 'F') {
      nibble = c - 'A' + 10;
    } else {
      throw std::invalid_argument("bad hex digit in pattern");
    }
    for (int b = 0; b < 4; ++b, ++pos) {
      if ((nibble >> b) & 1) {
        if (pos >= width) throw std::invalid_argument("hex pattern wider than declared width");
        v.set(pos, true);
      }
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Netlist

std::string bus_bit_name(std::string_view bus, int bit) {
  std::string out(bus);
  out += '[';
  out += std::to_string(bit);
  out += ']';
  return out;
}

Netlist Netlist::create(const NetlistDescription& desc) {
  Netlist nl;
  auto add_net = [&nl](const std::string& name, int line) {
    auto [it, inserted] = nl.net_lookup_.emplace(name, static_cast<NetId>(nl.net_names_.size()));
    if (!inserted) {
      throw NetlistError(NetlistErrc::DuplicateName, "net '" + name + "' declared twice", line, 0,
                         name);
    }
    nl.net_names_.push_back(name);
    return it->second;
  };
  std::set<std::string, std::less<>> bus_names;
  auto add_bus = [&](const NetlistDescription::BusDecl& decl, std::vector<Bus>& into) {
    if (decl.width <= 0) {
      throw NetlistError(NetlistErrc::Syntax, "bus '" + decl.name + "' needs a positive width",
                         decl.line);
    }
    if (!bus_names.insert(decl.name).second) {
      throw NetlistError(NetlistErrc::DuplicateName, "bus '" + decl.name + "' declared twice",
                         decl.line, 0, decl.name);
    }
    Bus bus{decl.name, {}};
    for (int i = 0; i < decl.width; ++i) bus.nets.push_back(add_net(bus_bit_name(decl.name, i), decl.line));
    into.push_back(std::move(bus));
  };
  for (const auto& b : desc.inputs) add_bus(b, nl.inputs_);
  for (const auto& b : desc.outputs) add_bus(b, nl.outputs_);
  if (nl.inputs_.empty()) throw NetlistError(NetlistErrc::Syntax, "netlist declares no input bus");
  if (nl.outputs_.empty()) throw NetlistError(NetlistErrc::Syntax, "netlist declares no output bus");
  for (const auto& n : desc.nets) add_net(n.name, n.line);

  for (const auto& b : nl.inputs_) nl.pis_.insert(nl.pis_.end(), b.nets.begin(), b.nets.end());
  for (const auto& b : nl.outputs_) nl.pos_.insert(nl.pos_.end(), b.nets.begin(), b.nets.end());

  auto resolve = [&nl](const std::string& name, int line) {
    auto it = nl.net_lookup_.find(name);
    if (it == nl.net_lookup_.end()) {
      throw NetlistError(NetlistErrc::UnknownNet, "net '" + name + "' is not declared", line, 0,
                         name);
    }
    return it->second;
  };

  // Gates sorted by id; ids unique.
  std::vector<const NetlistDescription::GateDecl*> order;
  order.reserve(desc.gates.size());
  for (const auto& g : desc.gates) order.push_back(&g);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->id == order[i - 1]->id) {
      throw NetlistError(NetlistErrc::DuplicateGateId,
                         "gate id " + std::to_string(order[i]->id) + " used twice",
                         std::max(order[i]->line, order[i - 1]->line));
    }
  }

  std::vector<int> driver(nl.net_names_.size(), -2);  // -2 undriven, -1 PI
  for (NetId pi : nl.pis_) driver[pi] = -1;
  std::vector<int> readers(nl.net_names_.size(), 0);
  for (const auto* decl : order) {
    const bool arity_ok = unary(decl->kind) ? decl->inputs.size() == 1 : decl->inputs.size() >= 2;
    if (!arity_ok) {
      throw NetlistError(NetlistErrc::BadArity,
                         "gate " + std::to_string(decl->id) + " (" + std::string(to_string(decl->kind)) +
                             ") has " + std::to_string(decl->inputs.size()) + " inputs",
                         decl->line);
    }
    Gate g;
    g.id = decl->id;
    g.kind = decl->kind;
    g.output = resolve(decl->output, decl->line);
    for (const auto& in : decl->inputs) g.inputs.push_back(resolve(in, decl->line));
    if (driver[g.output] != -2) {
      throw NetlistError(NetlistErrc::MultiplyDriven,
                         "net '" + decl->output + "' is driven more than once", decl->line, 0,
                         decl->output);
    }
    driver[g.output] = static_cast<int>(nl.gates_.size());
    for (NetId in : g.inputs) ++readers[in];
    nl.gates_.push_back(std::move(g));
  }

  std::vector<char> is_po(nl.net_names_.size(), 0);
  for (NetId po : nl.pos_) is_po[po] = 1;
  for (NetId n = 0; n < nl.net_count(); ++n) {
    if (driver[n] == -2) {
      throw NetlistError(NetlistErrc::Dangling, "net '" + nl.net_names_[n] + "' has no driver", 0, 0,
                         nl.net_names_[n]);
    }
    if (driver[n] >= 0 && readers[n] == 0 && !is_po[n]) {
      throw NetlistError(NetlistErrc::Dangling,
                         "net '" + nl.net_names_[n] + "' is driven but never used", 0, 0,
                         nl.net_names_[n]);
    }
  }
  nl.driver_ = std::move(driver);

  nl.index();

  if (static_cast<int>(nl.topo_.size()) != nl.gate_count()) {
    std::vector<char> placed(nl.gates_.size(), 0);
    for (int g : nl.topo_) placed[g] = 1;
    const auto it = std::find(placed.begin(), placed.end(), 0);
    const auto& g = nl.gates_[it - placed.begin()];
    throw NetlistError(NetlistErrc::Cycle,
                       "combinational cycle through gate " + std::to_string(g.id), 0, 0,
                       nl.net_names_[g.output]);
  }

  const int msb = nl.msb_position();
  for (const auto& c : desc.carries) {
    if (c.bit < 0 || c.bit > msb) {
      throw NetlistError(NetlistErrc::BadAnnotation,
                         "carry_in_of_bit " + std::to_string(c.bit) + " outside output range",
                         c.line);
    }
    if (nl.carries_.count(c.bit)) {
      throw NetlistError(NetlistErrc::BadAnnotation,
                         "carry_in_of_bit " + std::to_string(c.bit) + " annotated twice", c.line);
    }
    nl.carries_[c.bit] = c.net == "-" ? kConstZeroCarry : resolve(c.net, c.line);
  }
  return nl;
}

void Netlist::index() {
  const int nets = net_count();
  pi_pos_.assign(nets, -1);
  po_pos_.assign(nets, -1);
  for (std::size_t i = 0; i < pis_.size(); ++i) pi_pos_[pis_[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < pos_.size(); ++i) po_pos_[pos_[i]] = static_cast<int>(i);

  fanout_offsets_.assign(nets + 1, 0);
  for (const auto& g : gates_) {
    for (NetId in : g.inputs) ++fanout_offsets_[in + 1];
  }
  for (int n = 0; n < nets; ++n) fanout_offsets_[n + 1] += fanout_offsets_[n];
  fanout_pins_.assign(fanout_offsets_.back(), PinRef{});
  std::vector<int> fill(fanout_offsets_.begin(), fanout_offsets_.end() - 1);
  for (int gi = 0; gi < gate_count(); ++gi) {
    const auto& g = gates_[gi];
    for (int p = 0; p < static_cast<int>(g.inputs.size()); ++p) {
      fanout_pins_[fill[g.inputs[p]]++] = PinRef{gi, p};
    }
  }

  // Kahn's algorithm; lowest gate index first for a canonical order.
  std::vector<int> pending(gates_.size(), 0);
  for (int gi = 0; gi < gate_count(); ++gi) {
    for (NetId in : gates_[gi].inputs) {
      if (driver_[in] >= 0) ++pending[gi];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int gi = 0; gi < gate_count(); ++gi) {
    if (pending[gi] == 0) ready.push(gi);
  }
  topo_.clear();
  while (!ready.empty()) {
    const int gi = ready.top();
    ready.pop();
    topo_.push_back(gi);
    for (const auto& ref : fanout(gates_[gi].output)) {
      if (--pending[ref.gate] == 0) ready.push(ref.gate);
    }
  }

  id_lookup_.clear();
  for (int gi = 0; gi < gate_count(); ++gi) id_lookup_.emplace_back(gates_[gi].id, gi);
}

std::optional<NetId> Netlist::find_net(std::string_view name) const {
  auto it = net_lookup_.find(name);
  if (it == net_lookup_.end()) return std::nullopt;
  return it->second;
}

int Netlist::gate_index(GateId id) const {
  auto it = std::lower_bound(id_lookup_.begin(), id_lookup_.end(), std::make_pair(id, 0));
  if (it == id_lookup_.end() || it->first != id) return -1;
  return it->second;
}

const Bus* Netlist::find_input_bus(std::string_view name) const {
  for (const auto& b : inputs_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const Bus* Netlist::find_output_bus(std::string_view name) const {
  for (const auto& b : outputs_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::span<const PinRef> Netlist::fanout(NetId net) const {
  return {fanout_pins_.data() + fanout_offsets_[net],
          static_cast<std::size_t>(fanout_offsets_[net + 1] - fanout_offsets_[net])};
}

std::optional<NetId> Netlist::carry_in_of_bit(int bit) const {
  auto it = carries_.find(bit);
  if (it == carries_.end()) return std::nullopt;
  return it->second;
}

Netlist Netlist::with_carry_annotation(int bit, NetId net) const {
  if (bit < 0 || bit > msb_position()) {
    throw NetlistError(NetlistErrc::BadAnnotation,
                       "carry_in_of_bit " + std::to_string(bit) + " outside output range");
  }
  if (net != kConstZeroCarry && (net < 0 || net >= net_count())) {
    throw NetlistError(NetlistErrc::UnknownNet, "carry annotation names an unknown net");
  }
  Netlist copy = *this;
  copy.carries_[bit] = net;
  return copy;
}

long Netlist::uncollapsed_fault_count() const {
  long total = 0;
  for (const auto& g : gates_) total += 2 * (static_cast<long>(g.inputs.size()) + 1);
  return total;
}

NetlistDescription Netlist::describe() const {
  NetlistDescription d;
  for (const auto& b : inputs_) d.inputs.push_back({b.name, static_cast<int>(b.nets.size()), 0});
  for (const auto& b : outputs_) d.outputs.push_back({b.name, static_cast<int>(b.nets.size()), 0});
  const std::size_t first_internal = pis_.size() + pos_.size();
  for (std::size_t n = first_internal; n < net_names_.size(); ++n) d.nets.push_back({net_names_[n], 0});
  for (const auto& g : gates_) {
    NetlistDescription::GateDecl gd;
    gd.id = g.id;
    gd.kind = g.kind;
    gd.output = net_names_[g.output];
    for (NetId in : g.inputs) gd.inputs.push_back(net_names_[in]);
    d.gates.push_back(std::move(gd));
  }
  for (const auto& [bit, net] : carries_) {
    d.carries.push_back({bit, net == kConstZeroCarry ? std::string("-") : net_names_[net], 0});
  }
  return d;
}

}  // namespace faultbin
