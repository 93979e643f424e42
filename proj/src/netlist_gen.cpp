#include <algorithm>
#include <deque>

#include "faultbin/netlist.hpp"

namespace faultbin {

namespace {

/// A generator-side signal: either a constant or a net of the builder.
struct Signal {
  enum class Kind : std::uint8_t { Zero, One, Net };
  Kind kind = Kind::Zero;
  int net = -1;

  static Signal zero() { return {Kind::Zero, -1}; }
  static Signal one() { return {Kind::One, -1}; }
  static Signal of(int net) { return {Kind::Net, net}; }
  static Signal constant(bool v) { return v ? one() : zero(); }
  bool is_const() const { return kind != Kind::Net; }
  bool value() const { return kind == Kind::One; }
};

/// Builds netlists from signals, folding constants as it goes so the
/// emitted netlist contains only primitive gates over real nets. Logic that
/// reaches no output is swept in build().
class NetlistBuilder {
 public:
  std::vector<Signal> input(const std::string& bus, int width) {
    std::vector<Signal> bits;
    std::vector<int> nets;
    for (int i = 0; i < width; ++i) {
      const int n = new_net(bus_bit_name(bus, i));
      is_pi_[n] = 1;
      nets.push_back(n);
      bits.push_back(Signal::of(n));
    }
    inputs_.emplace_back(bus, nets);
    return bits;
  }

  Signal gate(GateKind kind, std::vector<Signal> ins) {
    switch (kind) {
      case GateKind::Buf: return ins.at(0);
      case GateKind::Not: return invert(ins.at(0));
      case GateKind::And:
      case GateKind::Nand: return and_like(std::move(ins), kind == GateKind::Nand);
      case GateKind::Or:
      case GateKind::Nor: return or_like(std::move(ins), kind == GateKind::Nor);
      case GateKind::Xor:
      case GateKind::Xnor: return xor_like(std::move(ins), kind == GateKind::Xnor);
    }
    return Signal::zero();
  }

  Signal and2(Signal a, Signal b) { return gate(GateKind::And, {a, b}); }
  Signal or2(Signal a, Signal b) { return gate(GateKind::Or, {a, b}); }
  Signal xor2(Signal a, Signal b) { return gate(GateKind::Xor, {a, b}); }
  Signal nand2(Signal a, Signal b) { return gate(GateKind::Nand, {a, b}); }

  void output(const std::string& bus, std::vector<Signal> bits) {
    outputs_.emplace_back(bus, std::move(bits));
  }

  /// Gives an internal net a readable name (e.g. "prod[3]").
  void name(Signal s, const std::string& label) {
    if (s.is_const() || is_pi_[s.net]) return;
    names_[s.net] = label;
  }

  void carry(int bit, Signal s) { carries_[bit] = s; }

  Netlist build() {
    // Output bits claim the driving net, or get a buffer when the net is a
    // primary input or already claimed by another output bit.
    std::vector<char> claimed(names_.size(), 0);
    for (auto& [bus, bits] : outputs_) {
      for (int i = 0; i < static_cast<int>(bits.size()); ++i) {
        Signal s = bits[i];
        if (s.is_const()) throw std::logic_error("generator produced a constant output bit");
        const std::string label = bus_bit_name(bus, i);
        if (is_pi_[s.net] || claimed[s.net]) {
          const int n = new_net(label);
          claimed.push_back(0);
          gates_.push_back({GateKind::Buf, {s.net}, n});
          driver_[n] = static_cast<int>(gates_.size()) - 1;
          s = Signal::of(n);
        } else {
          names_[s.net] = label;
        }
        claimed[s.net] = 1;
        bits[i] = s;
      }
    }

    // Sweep logic that reaches no output.
    std::vector<char> live_net(names_.size(), 0);
    std::vector<char> live_gate(gates_.size(), 0);
    std::vector<int> stack;
    for (const auto& [bus, bits] : outputs_) {
      for (const auto& s : bits) stack.push_back(s.net);
    }
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      if (live_net[n]) continue;
      live_net[n] = 1;
      const int d = driver_[n];
      if (d >= 0 && !live_gate[d]) {
        live_gate[d] = 1;
        for (int in : gates_[d].ins) stack.push_back(in);
      }
    }

    NetlistDescription desc;
    for (const auto& [bus, nets] : inputs_) desc.inputs.push_back({bus, static_cast<int>(nets.size()), 0});
    std::vector<char> is_output_net(names_.size(), 0);
    for (const auto& [bus, bits] : outputs_) {
      desc.outputs.push_back({bus, static_cast<int>(bits.size()), 0});
      for (const auto& s : bits) is_output_net[s.net] = 1;
    }
    std::vector<std::string> final_name(names_.size());
    int auto_id = 0;
    for (std::size_t n = 0; n < names_.size(); ++n) {
      if (!live_net[n] && !is_pi_[n]) continue;
      if (is_pi_[n] || is_output_net[n]) {
        final_name[n] = names_[n];
        continue;
      }
      final_name[n] = names_[n].empty() ? "n" + std::to_string(auto_id++) : names_[n];
      desc.nets.push_back({final_name[n], 0});
    }
    int next_id = 0;
    for (std::size_t g = 0; g < gates_.size(); ++g) {
      if (!live_gate[g]) continue;
      NetlistDescription::GateDecl gd;
      gd.id = next_id++;
      gd.kind = gates_[g].kind;
      gd.output = final_name[gates_[g].out];
      for (int in : gates_[g].ins) gd.inputs.push_back(final_name[in]);
      desc.gates.push_back(std::move(gd));
    }
    int out_width = 0;
    for (const auto& [bus, bits] : outputs_) out_width += static_cast<int>(bits.size());
    for (const auto& [bit, s] : carries_) {
      if (bit >= out_width) continue;
      if (s.is_const()) {
        if (s.value()) throw std::logic_error("constant-one carry annotation");
        desc.carries.push_back({bit, "-", 0});
      } else if (live_net[s.net]) {
        desc.carries.push_back({bit, final_name[s.net], 0});
      }
    }
    return Netlist::create(desc);
  }

 private:
  struct BGate {
    GateKind kind;
    std::vector<int> ins;
    int out;
  };

  int new_net(std::string label) {
    names_.push_back(std::move(label));
    driver_.push_back(-1);
    is_pi_.push_back(0);
    return static_cast<int>(names_.size()) - 1;
  }

  Signal emit(GateKind kind, std::vector<int> ins) {
    const int n = new_net({});
    gates_.push_back({kind, std::move(ins), n});
    driver_[n] = static_cast<int>(gates_.size()) - 1;
    return Signal::of(n);
  }

  Signal invert(Signal s) {
    if (s.is_const()) return Signal::constant(!s.value());
    const int d = driver_[s.net];
    if (d >= 0 && gates_[d].kind == GateKind::Not) return Signal::of(gates_[d].ins[0]);
    return emit(GateKind::Not, {s.net});
  }

  Signal and_like(std::vector<Signal> ins, bool negate) {
    std::vector<int> nets;
    for (const auto& s : ins) {
      if (s.is_const()) {
        if (!s.value()) return Signal::constant(negate);
        continue;
      }
      if (std::find(nets.begin(), nets.end(), s.net) == nets.end()) nets.push_back(s.net);
    }
    if (nets.empty()) return Signal::constant(!negate);
    if (nets.size() == 1) return negate ? invert(Signal::of(nets[0])) : Signal::of(nets[0]);
    return emit(negate ? GateKind::Nand : GateKind::And, std::move(nets));
  }

  Signal or_like(std::vector<Signal> ins, bool negate) {
    std::vector<int> nets;
    for (const auto& s : ins) {
      if (s.is_const()) {
        if (s.value()) return Signal::constant(!negate);
        continue;
      }
      if (std::find(nets.begin(), nets.end(), s.net) == nets.end()) nets.push_back(s.net);
    }
    if (nets.empty()) return Signal::constant(negate);
    if (nets.size() == 1) return negate ? invert(Signal::of(nets[0])) : Signal::of(nets[0]);
    return emit(negate ? GateKind::Nor : GateKind::Or, std::move(nets));
  }

  Signal xor_like(std::vector<Signal> ins, bool negate) {
    bool parity = negate;
    std::vector<int> nets;
    for (const auto& s : ins) {
      if (s.is_const()) {
        parity ^= s.value();
        continue;
      }
      auto it = std::find(nets.begin(), nets.end(), s.net);
      if (it != nets.end()) {
        nets.erase(it);
      } else {
        nets.push_back(s.net);
      }
    }
    if (nets.empty()) return Signal::constant(parity);
    if (nets.size() == 1) return parity ? invert(Signal::of(nets[0])) : Signal::of(nets[0]);
    return emit(parity ? GateKind::Xnor : GateKind::Xor, std::move(nets));
  }

  std::vector<std::string> names_;
  std::vector<int> driver_;
  std::vector<char> is_pi_;
  std::vector<BGate> gates_;
  std::vector<std::pair<std::string, std::vector<int>>> inputs_;
  std::vector<std::pair<std::string, std::vector<Signal>>> outputs_;
  std::map<int, Signal> carries_;
};

struct GenProp {
  Signal g;
  Signal p;
};

struct AdderResult {
  std::vector<Signal> sum;
  std::vector<Signal> carry_in;  // carry into bit i, i = 0..width (last is carry out)
};

// Expanded lookahead over at most four units: carry into unit j is
// g[j-1] + p[j-1]g[j-2] + ... + p[j-1]..p[0]cin.
std::vector<Signal> expand_carries(NetlistBuilder& b, std::span<const GenProp> u, Signal cin) {
  std::vector<Signal> c{cin};
  for (std::size_t j = 1; j <= u.size(); ++j) {
    std::vector<Signal> terms;
    for (std::size_t t = j; t-- > 0;) {
      std::vector<Signal> prod;
      for (std::size_t q = j - 1; q > t; --q) prod.push_back(u[q].p);
      prod.push_back(u[t].g);
      terms.push_back(b.gate(GateKind::And, prod));
    }
    std::vector<Signal> all_p;
    for (std::size_t q = 0; q < j; ++q) all_p.push_back(u[q].p);
    all_p.push_back(cin);
    terms.push_back(b.gate(GateKind::And, all_p));
    c.push_back(b.gate(GateKind::Or, terms));
  }
  return c;
}

std::size_t block_size(std::size_t n) {
  std::size_t s = 4;
  while (n > 4 * s) s *= 4;
  return s;
}

GenProp group_gen_prop(NetlistBuilder& b, std::span<const GenProp> u) {
  if (u.size() == 1) return u[0];
  if (u.size() > 4) {
    const std::size_t s = block_size(u.size());
    std::vector<GenProp> groups;
    for (std::size_t i = 0; i < u.size(); i += s) groups.push_back(group_gen_prop(b, u.subspan(i, std::min(s, u.size() - i))));
    return group_gen_prop(b, groups);
  }
  std::vector<Signal> terms;
  for (std::size_t t = u.size(); t-- > 0;) {
    std::vector<Signal> prod;
    for (std::size_t q = u.size() - 1; q > t; --q) prod.push_back(u[q].p);
    prod.push_back(u[t].g);
    terms.push_back(b.gate(GateKind::And, prod));
  }
  std::vector<Signal> all_p;
  for (const auto& x : u) all_p.push_back(x.p);
  return {b.gate(GateKind::Or, terms), b.gate(GateKind::And, all_p)};
}

// Carry into each unit plus the carry out, using 4-wide lookahead blocks at
// every level so no carry ripples through more than four positions.
std::vector<Signal> lookahead_carries(NetlistBuilder& b, std::span<const GenProp> u, Signal cin) {
  if (u.size() <= 4) return expand_carries(b, u, cin);
  const std::size_t s = block_size(u.size());
  std::vector<GenProp> groups;
  for (std::size_t i = 0; i < u.size(); i += s) groups.push_back(group_gen_prop(b, u.subspan(i, std::min(s, u.size() - i))));
  const auto block_carry = lookahead_carries(b, groups, cin);
  std::vector<Signal> c;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const std::size_t first = k * s;
    const auto inner = lookahead_carries(b, u.subspan(first, std::min(s, u.size() - first)), block_carry[k]);
    c.insert(c.end(), inner.begin(), inner.end() - 1);
  }
  c.push_back(block_carry.back());
  return c;
}

AdderResult cla_add(NetlistBuilder& b, const std::vector<Signal>& x, const std::vector<Signal>& y, Signal cin) {
  std::vector<GenProp> units;
  for (std::size_t i = 0; i < x.size(); ++i) units.push_back({b.and2(x[i], y[i]), b.xor2(x[i], y[i])});
  AdderResult r;
  r.carry_in = lookahead_carries(b, units, cin);
  for (std::size_t i = 0; i < x.size(); ++i) r.sum.push_back(b.xor2(units[i].p, r.carry_in[i]));
  return r;
}

std::pair<Signal, Signal> full_add(NetlistBuilder& b, Signal x, Signal y, Signal z) {
  const Signal p = b.xor2(x, y);
  return {b.xor2(p, z), b.or2(b.and2(x, y), b.and2(p, z))};
}

std::pair<Signal, Signal> half_add(NetlistBuilder& b, Signal x, Signal y) {
  return {b.xor2(x, y), b.and2(x, y)};
}

// Baugh-Wooley partial products reduced by a Wallace tree into two rows and
// summed by a carry-lookahead adder. Returns the 2n product bits and the
// final adder's carries (carry into product bit k).
AdderResult bw_multiply(NetlistBuilder& b, const std::vector<Signal>& a, const std::vector<Signal>& x) {
  const int n = static_cast<int>(a.size());
  const int w = 2 * n;
  std::vector<std::deque<Signal>> cols(w);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool complement = (i == n - 1) != (j == n - 1);
      cols[i + j].push_back(complement ? b.nand2(a[i], x[j]) : b.and2(a[i], x[j]));
    }
  }
  cols[n].push_back(Signal::one());
  cols[w - 1].push_back(Signal::one());

  auto max_height = [&cols] {
    std::size_t h = 0;
    for (const auto& c : cols) h = std::max(h, c.size());
    return h;
  };
  while (max_height() > 2) {
    std::vector<std::deque<Signal>> next(w);
    for (int c = 0; c < w; ++c) {
      auto& col = cols[c];
      if (col.size() <= 2) {
        for (const auto& s : col) next[c].push_back(s);
        continue;
      }
      while (col.size() >= 3) {
        const Signal s0 = col.front(); col.pop_front();
        const Signal s1 = col.front(); col.pop_front();
        const Signal s2 = col.front(); col.pop_front();
        const auto [sum, carry] = full_add(b, s0, s1, s2);
        next[c].push_back(sum);
        if (c + 1 < w) next[c + 1].push_back(carry);
      }
      if (col.size() == 2) {
        const Signal s0 = col.front(); col.pop_front();
        const Signal s1 = col.front(); col.pop_front();
        const auto [sum, carry] = half_add(b, s0, s1);
        next[c].push_back(sum);
        if (c + 1 < w) next[c + 1].push_back(carry);
      } else if (col.size() == 1) {
        next[c].push_back(col.front());
      }
    }
    cols = std::move(next);
  }
  std::vector<Signal> row0(w, Signal::zero());
  std::vector<Signal> row1(w, Signal::zero());
  for (int c = 0; c < w; ++c) {
    if (!cols[c].empty()) row0[c] = cols[c][0];
    if (cols[c].size() > 1) row1[c] = cols[c][1];
  }
  return cla_add(b, row0, row1, Signal::zero());
}

void check_width(int width, std::string_view what) {
  if (width < 2) {
    throw NetlistError(NetlistErrc::InvalidParameter,
                       std::string(what) + " width must be at least 2, got " + std::to_string(width));
  }
  if (width > 64) {
    throw NetlistError(NetlistErrc::InvalidParameter,
                       std::string(what) + " width must be at most 64, got " + std::to_string(width));
  }
}

}  // namespace

Netlist gen_baugh_wooley(int width) {
  check_width(width, "Baugh-Wooley multiplier");
  NetlistBuilder b;
  const auto a = b.input("a", width);
  const auto x = b.input("b", width);
  const auto prod = bw_multiply(b, a, x);
  b.output("p", prod.sum);
  for (int k = 0; k < 2 * width; ++k) b.carry(k, prod.carry_in[k]);
  return b.build();
}

Netlist gen_cla_adder(int width) {
  check_width(width, "carry-lookahead adder");
  NetlistBuilder b;
  const auto a = b.input("a", width);
  const auto x = b.input("b", width);
  const auto r = cla_add(b, a, x, Signal::zero());
  b.output("s", r.sum);
  b.output("cout", {r.carry_in[width]});
  for (int k = 0; k <= width; ++k) b.carry(k, r.carry_in[k]);
  return b.build();
}

Netlist gen_mac_int8() {
  NetlistBuilder b;
  const auto a = b.input("a", 8);
  const auto x = b.input("b", 8);
  const auto acc = b.input("acc", 16);
  const auto prod = bw_multiply(b, a, x);
  for (int i = 0; i < 16; ++i) b.name(prod.sum[i], bus_bit_name("prod", i));
  // The 16-bit product already spans the accumulator width, so the sign
  // extension is the identity; the adder carry out is discarded (wrap-around).
  const auto r = cla_add(b, prod.sum, acc, Signal::zero());
  b.output("y", r.sum);
  for (int k = 0; k < 16; ++k) b.carry(k, r.carry_in[k]);
  return b.build();
}

Netlist gen_ripple_adder(int width, std::optional<int> cut_after) {
  check_width(width, "ripple-carry adder");
  if (cut_after && (*cut_after < 0 || *cut_after >= width - 1)) {
    throw NetlistError(NetlistErrc::InvalidParameter, "ripple cut position out of range");
  }
  NetlistBuilder b;
  const auto a = b.input("a", width);
  const auto x = b.input("b", width);
  std::vector<Signal> sum;
  Signal c = Signal::zero();
  for (int i = 0; i < width; ++i) {
    b.carry(i, c);
    const auto [s, co] = full_add(b, a[i], x[i], c);
    sum.push_back(s);
    c = (cut_after && i == *cut_after) ? Signal::zero() : co;
  }
  b.carry(width, c);
  b.output("s", sum);
  b.output("cout", {c});
  return b.build();
}

}  // namespace faultbin
