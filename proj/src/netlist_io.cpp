#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "faultbin/netlist.hpp"

namespace faultbin {

namespace {

constexpr int kMaxBusWidth = 1 << 16;

struct Token {
  std::string_view text;
  int column = 0;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' && line[j] != '#') ++j;
    tokens.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
    i = j;
  }
  return tokens;
}

bool valid_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '[' || c == ']' || c == '.' || c == '$' || c == '/';
}

std::string check_name(const Token& tok, int line, bool bus) {
  if (tok.text.empty()) throw NetlistError(NetlistErrc::Syntax, "empty name", line, tok.column);
  for (char c : tok.text) {
    if (!valid_name_char(c) || (bus && (c == '[' || c == ']'))) {
      throw NetlistError(NetlistErrc::Syntax,
                         "invalid character in name '" + std::string(tok.text) + "'", line,
                         tok.column);
    }
  }
  return std::string(tok.text);
}

int parse_int(const Token& tok, int line, int min_value) {
  int value = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || value < min_value) {
    throw NetlistError(NetlistErrc::Syntax, "expected integer, got '" + std::string(tok.text) + "'",
                       line, tok.column);
  }
  return value;
}

void expect_count(const std::vector<Token>& toks, std::size_t n, int line, std::string_view what) {
  if (toks.size() != n) {
    const int col = toks.size() > n ? toks[n].column : toks.back().column;
    throw NetlistError(NetlistErrc::Syntax,
                       "'" + std::string(what) + "' takes " + std::to_string(n - 1) + " operands",
                       line, col);
  }
}

}  // namespace

Netlist parse_netlist(std::string_view text) {
  NetlistDescription desc;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const auto c = static_cast<unsigned char>(line[i]);
      if ((c < 0x20 && c != '\t' && c != '\r') || c >= 0x7f) {
        throw NetlistError(NetlistErrc::Syntax, "non-printable character in input", line_no,
                           static_cast<int>(i) + 1);
      }
    }
    const auto toks = tokenize(line);
    if (toks.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string_view kw = toks[0].text;
    if (kw == "input" || kw == "output") {
      expect_count(toks, 3, line_no, kw);
      NetlistDescription::BusDecl decl{check_name(toks[1], line_no, true),
                                       parse_int(toks[2], line_no, 1), line_no};
      if (decl.width > kMaxBusWidth) {
        throw NetlistError(NetlistErrc::Syntax, "bus width exceeds " + std::to_string(kMaxBusWidth),
                           line_no, toks[2].column);
      }
      (kw == "input" ? desc.inputs : desc.outputs).push_back(std::move(decl));
    } else if (kw == "net") {
      expect_count(toks, 2, line_no, kw);
      desc.nets.push_back({check_name(toks[1], line_no, false), line_no});
    } else if (kw == "gate") {
      if (toks.size() < 5) {
        throw NetlistError(NetlistErrc::Syntax, "'gate' needs id, kind, output and inputs", line_no,
                           toks.back().column);
      }
      NetlistDescription::GateDecl g;
      g.id = parse_int(toks[1], line_no, 0);
      const auto kind = gate_kind_from_string(toks[2].text);
      if (!kind) {
        throw NetlistError(NetlistErrc::Syntax, "unknown gate kind '" + std::string(toks[2].text) + "'",
                           line_no, toks[2].column);
      }
      g.kind = *kind;
      g.output = check_name(toks[3], line_no, false);
      for (std::size_t i = 4; i < toks.size(); ++i) g.inputs.push_back(check_name(toks[i], line_no, false));
      g.line = line_no;
      desc.gates.push_back(std::move(g));
    } else if (kw == "annot") {
      expect_count(toks, 4, line_no, kw);
      if (toks[1].text != "carry_in_of_bit") {
        throw NetlistError(NetlistErrc::Syntax, "unknown annotation '" + std::string(toks[1].text) + "'",
                           line_no, toks[1].column);
      }
      NetlistDescription::CarryDecl c;
      c.bit = parse_int(toks[2], line_no, 0);
      c.net = toks[3].text == "-" ? std::string("-") : check_name(toks[3], line_no, false);
      c.line = line_no;
      desc.carries.push_back(std::move(c));
    } else {
      throw NetlistError(NetlistErrc::Syntax, "unknown statement '" + std::string(kw) + "'", line_no,
                         toks[0].column);
    }
    if (end == text.size()) break;
  }
  return Netlist::create(desc);
}

std::string emit_netlist(const Netlist& netlist) {
  const auto d = netlist.describe();
  std::ostringstream out;
  out << "# faultbin structural netlist\n";
  out << "# gates " << netlist.gate_count() << ", fault sites " << netlist.uncollapsed_fault_count()
      << "\n";
  for (const auto& b : d.inputs) out << "input " << b.name << ' ' << b.width << '\n';
  for (const auto& b : d.outputs) out << "output " << b.name << ' ' << b.width << '\n';
  for (const auto& n : d.nets) out << "net " << n.name << '\n';
  for (const auto& g : d.gates) {
    out << "gate " << g.id << ' ' << to_string(g.kind) << ' ' << g.output;
    for (const auto& in : g.inputs) out << ' ' << in;
    out << '\n';
  }
  for (const auto& c : d.carries) out << "annot carry_in_of_bit " << c.bit << ' ' << c.net << '\n';
  return out.str();
}

nlohmann::json netlist_to_json(const Netlist& netlist) {
  const auto d = netlist.describe();
  nlohmann::json doc;
  doc["format"] = "faultbin-netlist";
  doc["version"] = 1;
  auto buses = [](const std::vector<NetlistDescription::BusDecl>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : list) arr.push_back({{"name", b.name}, {"width", b.width}});
    return arr;
  };
  doc["inputs"] = buses(d.inputs);
  doc["outputs"] = buses(d.outputs);
  doc["nets"] = nlohmann::json::array();
  for (const auto& n : d.nets) doc["nets"].push_back(n.name);
  doc["gates"] = nlohmann::json::array();
  for (const auto& g : d.gates) {
    doc["gates"].push_back(
        {{"id", g.id}, {"kind", std::string(to_string(g.kind))}, {"out", g.output}, {"in", g.inputs}});
  }
  nlohmann::json carries = nlohmann::json::object();
  for (const auto& c : d.carries) carries[std::to_string(c.bit)] = c.net;
  doc["carry_in_of_bit"] = carries;
  return doc;
}

Netlist netlist_from_json(const nlohmann::json& doc) {
  NetlistDescription d;
  try {
    for (const auto& b : doc.at("inputs")) d.inputs.push_back({b.at("name").get<std::string>(), b.at("width").get<int>(), 0});
    for (const auto& b : doc.at("outputs")) d.outputs.push_back({b.at("name").get<std::string>(), b.at("width").get<int>(), 0});
    if (doc.contains("nets")) {
      for (const auto& n : doc.at("nets")) d.nets.push_back({n.get<std::string>(), 0});
    }
    for (const auto& g : doc.at("gates")) {
      NetlistDescription::GateDecl gd;
      gd.id = g.at("id").get<int>();
      const auto kind = gate_kind_from_string(g.at("kind").get<std::string>());
      if (!kind) throw NetlistError(NetlistErrc::Syntax, "unknown gate kind in JSON netlist");
      gd.kind = *kind;
      gd.output = g.at("out").get<std::string>();
      gd.inputs = g.at("in").get<std::vector<std::string>>();
      d.gates.push_back(std::move(gd));
    }
    if (doc.contains("carry_in_of_bit")) {
      for (const auto& [key, value] : doc.at("carry_in_of_bit").items()) {
        d.carries.push_back({std::stoi(key), value.get<std::string>(), 0});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw NetlistError(NetlistErrc::Syntax, std::string("malformed JSON netlist: ") + e.what());
  } catch (const std::logic_error& e) {
    throw NetlistError(NetlistErrc::Syntax, std::string("malformed JSON netlist: ") + e.what());
  }
  return Netlist::create(d);
}

}  // namespace faultbin
