#include "faultbin/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <list>
#include <map>

#include "CLI11.hpp"
#include "cli_commands.hpp"
#include "faultbin/dataset.hpp"
#include "faultbin/netlist.hpp"
#include "faultbin/parallel.hpp"

namespace faultbin {

namespace fs = std::filesystem;
using nlohmann::json;
using cli::ParamKind;

namespace {

std::string flag_name(std::string name) {
  for (auto& ch : name) {
    if (ch == '_') ch = '-';
  }
  return "--" + name;
}

json check_value(const cli::ParamDef& def, const json& v) {
  const auto bad = [&](const char* want) {
    return CliError(kExitValidation, "parameter '" + def.name + "' must be " + want + ", got " + v.dump());
  };
  switch (def.kind) {
    case ParamKind::Int:
      if (!v.is_number_integer()) throw bad("an integer");
      return v.get<std::int64_t>();
    case ParamKind::Float:
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    case ParamKind::Str:
      if (!v.is_string()) throw bad("a string");
      return v;
    case ParamKind::Bool:
      if (!v.is_boolean()) throw bad("a boolean");
      return v;
    case ParamKind::FloatList: {
      if (!v.is_array()) throw bad("a list of numbers");
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number()) throw bad("a list of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
    case ParamKind::IntList: {
      if (!v.is_array()) throw bad("a list of integers");
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw bad("a list of integers");
        out.push_back(e.get<std::int64_t>());
      }
      return out;
    }
  }
  return v;
}

json parse_flag(const cli::ParamDef& def, const std::string& text) {
  const auto bad = [&] { return CliError(kExitUsage, flag_name(def.name) + ": cannot use '" + text + "'"); };
  const auto number = [&](const std::string& s, bool integer) -> json {
    std::size_t used = 0;
    try {
      json v = integer ? json(std::stoll(s, &used)) : json(std::stod(s, &used));
      if (used != s.size()) throw bad();
      return v;
    } catch (const std::logic_error&) {
      throw bad();
    }
  };
  const auto list = [&](bool integer) {
    json out = json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const auto end = comma == std::string::npos ? text.size() : comma;
      out.push_back(number(text.substr(start, end - start), integer));
      start = end + 1;
    }
    return out;
  };
  switch (def.kind) {
    case ParamKind::Int:
      return number(text, true);
    case ParamKind::Float:
      return number(text, false);
    case ParamKind::Str:
      return text;
    case ParamKind::Bool:
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw bad();
    case ParamKind::FloatList:
      return list(false);
    case ParamKind::IntList:
      return list(true);
  }
  throw bad();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError(kExitIo, "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw CliError(kExitParse, path + ": " + e.what());
  }
}

int report(ExitCode code, const std::string& message) {
  std::cerr << "faultbin: error: " << message << "\n";
  return code;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const CliError& e) {
    return report(e.code(), e.what());
  } catch (const NetlistError& e) {
    return report(e.code() == NetlistErrc::Syntax ? kExitParse : kExitValidation, e.what());
  } catch (const DatasetError& e) {
    return report(kExitIo, e.what());
  } catch (const json::exception& e) {
    return report(kExitParse, std::string("malformed input: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return report(kExitIo, e.what());
  } catch (const std::invalid_argument& e) {
    return report(kExitValidation, e.what());
  } catch (const std::runtime_error& e) {
    // Module errors (array, learn) reject the given inputs.
    return report(kExitValidation, e.what());
  } catch (const std::exception& e) {
    return report(kExitInternal, e.what());
  }
}

}  // namespace

nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"format", "faultbin-run"}, {"version", 1}, {"command", m.command}, {"params", m.params}};
}

RunManifest manifest_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "faultbin-run") {
    throw CliError(kExitParse, "not a faultbin run manifest");
  }
  if (doc.value("version", 0) != 1) throw CliError(kExitParse, "unsupported manifest version");
  if (!doc.contains("command") || !doc["command"].is_string()) throw CliError(kExitParse, "manifest has no command");
  RunManifest m;
  m.command = doc["command"].get<std::string>();
  m.params = resolve_params(m.command, doc.value("params", json::object()));
  return m;
}

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& c : cli::command_table()) out.push_back(c.name);
  return out;
}

nlohmann::json resolve_params(const std::string& command, const nlohmann::json& overrides) {
  const auto& def = cli::find_command(command);
  if (!overrides.is_object()) throw CliError(kExitValidation, "parameters must be a JSON object");
  json params = json::object();
  for (const auto& p : def.params) params[p.name] = p.def.is_null() ? p.def : check_value(p, p.def);
  for (const auto& [key, value] : overrides.items()) {
    const auto it = std::find_if(def.params.begin(), def.params.end(), [&](const auto& p) { return p.name == key; });
    if (it == def.params.end()) throw CliError(kExitValidation, "unknown parameter '" + key + "' for " + command);
    params[key] = check_value(*it, value);
  }
  for (const auto& p : def.params) {
    if (params[p.name].is_null()) throw CliError(kExitUsage, command + ": " + flag_name(p.name) + " is required");
  }
  return params;
}

std::vector<std::string> execute(const RunManifest& m, const fs::path& out, int threads) {
  const auto& def = cli::find_command(m.command);
  const json params = resolve_params(m.command, m.params);
  fs::create_directories(out);
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  cli::Output o{out, resolve_threads(threads), {}};
  def.run(params, o);
  o.write_json("manifest.json", manifest_to_json({m.command, params}));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream log(out / "run.log");
  log << "command " << m.command << "\nthreads " << o.threads << "\nstarted " << started << "\nfinished " << utc_now()
      << "\nelapsed_s " << secs << "\n";
  return o.files;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Fault-aware yield binning: netlist fault analysis, PE-array fault maps and fault-injected inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "faultbin 0.1.0");

  struct Bound {
    const cli::CommandDef* def = nullptr;
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::string config;
    std::string out = "out";
    int threads = 0;
  };
  std::list<Bound> bound;
  std::map<std::string, CLI::App*> groups;

  const auto add_common = [](CLI::App* sub, std::string& out, int& threads) {
    sub->add_option("--out,-o", out, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (0 = all cores); results do not depend on it")
        ->check(CLI::NonNegativeNumber);
  };

  for (const auto& def : cli::command_table()) {
    CLI::App* parent = &app;
    std::string leaf = def.name;
    if (const auto space = def.name.find(' '); space != std::string::npos) {
      const auto group = def.name.substr(0, space);
      leaf = def.name.substr(space + 1);
      auto& g = groups[group];
      if (!g) {
        g = app.add_subcommand(group, "Fault maps, FSR files and PE-array checks");
        g->require_subcommand(1);
      }
      parent = g;
    }
    auto& b = bound.emplace_back();
    b.def = &def;
    b.sub = parent->add_subcommand(leaf, def.help);
    b.sub->add_option("--config", b.config, "JSON file of parameters; flags override it");
    add_common(b.sub, b.out, b.threads);
    for (const auto& p : def.params) {
      std::string help = p.help;
      if (p.def.is_null()) {
        help += " (required)";
      } else {
        help += " [" + (p.def.is_string() ? p.def.get<std::string>() : p.def.dump()) + "]";
      }
      b.options[p.name] = b.sub->add_option(flag_name(p.name), b.values[p.name], help);
    }
  }

  std::string manifest_path;
  std::string run_out = "out";
  int run_threads = 0;
  auto* run = app.add_subcommand("run", "Re-execute a run manifest");
  run->add_option("manifest", manifest_path, "manifest.json written by an earlier run")->required();
  add_common(run, run_out, run_threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  return guarded([&] {
    RunManifest m;
    fs::path out;
    int threads = 0;
    if (run->parsed()) {
      m = manifest_from_json(read_json_file(manifest_path));
      out = run_out;
      threads = run_threads;
    } else {
      const auto it = std::find_if(bound.begin(), bound.end(), [](const Bound& b) { return b.sub->parsed(); });
      if (it == bound.end()) throw CliError(kExitUsage, "no command given");
      json overrides = json::object();
      if (!it->config.empty()) {
        overrides = read_json_file(it->config);
        if (!overrides.is_object()) throw CliError(kExitValidation, it->config + ": expected a JSON object");
      }
      for (const auto& p : it->def->params) {
        if (it->options[p.name]->count() > 0) overrides[p.name] = parse_flag(p, it->values[p.name]);
      }
      m = {it->def->name, resolve_params(it->def->name, overrides)};
      out = it->out;
      threads = it->threads;
    }
    const auto files = execute(m, out, threads);
    for (const auto& f : files) std::cout << (out / f).string() << "\n";
  });
}

}  // namespace faultbin
