#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace faultbin::cli {

enum class ParamKind { Int, Float, Str, Bool, FloatList, IntList };

struct ParamDef {
  std::string name;  // JSON key; the flag is --name with '_' as '-'
  ParamKind kind;
  nlohmann::json def;  // null marks a required parameter
  std::string help;
};

struct Output {
  std::filesystem::path dir;
  int threads = 0;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& doc) { write(name, doc.dump(2) + "\n"); }
};

using Handler = void (*)(const nlohmann::json& params, Output& out);

struct CommandDef {
  std::string name;
  std::string help;
  std::vector<ParamDef> params;
  Handler run;
};

const std::vector<CommandDef>& command_table();
const CommandDef& find_command(const std::string& name);

}  // namespace faultbin::cli
