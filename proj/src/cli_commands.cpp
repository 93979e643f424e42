#include "cli_commands.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "faultbin/atpg.hpp"
#include "faultbin/cli.hpp"
#include "faultbin/cones.hpp"
#include "faultbin/experiment.hpp"
#include "faultbin/parallel.hpp"
#include "faultbin/rng.hpp"

namespace faultbin::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void Output::write(const std::string& name, const std::string& content) {
  const fs::path path = dir / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw CliError(kExitIo, "cannot write " + path.string());
  files.push_back(name);
}

namespace {

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CliError(kExitIo, "cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw CliError(kExitParse, path + ": " + e.what());
  }
}

Netlist load_netlist(const std::string& path) {
  if (fs::path(path).extension() == ".json") return netlist_from_json(read_json(path));
  return parse_netlist(read_text(path));
}

ConePartition partition_for(const Netlist& nl, const json& p) {
  std::optional<NetId> carry;
  const auto name = p["carry_net"].get<std::string>();
  if (!name.empty()) {
    carry = nl.find_net(name);
    if (!carry) throw CliError(kExitValidation, "--carry-net: no net named '" + name + "'");
  }
  return partition(nl, p["k"].get<int>(), true, carry);
}

std::vector<GateId> all_gate_ids(const Netlist& nl) {
  std::vector<GateId> ids;
  for (const auto& g : nl.gates()) ids.push_back(g.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<GateId> crit_cells(const ConePartition& part) {
  auto cells = part.g_crit;
  cells.insert(cells.end(), part.g_carryin_leftover.begin(), part.g_carryin_leftover.end());
  std::sort(cells.begin(), cells.end());
  return cells;
}

std::string mnist_dir(const json& p) {
  const auto dir = p["mnist_dir"].get<std::string>();
  return dir.empty() ? mnist_dir_from_env() : dir;
}

Dataset first(const Dataset& d, long limit) {
  return limit > 0 && limit < d.size() ? d.slice(0, static_cast<int>(limit)) : d;
}

ErrorModel error_model(const json& p) {
  try {
    return {error_format_from_string(p["error_format"].get<std::string>()), p["k"].get<int>(),
            error_mode_from_string(p["error_mode"].get<std::string>())};
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitValidation, e.what());
  }
}

TrainOptions train_options(const json& p) {
  TrainOptions o;
  o.epochs = p["epochs"].get<int>();
  o.batch = p["batch"].get<int>();
  o.lr = p["lr"].get<float>();
  o.momentum = p["momentum"].get<float>();
  o.lr_decay = p["lr_decay"].get<float>();
  o.weight_decay = p["weight_decay"].get<float>();
  o.seed = p["seed"].get<std::uint64_t>();
  return o;
}

// Commands.

void cmd_gen(const json& p, Output& out) {
  const auto kind = p["kind"].get<std::string>();
  int width = p["width"].get<int>();
  Netlist nl = [&] {
    if (kind == "mac-int8") return gen_mac_int8();
    if (kind == "bw") return gen_baugh_wooley(width > 0 ? width : 8);
    if (kind == "cla") return gen_cla_adder(width > 0 ? width : 16);
    if (kind == "ripple") return gen_ripple_adder(width > 0 ? width : 8);
    throw CliError(kExitValidation, "unknown generator '" + kind + "' (mac-int8, bw, cla, ripple)");
  }();
  const auto format = p["format"].get<std::string>();
  if (format == "text") {
    out.write("netlist.txt", emit_netlist(nl));
  } else if (format == "json") {
    out.write_json("netlist.json", netlist_to_json(nl));
  } else {
    throw CliError(kExitValidation, "unknown netlist format '" + format + "' (text, json)");
  }
}

void cmd_partition(const json& p, Output& out) {
  const auto nl = load_netlist(p["netlist"].get<std::string>());
  out.write_json("partition.json", partition_to_json(partition_for(nl, p)));
}

void cmd_atpg(const json& p, Output& out) {
  const auto nl = load_netlist(p["netlist"].get<std::string>());
  const auto part = partition_for(nl, p);
  AtpgOptions o;
  o.seed = p["seed"].get<std::uint64_t>();
  o.backtrack_limit = p["backtrack_limit"].get<long>();
  o.compact = p["compact"].get<bool>();
  o.threads = out.threads;
  const auto split = split_pattern_generation(nl, part, o);
  const auto all = generate_patterns(nl, enumerate_all_faults(nl, true), o);

  out.write("patterns_all.hex", patterns_to_text(nl, all));
  out.write("patterns_crit.hex", patterns_to_text(nl, split.crit));
  out.write("patterns_noncrit.hex", patterns_to_text(nl, split.noncrit));
  out.write("faults.csv", faults_to_csv({{"crit", &split.crit}, {"noncrit", &split.noncrit}}));

  json rows = json::array();
  const std::vector<std::tuple<std::string, std::vector<GateId>, const TestSet*>> sets{
      {"all", all_gate_ids(nl), &all}, {"crit", crit_cells(part), &split.crit}, {"noncrit", part.g_noncrit, &split.noncrit}};
  for (const auto& [name, cells, ts] : sets) {
    auto row = coverage_row(name, nl, cells, *ts);
    // Claimed detections re-checked by the serial full-evaluation simulator.
    const auto confirmed = serial_detects(nl, ts->patterns, ts->faults.sites);
    bool agree = true;
    for (std::size_t i = 0; i < ts->faults.size(); ++i) agree &= confirmed[i] == (ts->status[i] == FaultStatus::Detected);
    row["resimulation_agrees"] = agree;
    rows.push_back(row);
  }
  out.write_json("report.json", {{"k", part.k}, {"seed", o.seed}, {"rows", rows}});
}

void cmd_fsim(const json& p, Output& out) {
  const auto nl = load_netlist(p["netlist"].get<std::string>());
  const auto cls = p["class"].get<std::string>();
  TestSet ts;
  ts.patterns = patterns_from_text(nl, read_text(p["patterns"].get<std::string>()));
  std::vector<GateId> cells;
  if (cls == "all") {
    ts.faults = enumerate_all_faults(nl, true);
    cells = all_gate_ids(nl);
  } else if (cls == "crit" || cls == "noncrit") {
    const auto part = partition_for(nl, p);
    ts.faults = cls == "crit" ? part.f_crit : part.f_noncrit;
    cells = cls == "crit" ? crit_cells(part) : part.g_noncrit;
  } else {
    throw CliError(kExitValidation, "unknown fault class '" + cls + "' (all, crit, noncrit)");
  }
  fault_simulate(nl, ts, out.threads);
  out.write("fsim.csv", faults_to_csv({{cls, &ts}}));
  out.write_json("fsim.json", coverage_row(cls, nl, cells, ts));
}

void cmd_maxerr(const json& p, Output& out) {
  const auto nl = load_netlist(p["netlist"].get<std::string>());
  const auto part = partition_for(nl, p);
  const long bound = error_bound(part.k);
  struct Job {
    FaultSite fault;
    bool crit;
  };
  std::vector<Job> jobs;
  for (const auto& f : part.f_noncrit.sites) jobs.push_back({f, false});
  for (const auto& f : part.f_crit.sites) jobs.push_back({f, true});
  std::vector<MaxErrorResult> res(jobs.size());
  parallel_chunks(jobs.size(), out.threads, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      MaxErrorOptions o;
      o.threads = 1;
      o.seed = p["seed"].get<std::uint64_t>();
      o.samples = p["samples"].get<long>();
      o.max_exhaustive_bits = jobs[i].crit ? p["crit_exhaustive_bits"].get<int>() : p["exhaustive_bits"].get<int>();
      res[i] = max_error(nl, jobs[i].fault, o);
    }
  });

  std::ostringstream csv;
  csv << "fault,class,max_error,bound,compliant,exhaustive,support_bits\n";
  long noncrit_max = 0;
  long crit_max = 0;
  long violations = 0;
  long exceeding = 0;
  bool noncrit_exhaustive = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = res[i];
    const bool ok = r.max_error <= bound;
    csv << to_string(jobs[i].fault) << ',' << (jobs[i].crit ? "crit" : "noncrit") << ',' << r.max_error << ',' << bound
        << ',' << (ok ? "true" : "false") << ',' << (r.exhaustive ? "true" : "false") << ',' << r.support_bits << '\n';
    if (jobs[i].crit) {
      crit_max = std::max<long>(crit_max, r.max_error);
      exceeding += !ok;
    } else {
      noncrit_max = std::max<long>(noncrit_max, r.max_error);
      violations += !ok;
      noncrit_exhaustive &= r.exhaustive;
    }
  }
  out.write("maxerr.csv", csv.str());
  out.write_json("maxerr.json", {{"k", part.k},
                                 {"bound", bound},
                                 {"noncrit", {{"faults", part.f_noncrit.size()},
                                              {"max_error", noncrit_max},
                                              {"violations", violations},
                                              {"exhaustive", noncrit_exhaustive}}},
                                 {"crit", {{"faults", part.f_crit.size()},
                                           {"max_error", crit_max},
                                           {"exceeding_bound", exceeding}}}});
}

void cmd_array_build(const json& p, Output& out) {
  const double fr = p["fr"].get<double>();
  const double fr_max = p["fr_max_non_crit"].get<double>();
  FsrFile fsr{build_fault_map(p["rows"].get<int>(), p["cols"].get<int>(), fr, p["seed"].get<std::uint64_t>(),
                              p["crit"].get<double>()),
              p["chip_id"].get<std::string>(), fr_max < 0 ? fr : fr_max};
  out.write_json("fsr.json", fsr_to_json(fsr));
}

void cmd_array_deactivate(const json& p, Output& out) {
  FsrFile fsr = fsr_from_json(read_json(p["fsr"].get<std::string>()));
  const double fr_max = p["fr_max"].get<double>();
  if (fr_max >= 0) fsr.fr_max_non_crit = fr_max;
  fsr.map = deactivate_to_threshold(fsr.map, fsr.fr_max_non_crit);
  out.write_json("fsr.json", fsr_to_json(fsr));
}

void cmd_array_throughput(const json& p, Output& out) {
  const FsrFile fsr = fsr_from_json(read_json(p["fsr"].get<std::string>()));
  long steps = p["steps"].get<long>();
  const auto qpath = p["qmodel"].get<std::string>();
  if (!qpath.empty()) steps = inference_steps(quantized_from_json(read_json(qpath)), fsr.map.rows(), fsr.map.cols());
  if (steps <= 0) throw CliError(kExitValidation, "give --steps > 0 or a --qmodel to derive the workload");
  out.write_json("throughput.json", throughput_to_json(throughput(fsr.map, steps)));
}

void cmd_array_bypass_check(const json& p, Output& out) {
  const int cases = p["cases"].get<int>();
  const int rows_max = p["rows_max"].get<int>();
  const int cols_max = p["cols_max"].get<int>();
  const int dead_max = p["dead_max"].get<int>();
  const int dim_max = p["dim_max"].get<int>();
  if (cases < 1 || rows_max < 2 || cols_max < 2 || dead_max < 1 || dim_max < 1) {
    throw CliError(kExitValidation, "bypass-check sizes must be positive (rows/cols at least 2)");
  }
  const auto seed = p["seed"].get<std::uint64_t>();
  json results = json::array();
  std::vector<json> rows(static_cast<std::size_t>(cases));
  parallel_chunks(rows.size(), out.threads, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t c = b; c < e; ++c) {
      std::mt19937_64 rng(derive_seed(seed, c));
      const int r = 2 + static_cast<int>(bounded(rng, rows_max - 1));
      const int cl = 2 + static_cast<int>(bounded(rng, cols_max - 1));
      const int dead = std::min(1 + static_cast<int>(bounded(rng, dead_max)), r * cl - 1);
      FaultMap map(r, cl, seed);
      std::vector<int> cells(static_cast<std::size_t>(r * cl));
      for (int i = 0; i < r * cl; ++i) cells[i] = i;
      partial_shuffle(cells, rng, dead);
      for (int i = 0; i < dead; ++i) map.set(cells[i] / cl, cells[i] % cl, PeStatus::Deactivated);
      const int k = 1 + static_cast<int>(bounded(rng, dim_max));
      const int n = 1 + static_cast<int>(bounded(rng, dim_max));
      const int m = 1 + static_cast<int>(bounded(rng, 8));
      IntMatrix w(k, n);
      IntMatrix x(m, k);
      for (auto& v : w.data) v = static_cast<std::int32_t>(bounded(rng, 255)) - 127;
      for (auto& v : x.data) v = static_cast<std::int32_t>(bounded(rng, 256)) - 128;
      const auto plan = plan_bypass(w, map);
      const bool exact = systolic_exec(w, x, map, plan, std::nullopt) == matmul(x, w);
      rows[c] = {{"case", c},   {"rows", r}, {"cols", cl}, {"deactivated", dead}, {"k", k}, {"n", n}, {"m", m},
                 {"extra_steps", plan.extra_steps}, {"exact", exact}};
    }
  });
  bool all = true;
  for (auto& row : rows) {
    all &= row["exact"].get<bool>();
    results.push_back(std::move(row));
  }
  out.write_json("bypass_check.json", {{"all_exact", all}, {"cases", results}});
  if (!all) throw CliError(kExitInternal, "bypass execution differs from the dense matmul");
}

void cmd_train(const json& p, Output& out) {
  const auto mnist = load_mnist(mnist_dir(p));
  const auto train_set = first(mnist.train, p["train_limit"].get<long>());
  const auto test_set = first(mnist.test, p["test_limit"].get<long>());
  const auto arch = p["arch"].get<std::string>();
  ModelSpec spec;
  if (arch == "mlp") {
    std::vector<int> sizes{784};
    for (int h : p["hidden"].get<std::vector<int>>()) sizes.push_back(h);
    sizes.push_back(10);
    spec = mlp_spec(sizes);
  } else if (arch == "lenet5") {
    spec = lenet5_spec();
  } else {
    throw CliError(kExitValidation, "unknown architecture '" + arch + "' (mlp, lenet5)");
  }
  const auto opts = train_options(p);
  auto model = train_baseline(train_set, spec, opts);
  const double baseline = accuracy(model, test_set);
  const double fraction = p["prune"].get<double>();
  if (fraction > 0) {
    const auto masks = prune(model, fraction);
    auto retrain = opts;
    retrain.epochs = p["retrain_epochs"].get<int>();
    retrain.lr = p["retrain_lr"].get<float>();
    retrain.masks = &masks;
    train(model, train_set, retrain);
  }
  const int n_calib = std::min(p["calibration"].get<int>(), train_set.size());
  const auto q = quantize(model, train_set.images.topRows(n_calib));
  const auto macs = count_macs(spec);
  out.write_json("model.json", model_to_json(model));
  out.write_json("qmodel.json", quantized_to_json(q));
  out.write_json("train.json", {{"arch", arch},
                                {"train_samples", train_set.size()},
                                {"test_samples", test_set.size()},
                                {"float_accuracy_before_prune", baseline},
                                {"float_accuracy", accuracy(model, test_set)},
                                {"int8_accuracy", quantized_accuracy(q, test_set, nullptr, out.threads)},
                                {"weights", count_weights(model)},
                                {"zero_weights", count_zero_weights(model)},
                                {"multiplications", macs.multiplications},
                                {"additions", macs.additions}});
}

struct FaultTables {
  std::vector<FaultErrorTable> tables;

  explicit FaultTables(const ErrorModel& err) {
    if (err.mode != ErrorMode::PerFaultNetlist) return;
    const auto mac = gen_mac_int8();
    for (const auto& f : partition(mac, err.k).f_noncrit.sites) tables.emplace_back(mac, f);
  }
  const std::vector<FaultErrorTable>* get() const { return tables.empty() ? nullptr : &tables; }
};

void cmd_experiment(const json& p, Output& out) {
  const auto q = quantized_from_json(read_json(p["qmodel"].get<std::string>()));
  const auto test_set = first(load_mnist(mnist_dir(p)).test, p["test_limit"].get<long>());
  SweepConfig cfg;
  cfg.fault_rates = p["rates"].get<std::vector<double>>();
  cfg.trials = p["trials"].get<int>();
  cfg.err = error_model(p);
  cfg.rows = p["rows"].get<int>();
  cfg.cols = p["cols"].get<int>();
  cfg.seed = p["seed"].get<std::uint64_t>();
  cfg.mode = exec_mode_from_string(p["exec_mode"].get<std::string>());
  cfg.fr_max = p["fr_max"].get<double>();
  cfg.threads = out.threads;
  const FaultTables tables(cfg.err);
  cfg.fault_tables = tables.get();
  const auto r = accuracy_sweep(q, test_set, cfg);
  out.write("sweep.csv", sweep_to_csv(r));
  out.write_json("sweep.json", sweep_to_json(r, cfg));
}

void cmd_fault_aware_train(const json& p, Output& out) {
  const auto start = model_from_json(read_json(p["model"].get<std::string>()));
  const auto fsr_path = p["fsr"].get<std::string>();
  FsrFile chip;
  if (fsr_path.empty()) {
    chip.map = build_fault_map(p["rows"].get<int>(), p["cols"].get<int>(), p["fr"].get<double>(),
                               p["map_seed"].get<std::uint64_t>());
    chip.chip_id = p["chip_id"].get<std::string>();
  } else {
    chip = fsr_from_json(read_json(fsr_path));
  }
  const auto mnist = load_mnist(mnist_dir(p));
  const auto train_all = first(mnist.train, p["train_limit"].get<long>());
  const int n_val = p["validation"].get<int>();
  if (n_val < 1 || n_val >= train_all.size()) throw CliError(kExitValidation, "--validation must leave training samples");
  const auto train_set = train_all.slice(0, train_all.size() - n_val);
  const auto validation = train_all.slice(train_all.size() - n_val, train_all.size());
  const auto test_set = first(mnist.test, p["test_limit"].get<long>());

  FaultAwareConfig cfg;
  const double initial = p["initial_fr"].get<double>();
  cfg.initial_fr = initial < 0 ? chip.map.max_column_fault_rate() : initial;
  cfg.acc_threshold = p["threshold"].get<double>();
  cfg.delta_step = p["delta"].get<double>();
  cfg.err = error_model(p);
  cfg.mode = exec_mode_from_string(p["exec_mode"].get<std::string>());
  cfg.train = train_options(p);
  cfg.calibration_samples = p["calibration"].get<int>();
  cfg.threads = out.threads;
  const auto outcome = fault_aware_train(start, train_set, validation, chip.map, cfg);

  // The unmodified model on the same chip and FR_max, for comparison.
  const int n_calib = std::min(cfg.calibration_samples, train_set.size());
  const auto q_start = quantize(start, train_set.images.topRows(n_calib));
  const FaultMap applied = deactivate_to_threshold(chip.map, outcome.fr_max_non_crit);
  const Injection inj{&applied, {cfg.err}, cfg.mode, false};
  json history = json::array();
  for (const auto& [fr, acc] : outcome.history) history.push_back({{"fr_max", fr}, {"acc_train", acc}});

  chip.fr_max_non_crit = outcome.fr_max_non_crit;
  out.write_json("model.json", model_to_json(outcome.model));
  out.write_json("qmodel.json", quantized_to_json(outcome.qmodel));
  out.write_json("fsr.json", fsr_to_json(chip));
  out.write_json("outcome.json", {{"initial_fr", cfg.initial_fr},
                                  {"fr_max_non_crit", outcome.fr_max_non_crit},
                                  {"acc_train", outcome.acc_train},
                                  {"threshold", cfg.acc_threshold},
                                  {"threshold_met", outcome.threshold_met},
                                  {"iterations", outcome.iterations},
                                  {"history", history},
                                  {"test_accuracy_faulty", quantized_accuracy(outcome.qmodel, test_set, &inj, out.threads)},
                                  {"test_accuracy_faulty_unaware", quantized_accuracy(q_start, test_set, &inj, out.threads)},
                                  {"test_accuracy_fault_free", quantized_accuracy(outcome.qmodel, test_set, nullptr, out.threads)}});
}

using K = ParamKind;

std::vector<ParamDef> with(std::vector<ParamDef> a, const std::vector<ParamDef>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<ParamDef> kCone{
    {"netlist", K::Str, nullptr, "netlist file (.json for JSON, text otherwise)"},
    {"k", K::Int, 1, "max non-critical output bit K"},
    {"carry_net", K::Str, "", "net used as carry_in_of_bit[K+1] when the netlist has no annotation"},
};

const std::vector<ParamDef> kData{
    {"mnist_dir", K::Str, "", "MNIST IDX directory (default: $FAULTBIN_MNIST_DIR)"},
    {"train_limit", K::Int, 0, "use the first N training images (0 = all)"},
    {"test_limit", K::Int, 0, "use the first N test images (0 = all)"},
};

const std::vector<ParamDef> kTrain{
    {"epochs", K::Int, 5, "training epochs"},
    {"batch", K::Int, 64, "minibatch size"},
    {"lr", K::Float, 0.05, "SGD learning rate"},
    {"momentum", K::Float, 0.9, "SGD momentum"},
    {"lr_decay", K::Float, 0.7, "learning-rate factor per epoch"},
    {"weight_decay", K::Float, 0.0, "L2 weight decay"},
    {"seed", K::Int, 1, "initialization and shuffling seed"},
    {"calibration", K::Int, 1000, "training images used to calibrate int8 activation scales"},
};

const std::vector<ParamDef> kError{
    {"k", K::Int, 1, "error-model K"},
    {"error_format", K::Str, "int8_mac", "int8_mac or bfloat16_mac_behavioral"},
    {"error_mode", K::Str, "worst_case_signed", "worst_case_signed or per_fault_netlist"},
    {"exec_mode", K::Str, "systolic", "systolic or simd"},
};

}  // namespace

const std::vector<CommandDef>& command_table() {
  static const std::vector<CommandDef> table{
      {"gen", "Generate a structural netlist",
       {{"kind", K::Str, "mac-int8", "mac-int8, bw (Baugh-Wooley multiplier), cla or ripple adder"},
        {"width", K::Int, 0, "operand width (0 = generator default)"},
        {"format", K::Str, "text", "text or json"}},
       cmd_gen},
      {"partition", "Split a netlist's faults into critical and non-critical sets", kCone, cmd_partition},
      {"atpg", "Generate all/critical/non-critical test pattern sets",
       with(kCone, {{"seed", K::Int, 1, "random-phase seed"},
                    {"backtrack_limit", K::Int, 10000, "PODEM backtrack limit per fault"},
                    {"compact", K::Bool, true, "reverse-order pattern compaction"}}),
       cmd_atpg},
      {"fsim", "Fault-simulate a pattern file",
       with(kCone, {{"patterns", K::Str, nullptr, "pattern file written by atpg"},
                    {"class", K::Str, "all", "fault set: all, crit or noncrit"}}),
       cmd_fsim},
      {"maxerr", "Worst-case MAC error of every partitioned fault",
       with(kCone, {{"exhaustive_bits", K::Int, 24, "exhaustive up to this many support bits (non-critical)"},
                    {"crit_exhaustive_bits", K::Int, 16, "same for critical faults; sampled beyond"},
                    {"samples", K::Int, 65536, "samples when not exhaustive"},
                    {"seed", K::Int, 1, "sampling seed"}}),
       cmd_maxerr},
      {"array build", "Draw a fault map and write its FSR file",
       {{"rows", K::Int, 128, "array rows"},
        {"cols", K::Int, 128, "array columns"},
        {"fr", K::Float, 5.0, "non-critical fault rate, percent of each column"},
        {"crit", K::Float, 0.0, "critical fault rate, percent of all PEs"},
        {"seed", K::Int, 1, "map seed"},
        {"chip_id", K::Str, "chip-0", "chip identifier"},
        {"fr_max_non_crit", K::Float, -1.0, "FR_max recorded in the FSR (negative = fr)"}},
       cmd_array_build},
      {"array deactivate", "Deactivate faulty PEs down to FR_max",
       {{"fsr", K::Str, nullptr, "FSR file"}, {"fr_max", K::Float, -1.0, "target rate (negative = the file's)"}},
       cmd_array_deactivate},
      {"array throughput", "Throughput cost of the deactivated PEs",
       {{"fsr", K::Str, nullptr, "FSR file"},
        {"steps", K::Int, 0, "workload steps"},
        {"qmodel", K::Str, "", "quantized model; its tiles give the workload steps"}},
       cmd_array_throughput},
      {"array bypass-check", "Compare bypass execution with the dense matmul on random cases",
       {{"cases", K::Int, 20, "random cases"},
        {"rows_max", K::Int, 32, "largest array rows"},
        {"cols_max", K::Int, 32, "largest array columns"},
        {"dead_max", K::Int, 8, "most deactivated PEs"},
        {"dim_max", K::Int, 80, "largest reduction and output size"},
        {"seed", K::Int, 1, "seed"}},
       cmd_array_bypass_check},
      {"train", "Train, optionally prune, and quantize an MNIST model",
       with(with({{"arch", K::Str, "mlp", "mlp or lenet5"},
                  {"hidden", K::IntList, json::array({256, 256}), "MLP hidden sizes"},
                  {"prune", K::Float, 0.0, "fraction of weights to prune"},
                  {"retrain_epochs", K::Int, 2, "epochs after pruning"},
                  {"retrain_lr", K::Float, 0.01, "learning rate after pruning"}},
                 kTrain),
            kData),
       cmd_train},
      {"experiment", "Accuracy versus fault rate sweep",
       with(with({{"qmodel", K::Str, nullptr, "quantized model"},
                  {"rates", K::FloatList, json::array({0.0, 2.5, 5.0, 7.5, 10.0}), "fault rates, percent"},
                  {"trials", K::Int, 10, "fault maps per rate"},
                  {"rows", K::Int, 128, "array rows"},
                  {"cols", K::Int, 128, "array columns"},
                  {"seed", K::Int, 1, "map seed"},
                  {"fr_max", K::Float, -1.0, "deactivate to this rate first (negative = keep all active)"}},
                 kError),
            kData),
       cmd_experiment},
      {"fault-aware-train", "Fine-tune a model for one chip and find its FR_max",
       with(with(with({{"model", K::Str, nullptr, "float model"},
                       {"fsr", K::Str, "", "chip FSR file (otherwise a map is drawn)"},
                       {"rows", K::Int, 128, "array rows for a drawn map"},
                       {"cols", K::Int, 128, "array columns for a drawn map"},
                       {"fr", K::Float, 7.5, "fault rate of a drawn map"},
                       {"map_seed", K::Int, 1, "seed of a drawn map"},
                       {"chip_id", K::Str, "chip-0", "chip identifier of a drawn map"},
                       {"initial_fr", K::Float, -1.0, "starting FR_max (negative = the map's worst column)"},
                       {"threshold", K::Float, 0.97, "accuracy threshold"},
                       {"delta", K::Float, 2.5, "FR_max step, percent"},
                       {"validation", K::Int, 5000, "last training images held out for Acc_Train"}},
                      kError),
                 kTrain),
            kData),
       cmd_fault_aware_train},
  };
  return table;
}

const CommandDef& find_command(const std::string& name) {
  for (const auto& c : command_table()) {
    if (c.name == name) return c;
  }
  throw CliError(kExitUsage, "unknown command '" + name + "'");
}

}  // namespace faultbin::cli
