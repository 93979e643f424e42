#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "faultbin/cli.hpp"
#include "faultbin/cones.hpp"
#include "faultbin/experiment.hpp"

namespace py = pybind11;
using namespace faultbin;
using nlohmann::json;

namespace {

IntMatrix to_int_matrix(const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  IntMatrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

py::array_t<std::int64_t> to_array(const AccMatrix& m) {
  py::array_t<std::int64_t> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

PeStatus status_from_char(char c) {
  switch (c) {
    case 'H': return PeStatus::Healthy;
    case 'N': return PeStatus::NonCriticalFaulty;
    case 'C': return PeStatus::CriticalFaulty;
    case 'D': return PeStatus::Deactivated;
    default: throw std::invalid_argument("status must be one of H, N, C, D");
  }
}

}  // namespace

PYBIND11_MODULE(_faultbin, m) {
  m.doc() = "faultbin core bindings";

  py::register_exception<NetlistError>(m, "NetlistError", PyExc_ValueError);
  py::register_exception<ArrayError>(m, "ArrayError", PyExc_ValueError);
  py::register_exception<LearnError>(m, "LearnError", PyExc_ValueError);
  py::register_exception<CliError>(m, "CliError", PyExc_RuntimeError);

  py::class_<Netlist>(m, "Netlist")
      .def_property_readonly("gate_count", &Netlist::gate_count)
      .def_property_readonly("net_count", &Netlist::net_count)
      .def_property_readonly("input_buses", [](const Netlist& n) {
        std::vector<std::pair<std::string, int>> out;
        for (const auto& b : n.input_buses()) out.emplace_back(b.name, static_cast<int>(b.nets.size()));
        return out;
      })
      .def_property_readonly("output_buses", [](const Netlist& n) {
        std::vector<std::pair<std::string, int>> out;
        for (const auto& b : n.output_buses()) out.emplace_back(b.name, static_cast<int>(b.nets.size()));
        return out;
      })
      .def("evaluate", [](const Netlist& n, const std::map<std::string, std::int64_t>& inputs) {
        BusValues in;
        for (const auto& [name, value] : inputs) {
          const Bus* bus = n.find_input_bus(name);
          if (!bus) throw std::invalid_argument("no input bus '" + name + "'");
          in[name] = BitVec::from_int(static_cast<int>(bus->nets.size()), value);
        }
        std::map<std::string, std::uint64_t> out;
        for (const auto& [name, bits] : eval(n, in)) out[name] = bits.to_uint();
        return out;
      }, "Evaluate with one integer per input bus; outputs are unsigned bus values.")
      .def("emit", &emit_netlist)
      .def("to_json", [](const Netlist& n) { return netlist_to_json(n).dump(); })
      .def("uncollapsed_fault_count", &Netlist::uncollapsed_fault_count);

  m.def("gen", [](const std::string& kind, int width) {
    if (kind == "mac-int8") return gen_mac_int8();
    if (kind == "bw") return gen_baugh_wooley(width > 0 ? width : 8);
    if (kind == "cla") return gen_cla_adder(width > 0 ? width : 16);
    if (kind == "ripple") return gen_ripple_adder(width > 0 ? width : 8);
    throw std::invalid_argument("unknown generator '" + kind + "'");
  }, py::arg("kind"), py::arg("width") = 0);
  m.def("parse_netlist", [](const std::string& text) { return parse_netlist(text); });
  m.def("partition_json", [](const Netlist& n, int k) { return partition_to_json(partition(n, k)).dump(); });
  m.def("error_bound", &error_bound);
  m.def("max_error", [](const Netlist& n, int gate, const std::string& pin, const std::string& polarity) {
    if (polarity != "SA0" && polarity != "SA1") throw std::invalid_argument("polarity must be SA0 or SA1");
    const FaultSite f{gate, pin_from_label(pin), polarity == "SA0" ? StuckAt::SA0 : StuckAt::SA1};
    check_fault(n, f);
    const auto r = max_error(n, f);
    return py::make_tuple(r.max_error, r.exhaustive);
  }, py::arg("netlist"), py::arg("gate"), py::arg("pin"), py::arg("polarity"));

  py::class_<FaultMap>(m, "FaultMap")
      .def(py::init<int, int, std::uint64_t>(), py::arg("rows"), py::arg("cols"), py::arg("seed") = 0)
      .def_property_readonly("rows", &FaultMap::rows)
      .def_property_readonly("cols", &FaultMap::cols)
      .def("status", [](const FaultMap& f, int r, int c) { return std::string(1, status_code(f.at(r, c))); })
      .def("set", [](FaultMap& f, int r, int c, const std::string& s) {
        if (s.size() != 1) throw std::invalid_argument("status must be one character");
        f.set(r, c, status_from_char(s[0]));
      })
      .def("count", [](const FaultMap& f, const std::string& s) {
        if (s.size() != 1) throw std::invalid_argument("status must be one character");
        return f.count(status_from_char(s[0]));
      })
      .def("column_fault_rate", &FaultMap::column_fault_rate)
      .def("max_column_fault_rate", &FaultMap::max_column_fault_rate)
      .def("deactivate", [](const FaultMap& f, double fr_max) { return deactivate_to_threshold(f, fr_max); })
      .def("throughput_json", [](const FaultMap& f, long steps) { return throughput_to_json(throughput(f, steps)).dump(); })
      .def("fsr_json", [](const FaultMap& f, const std::string& chip, double fr_max) {
        return fsr_to_json({f, chip, fr_max}).dump();
      }, py::arg("chip_id"), py::arg("fr_max_non_crit"))
      .def("__eq__", [](const FaultMap& a, const FaultMap& b) { return a == b; });

  m.def("build_fault_map", &build_fault_map, py::arg("rows"), py::arg("cols"), py::arg("fr"), py::arg("seed"),
        py::arg("crit") = 0.0);
  m.def("fsr_from_json", [](const std::string& text) {
    const auto f = fsr_from_json(json::parse(text));
    return py::make_tuple(f.map, f.chip_id, f.fr_max_non_crit);
  });

  m.def("matmul", [](const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& x,
                     const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& w) {
    return to_array(matmul(to_int_matrix(x), to_int_matrix(w)));
  });
  m.def("systolic_exec", [](const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& w,
                            const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& x,
                            const FaultMap& map, int k) {
    const auto wm = to_int_matrix(w);
    std::optional<ArrayErrorModel> err;
    if (k >= 0) err = ArrayErrorModel{{ErrorFormat::Int8Mac, k, ErrorMode::WorstCaseSigned}};
    return to_array(systolic_exec(wm, to_int_matrix(x), map, plan_bypass(wm, map), err));
  }, py::arg("weights"), py::arg("activations"), py::arg("map"), py::arg("k") = -1,
     "Systolic execution with bypass; k >= 0 injects worst-case errors of that K.");

  m.def("count_macs", [](const std::string& spec) {
    const auto c = count_macs(spec_from_json(json::parse(spec)));
    return py::make_tuple(c.multiplications, c.additions);
  });
  m.def("lenet5_spec_json", [] { return spec_to_json(lenet5_spec()).dump(); });
  m.def("mlp_spec_json", [](const std::vector<int>& sizes) { return spec_to_json(mlp_spec(sizes)).dump(); });

  m.def("commands", &command_names);
  m.def("resolve_params_json", [](const std::string& command, const std::string& params) {
    return resolve_params(command, json::parse(params)).dump();
  });
  m.def("run_json", [](const std::string& command, const std::string& params, const std::string& out, int threads) {
    py::gil_scoped_release release;
    return execute({command, resolve_params(command, json::parse(params))}, out, threads);
  });
}
