"""Python access to the faultbin core: netlists, fault partitions, PE-array
fault maps and the command runner."""

import json

from ._faultbin import (
    ArrayError,
    CliError,
    FaultMap,
    LearnError,
    Netlist,
    NetlistError,
    build_fault_map,
    commands,
    error_bound,
    gen,
    matmul,
    max_error,
    parse_netlist,
    systolic_exec,
)
from . import _faultbin

__all__ = [
    "ArrayError",
    "CliError",
    "FaultMap",
    "LearnError",
    "Netlist",
    "NetlistError",
    "build_fault_map",
    "commands",
    "count_macs",
    "error_bound",
    "fsr_from_json",
    "gen",
    "lenet5_spec",
    "matmul",
    "max_error",
    "mlp_spec",
    "parse_netlist",
    "partition",
    "resolve_params",
    "run",
    "systolic_exec",
    "throughput",
]


def partition(netlist, k):
    return json.loads(_faultbin.partition_json(netlist, k))


def throughput(fault_map, steps):
    return json.loads(fault_map.throughput_json(steps))


def fsr_from_json(doc):
    """(FaultMap, chip_id, fr_max_non_crit) from an FSR dict or JSON text."""
    return _faultbin.fsr_from_json(doc if isinstance(doc, str) else json.dumps(doc))


def lenet5_spec():
    return json.loads(_faultbin.lenet5_spec_json())


def mlp_spec(sizes):
    return json.loads(_faultbin.mlp_spec_json(list(sizes)))


def count_macs(spec):
    """(multiplications, additions) of one inference."""
    return _faultbin.count_macs(json.dumps(spec))


def resolve_params(command, **params):
    return json.loads(_faultbin.resolve_params_json(command, json.dumps(params)))


def run(command, out, threads=0, **params):
    """Run a CLI command (e.g. "array build") into `out`; returns the files written."""
    return _faultbin.run_json(command, json.dumps(params), str(out), threads)
