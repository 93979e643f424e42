import json

import numpy as np
import pytest

import faultbin as fb


def test_mac_netlist_evaluates():
    mac = fb.gen("mac-int8")
    assert [name for name, _ in mac.input_buses] == ["a", "b", "acc"]
    for a, b, acc in [(3, 5, 7), (-128, -128, 0), (127, -1, 65535)]:
        y = mac.evaluate({"a": a, "b": b, "acc": acc})["y"]
        assert y == (a * b + acc) % (1 << 16)


def test_text_round_trip():
    bw = fb.gen("bw", 4)
    again = fb.parse_netlist(bw.emit())
    assert again.gate_count == bw.gate_count
    assert json.loads(again.to_json()) == json.loads(bw.to_json())


def test_partition_and_bound():
    mac = fb.gen("mac-int8")
    part = fb.partition(mac, 1)
    assert part["f_noncrit"] and part["f_crit"]
    assert not set(part["g_noncrit"]) & set(part["g_crit"])
    assert fb.error_bound(1) == 7
    f = part["f_noncrit"][0]
    err, exhaustive = fb.max_error(mac, f["gate"], f["pin"], f["polarity"])
    assert exhaustive and err <= 7


def test_bad_netlist_raises():
    with pytest.raises(fb.NetlistError):
        fb.parse_netlist("gate 1 and x y\n")


def test_fault_map_and_throughput():
    m = fb.build_fault_map(64, 16, 10.0, seed=3)
    assert m.max_column_fault_rate() == pytest.approx(100.0 * 6 / 64)
    d = m.deactivate(5.0)
    assert d.max_column_fault_rate() <= 5.0
    t = fb.throughput(d, 10)
    assert t["simd_factor"] == pytest.approx(t["n_remaining_pe"] / t["n_total_pe"])
    assert t["systolic_extra_macs"] == t["n_dim_sys_arr"] * t["n_sys_arr_faulty_cols"] * 10
    fsr, chip, fr = fb.fsr_from_json(d.fsr_json("c1", 5.0))
    assert fsr == d and chip == "c1" and fr == 5.0


def test_bypass_matches_numpy():
    rng = np.random.default_rng(0)
    m = fb.FaultMap(8, 8, 1)
    m.set(1, 3, "D")
    m.set(5, 3, "D")
    w = rng.integers(-127, 128, size=(20, 11), dtype=np.int32)
    x = rng.integers(-128, 128, size=(4, 20), dtype=np.int32)
    want = x.astype(np.int64) @ w.astype(np.int64)
    assert np.array_equal(fb.systolic_exec(w, x, m), want)
    assert np.array_equal(fb.matmul(x, w), want)


def test_single_faulty_pe_shifts_its_column():
    m = fb.FaultMap(4, 4, 9)
    m.set(2, 1, "N")
    w = np.ones((4, 4), dtype=np.int32)
    x = np.ones((2, 4), dtype=np.int32)
    diff = fb.systolic_exec(w, x, m, k=1) - fb.matmul(x, w)
    assert set(np.abs(diff[:, 1])) == {7}
    assert not diff[:, [0, 2, 3]].any()


def test_mac_counts():
    assert fb.count_macs(fb.lenet5_spec()) == (416520, 416520)
    assert fb.count_macs(fb.mlp_spec([784, 256, 256, 10]))[0] == 784 * 256 + 256 * 256 + 256 * 10


def test_command_runner(tmp_path):
    assert "array bypass-check" in fb.commands()
    files = fb.run("array bypass-check", tmp_path / "bc", threads=1, cases=5)
    assert "manifest.json" in files
    report = json.loads((tmp_path / "bc" / "bypass_check.json").read_text())
    assert report["all_exact"] and len(report["cases"]) == 5
    assert fb.resolve_params("array build", fr=2.5)["fr"] == 2.5
    with pytest.raises(fb.CliError):
        fb.resolve_params("array build", colour="blue")
