import pathlib

import numpy as np
import pytest

import vdpu

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="module")
def tiny8():
    return vdpu.load_graph(ROOT / "models" / "tiny8.json")


@pytest.fixture(scope="module")
def quantized(tiny8):
    images, _ = vdpu.synthetic_cifar10(20, 3)
    return vdpu.quantize(tiny8, images, batch=10)


def test_graph_metadata(tiny8):
    assert tiny8.input_shape == (1, 3, 32, 32)
    assert tiny8.param_count() == 1594
    assert len(tiny8) == 8
    assert tiny8.ops()["total"] > 0


def test_forward_shape(tiny8):
    images, _ = vdpu.synthetic_cifar10(1, 42)
    out = vdpu.forward(tiny8, images[0])
    assert out.shape == (1, 10, 1, 1)
    assert vdpu.predict(tiny8, images[0]) == int(np.argmax(out))


def test_simulator_matches_reference(quantized):
    target = vdpu.default_target()
    compiled = vdpu.compile(quantized, target)
    assert compiled.subgraph_count == 1
    assert compiled.fingerprint == vdpu.fingerprint(target) == "0xa85f217618051c4a"
    handle = vdpu.load_model(compiled, target)
    images, _ = vdpu.synthetic_cifar10(4, 9)
    for img in images:
        cls, ref = vdpu.qforward(quantized, img)
        sim = vdpu.simulate_frame(handle, img)
        assert sim["class_index"] == cls
        np.testing.assert_array_equal(sim["output"], ref)
        assert sim["cycles"] > 0


def test_fingerprint_gate(quantized):
    compiled = vdpu.compile(quantized, vdpu.default_target())
    other = vdpu.default_target()
    other.clock_mhz = 250.0
    with pytest.raises(vdpu.FingerprintMismatch):
        vdpu.load_model(compiled, other)


def test_resources():
    r = vdpu.estimate_resources(vdpu.default_target())
    assert r["pass"]
    assert [row["used"] for row in r["rows"]] == [1420, 210, 198725, 105845]
    t = vdpu.default_target()
    t.cores = 3
    assert "BRAM" in vdpu.estimate_resources(t)["exceeded"]


def test_target_dict_roundtrip():
    t = vdpu.default_target()
    d = t.to_dict()
    assert d["arch"] == "B4096"
    assert vdpu.Target.from_dict(d).to_dict() == d


def test_scenario_shape():
    rep = vdpu.run_scenario(ROOT / "scenarios" / "thread_fit.json")
    fps = [row["fps"] for row in rep["rows"][:3]]
    assert fps[1] > fps[0] and fps[2] < fps[1]


def test_compare_report():
    rows = [
        {"platform": "cpu", "fps": 175.47, "power_w": 65},
        {"platform": "fpga-2t", "fps": 1021.45, "power_w": 60},
    ]
    rep = vdpu.compare_report(rows, "cpu")
    assert round(rep["rows"][1]["throughput_ratio"], 2) == 5.82


def test_cifar_parse_errors():
    with pytest.raises(vdpu.FormatError):
        vdpu.parse_cifar10(b"\x00" * 3072)
    images, labels = vdpu.parse_cifar10(bytes([3]) + b"\xff" * 3072)
    assert labels.tolist() == [3]
    assert images.shape == (1, 3, 32, 32)
