import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdrbm import io
from bdrbm.ffnn import FfnnModel
from bdrbm.pca import fit_pca
from bdrbm.pipeline import BdrbmModel, TomographyConfig, collect_simulated
from bdrbm.quantum import LocalBasis, MeasurementRecord, PureState, TfimParams, tfim_ground_state
from bdrbm.rbm import n_params


def random_model(seed, hidden=(), pca_k=None):
    rng = np.random.default_rng(seed)
    n, nh = 2, 3
    d = n_params(n, nh)
    pca = fit_pca(rng.normal(size=(20, d)), pca_k) if pca_k else None
    out = pca_k or d
    ffnn = FfnnModel.random(3 * n, out, hidden, rng)
    ffnn = ffnn.with_arrays([a + rng.normal(size=a.shape) / 3 for a in ffnn.arrays()])
    return BdrbmModel(ffnn, n, nh, pca)


def test_state_round_trip(tmp_path):
    state, energy = tfim_ground_state(TfimParams(4, 1.0, 0.7))
    path = tmp_path / "s.json"
    io.save_state(path, state, energy, {"model": "tfim"})
    again = io.load_state(path)
    np.testing.assert_array_equal(again.amplitudes, state.amplitudes)
    io.save_state(tmp_path / "t.json", again, energy, {"model": "tfim"})
    assert path.read_bytes() == (tmp_path / "t.json").read_bytes()


def test_complex_state_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    state = PureState.from_amplitudes(rng.normal(size=8) + 1j * rng.normal(size=8))
    io.save_state(tmp_path / "s.json", state)
    np.testing.assert_array_equal(io.load_state(tmp_path / "s.json").amplitudes, state.amplitudes)


def test_measurement_round_trip(tmp_path):
    state = tfim_ground_state(TfimParams(3, 1.0, 1.0))[0]
    records = collect_simulated(state, 5, 300, 0)
    prov = {"source": "simulated", "seed": 0}
    io.save_measurements(tmp_path / "m.json", records, prov)
    loaded, prov2 = io.load_measurements(tmp_path / "m.json")
    assert prov2 == prov
    assert [r.counts for r in loaded] == [r.counts for r in records]
    for a, b in zip(loaded, records):
        np.testing.assert_array_equal(a.basis.axes, b.basis.axes)
    io.save_measurements(tmp_path / "n.json", loaded, prov2)
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "n.json").read_bytes()


def test_external_records_keep_lower_hemisphere(tmp_path):
    rec = MeasurementRecord(LocalBasis([[0, 0, -1]]), {"1": 4, "0": 1})
    io.save_measurements(tmp_path / "m.json", [rec], {"source": "external"})
    loaded, _ = io.load_measurements(tmp_path / "m.json")
    assert loaded[0].basis.axes[0, 2] == -1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([(), (4,), (5, 3)]), st.sampled_from([None, 4]))
def test_model_round_trip_is_byte_exact(tmp_path_factory, seed, hidden, pca_k):
    tmp = tmp_path_factory.mktemp("m")
    model = random_model(seed, hidden, pca_k)
    cfg = TomographyConfig(pca=pca_k, hidden_layers=hidden).to_dict()
    io.save_model(tmp / "a.json", model, cfg, {"losses": [0.1, 1 / 3]})
    loaded = io.load_model(tmp / "a.json")
    np.testing.assert_array_equal(loaded.ffnn.params(), model.ffnn.params())
    if pca_k:
        np.testing.assert_array_equal(loaded.pca.components, model.pca.components)
    io.save_model(tmp / "b.json", loaded)
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()
    assert TomographyConfig.from_dict(loaded.metadata["config"]) == TomographyConfig.from_dict(cfg)


def test_model_metadata_defaults(tmp_path):
    model = random_model(0)
    model.metadata["config"] = {"a": 1}
    io.save_model(tmp_path / "m.json", model)
    assert json.loads((tmp_path / "m.json").read_text())["config"] == {"a": 1}


@pytest.mark.parametrize("mutate,fragment", [
    (lambda d: d.update(schema="bdrbm.measurements/9"), "schema"),
    (lambda d: d["records"][0].update(shots=0), "records/0/shots"),
    (lambda d: d["records"][0]["counts"].update({"2x": 1}), "records/0/counts"),
    (lambda d: d["provenance"].update(source="device"), "provenance/source"),
])
def test_measurement_schema_errors(tmp_path, mutate, fragment):
    rec = MeasurementRecord(LocalBasis.computational(2), {"00": 3})
    io.save_measurements(tmp_path / "m.json", [rec], {"source": "simulated"})
    d = json.loads((tmp_path / "m.json").read_text())
    mutate(d)
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(io.FileFormatError, match=fragment):
        io.load_measurements(tmp_path / "m.json")


def test_measurement_consistency_errors(tmp_path):
    rec = MeasurementRecord(LocalBasis.computational(2), {"00": 3})
    io.save_measurements(tmp_path / "m.json", [rec], {"source": "simulated"})
    d = json.loads((tmp_path / "m.json").read_text())
    d["records"][0]["shots"] = 5
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(io.FileFormatError, match="record 0"):
        io.load_measurements(tmp_path / "m.json")
    d["records"] = []
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(io.FileFormatError):
        io.load_measurements(tmp_path / "m.json")


def test_unnormalized_state_rejected(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps(
        {"schema": io.STATE_SCHEMA_ID, "n_qubits": 1, "amplitudes": {"real": [1, 1], "imag": [0, 0]}}))
    with pytest.raises(io.FileFormatError):
        io.load_state(tmp_path / "s.json")


def test_inconsistent_model_rejected(tmp_path):
    io.save_model(tmp_path / "m.json", random_model(0))
    d = json.loads((tmp_path / "m.json").read_text())
    d["n_hidden"] = 4
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(io.FileFormatError):
        io.load_model(tmp_path / "m.json")


def test_not_json(tmp_path):
    (tmp_path / "x.json").write_text("{")
    with pytest.raises(io.FileFormatError, match="not valid JSON"):
        io.load_model(tmp_path / "x.json")


def test_floats_round_trip_exactly():
    values = [0.1, 1 / 3, np.nextafter(1.0, 2.0), 1e-300, -2.5e17]
    assert json.loads(io.dumps({"v": np.array(values)}))["v"] == values
