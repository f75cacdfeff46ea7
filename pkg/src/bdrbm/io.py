"""Versioned JSON file formats for states, measurements and models.

All writers emit canonical JSON (sorted keys, shortest round-trip float
repr), so a load/save cycle reproduces the original bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .ffnn import FfnnModel, Layer
from .pca import PcaTransform
from .pipeline import BdrbmModel
from .quantum import LocalBasis, MeasurementRecord, PureState

STATE_SCHEMA_ID = "bdrbm.state/1"
MEASUREMENT_SCHEMA_ID = "bdrbm.measurements/1"
MODEL_SCHEMA_ID = "bdrbm.model/1"


class FileFormatError(ValueError):
    """A file does not match its schema or is internally inconsistent."""


_number_list = {"type": "array", "items": {"type": "number"}}
_matrix = {"type": "array", "items": _number_list}

STATE_SCHEMA = {
    "type": "object",
    "required": ["schema", "n_qubits", "amplitudes"],
    "properties": {
        "schema": {"const": STATE_SCHEMA_ID},
        "n_qubits": {"type": "integer", "minimum": 1},
        "amplitudes": {
            "type": "object", "required": ["real", "imag"],
            "properties": {"real": _number_list, "imag": _number_list},
        },
        "energy": {"type": "number"},
        "description": {"type": "object"},
    },
}

MEASUREMENT_SCHEMA = {
    "type": "object",
    "required": ["schema", "n_qubits", "records", "provenance"],
    "properties": {
        "schema": {"const": MEASUREMENT_SCHEMA_ID},
        "n_qubits": {"type": "integer", "minimum": 1},
        "provenance": {
            "type": "object", "required": ["source"],
            "properties": {"source": {"enum": ["simulated", "external"]}},
        },
        "records": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["basis", "shots", "counts"],
                "properties": {
                    "basis": {"type": "array", "items": {
                        "type": "array", "items": {"type": "number"},
                        "minItems": 3, "maxItems": 3}},
                    "shots": {"type": "integer", "minimum": 1},
                    "counts": {"type": "object",
                               "patternProperties": {"^[01]+$": {"type": "integer", "minimum": 0}},
                               "additionalProperties": False},
                },
            },
        },
    },
}

_layer = {
    "type": "object", "required": ["weights", "bias", "activation"],
    "properties": {"weights": _matrix, "bias": _number_list,
                   "activation": {"enum": ["leaky_relu", "identity"]}},
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["schema", "n_qubits", "n_hidden", "ffnn", "pca", "config", "metrics"],
    "properties": {
        "schema": {"const": MODEL_SCHEMA_ID},
        "n_qubits": {"type": "integer", "minimum": 1},
        "n_hidden": {"type": "integer", "minimum": 1},
        "ffnn": {
            "type": "object", "required": ["layers", "out_weights", "out_offset"],
            "properties": {"layers": {"type": "array", "items": _layer},
                           "out_weights": _matrix, "out_offset": _number_list},
        },
        "pca": {"oneOf": [
            {"type": "null"},
            {"type": "object",
             "required": ["mean", "components", "explained_variance", "total_variance"],
             "properties": {"mean": _number_list, "components": _matrix,
                            "explained_variance": _number_list,
                            "total_variance": {"type": "number"}}},
        ]},
        "config": {"type": "object"},
        "metrics": {"type": "object"},
    },
}


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path, schema: dict) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FileFormatError(f"{path}: schema error at {where}: {exc.message}") from exc
    return data


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def state_to_dict(state: PureState, energy: float | None = None,
                  description: dict | None = None) -> dict:
    d = {"schema": STATE_SCHEMA_ID, "n_qubits": state.n_qubits,
         "amplitudes": {"real": state.amplitudes.real, "imag": state.amplitudes.imag}}
    if energy is not None:
        d["energy"] = float(energy)
    if description:
        d["description"] = description
    return d


def save_state(path, state: PureState, energy: float | None = None,
               description: dict | None = None) -> None:
    write_json(path, state_to_dict(state, energy, description))


def load_state(path) -> PureState:
    d = read_json(path, STATE_SCHEMA)
    amps = np.array(d["amplitudes"]["real"]) + 1j * np.array(d["amplitudes"]["imag"])
    try:
        return PureState(d["n_qubits"], amps)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------

def measurements_to_dict(records, provenance: dict) -> dict:
    if not records:
        raise ValueError("no records to write")
    return {
        "schema": MEASUREMENT_SCHEMA_ID,
        "n_qubits": records[0].n_qubits,
        "provenance": provenance,
        "records": [{"basis": r.basis.axes, "shots": r.shots, "counts": dict(r.counts)}
                    for r in records],
    }


def save_measurements(path, records, provenance: dict) -> None:
    write_json(path, measurements_to_dict(records, provenance))


def load_measurements(path) -> tuple[list[MeasurementRecord], dict]:
    """Records (bases exactly as stored) and the provenance block."""
    d = read_json(path, MEASUREMENT_SCHEMA)
    n = d["n_qubits"]
    records = []
    for i, rec in enumerate(d["records"]):
        try:
            if len(rec["basis"]) != n:
                raise ValueError(f"basis has {len(rec['basis'])} axes, expected {n}")
            records.append(MeasurementRecord(LocalBasis(rec["basis"]), rec["counts"], rec["shots"]))
        except ValueError as exc:
            raise FileFormatError(f"{path}: record {i}: {exc}") from exc
    if not records:
        raise FileFormatError(f"{path}: file contains no records")
    return records, d["provenance"]


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def model_to_dict(model: BdrbmModel, config: dict | None = None,
                  metrics: dict | None = None) -> dict:
    f = model.ffnn
    pca = None
    if model.pca is not None:
        p = model.pca
        pca = {"mean": p.mean, "components": p.components,
               "explained_variance": p.explained_variance, "total_variance": p.total_variance}
    return {
        "schema": MODEL_SCHEMA_ID,
        "n_qubits": model.n_qubits,
        "n_hidden": model.n_hidden,
        "ffnn": {"layers": [{"weights": l.weights, "bias": l.bias, "activation": l.activation}
                            for l in f.layers],
                 "out_weights": f.out_weights, "out_offset": f.out_offset},
        "pca": pca,
        "config": config if config is not None else model.metadata.get("config", {}),
        "metrics": metrics if metrics is not None else model.metadata.get("metrics", {}),
    }


def save_model(path, model: BdrbmModel, config: dict | None = None,
               metrics: dict | None = None) -> None:
    write_json(path, model_to_dict(model, config, metrics))


def _matrix_of(rows, n_cols: int) -> np.ndarray:
    return np.array(rows, dtype=float).reshape(len(rows), n_cols)


def model_from_dict(d: dict) -> BdrbmModel:
    f = d["ffnn"]
    width = 3 * d["n_qubits"]
    layers = []
    for l in f["layers"]:
        w = _matrix_of(l["weights"], width)
        layers.append(Layer(w, l["bias"], l["activation"]))
        width = w.shape[0]
    ffnn = FfnnModel(_matrix_of(f["out_weights"], width), f["out_offset"], tuple(layers))
    pca = None
    if d["pca"] is not None:
        p = d["pca"]
        mean = np.array(p["mean"], dtype=float)
        pca = PcaTransform(mean, _matrix_of(p["components"], mean.size),
                           np.array(p["explained_variance"], dtype=float), float(p["total_variance"]))
    return BdrbmModel(ffnn, d["n_qubits"], d["n_hidden"], pca,
                      {"config": d["config"], "metrics": d["metrics"]})


def load_model(path) -> BdrbmModel:
    d = read_json(path, MODEL_SCHEMA)
    try:
        return model_from_dict(d)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
