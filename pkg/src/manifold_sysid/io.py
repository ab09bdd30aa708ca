"""JSON datasets and checkpoints, CSV result tables.

Every real array is rendered with 17 significant digits, so a double
survives a save/load cycle bit-exactly and save -> load -> save yields
byte-identical files. Other floats are written with Python's shortest
round-trip ``repr``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archmods.encoder import EncoderConfig, EncoderParams, encoder_layout
from .archmods.layout import ParamLayout
from .archmods.manifold import Manifold, manifold_layout
from .archmods.scaling import Scaling
from .archmods.ssm import SsmConfig, theta_count, theta_layout
from .boucwen import COEFF_NAMES, BoucWenCoeffs, Dataset
from .errors import (CheckpointError, CheckpointKindError, DatasetFormatError, DimensionMismatchError,
                     NonFiniteValueError, SpecError)
from .pipeline.studies import aggregate
from .pipeline.training import FitResult

DATASET_FORMAT = "manifold-sysid/dataset"
CHECKPOINT_FORMAT = "manifold-sysid/checkpoint"
FORMAT_VERSION = 1
SEQUENCES = ("u_tr", "y_tr", "u_te", "y_te")
CHECKPOINT_KINDS = ("theta", "manifold", "encoder")
RESULT_COLUMNS = ("mode", "L", "run", "fit_percent", "rmse", "wall_time_s", "status", "seed")
_PLACEHOLDER = "@@array:{}@@"


def format_real(x: float) -> str:
    return "%.17g" % x


def _render(doc: dict, arrays: dict[str, np.ndarray]) -> str:
    """JSON text of ``doc`` with ``arrays`` spliced in at 17 significant digits."""
    doc = dict(doc)
    for key in arrays:
        doc[key] = _PLACEHOLDER.format(key)
    text = json.dumps(doc, indent=1, allow_nan=False)
    for key, arr in arrays.items():
        body = ", ".join(format_real(v) for v in np.asarray(arr, dtype=float).reshape(-1))
        text = text.replace(json.dumps(_PLACEHOLDER.format(key)), f"[{body}]")
    return text + "\n"


def _plain_float(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _read_json(path, error):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise error(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise error(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise error(f"{path}: top level must be an object")
    return doc


def _numeric_array(values, name, error) -> np.ndarray:
    if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise error(f"{name} must be an array of numbers")
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contains non-finite values")
    return arr


# --------------------------------------------------------------------------
# datasets

def save_dataset(d: Dataset, path, provenance: dict | None = None) -> None:
    """Write ``d`` as a JSON document.

    ``provenance`` (for example the config hash and master seed) is stored
    verbatim in the metadata.
    """
    meta = {
        "fs": float(d.fs),
        "noise_std": float(d.noise_std),
        "coefficients": None if d.coeffs is None else d.coeffs.as_dict(),
        "seed": d.seed,
    }
    if provenance:
        meta["provenance"] = dict(provenance)
    doc = {"format": DATASET_FORMAT, "version": FORMAT_VERSION, "metadata": meta}
    Path(path).write_text(_render(doc, {k: getattr(d, k) for k in SEQUENCES}), encoding="utf-8")


def load_dataset(path) -> Dataset:
    """Read a dataset document and validate it.

    Raises
    ------
    DatasetFormatError
        Malformed or incomplete document.
    DimensionMismatchError
        Paired sequences of different lengths.
    NonFiniteValueError
        NaN or infinite samples.
    """
    doc = _read_json(path, DatasetFormatError)
    if doc.get("format") != DATASET_FORMAT:
        raise DatasetFormatError(f"{path}: not a dataset document")
    meta = doc.get("metadata")
    missing = [k for k in SEQUENCES if k not in doc]
    if not isinstance(meta, dict) or missing:
        raise DatasetFormatError(f"{path}: missing metadata or sequences {missing}")
    arrays = {k: _numeric_array(doc[k], k, DatasetFormatError) for k in SEQUENCES}
    for a, b in (("u_tr", "y_tr"), ("u_te", "y_te")):
        if arrays[a].size != arrays[b].size:
            raise DimensionMismatchError(f"{a} has {arrays[a].size} samples but {b} has {arrays[b].size}")
    fs, noise = meta.get("fs"), meta.get("noise_std", 0.0)
    if not isinstance(fs, (int, float)) or not isinstance(noise, (int, float)):
        raise DatasetFormatError(f"{path}: fs and noise_std must be numbers")
    coeffs = meta.get("coefficients")
    if coeffs is not None:
        if not isinstance(coeffs, dict) or set(coeffs) != set(COEFF_NAMES):
            raise DatasetFormatError(f"{path}: coefficients must name exactly {COEFF_NAMES}")
        try:
            coeffs = BoucWenCoeffs(**{k: float(coeffs[k]) for k in COEFF_NAMES})
        except (TypeError, SpecError) as exc:
            raise DatasetFormatError(f"{path}: invalid coefficients: {exc}") from exc
    seed = meta.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise DatasetFormatError(f"{path}: seed must be an integer or null")
    try:
        return Dataset(**arrays, fs=float(fs), coeffs=coeffs, noise_std=float(noise), seed=seed)
    except (SpecError,) as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


def dataset_provenance(path) -> dict:
    """The provenance block of a stored dataset (empty when absent)."""
    return dict(_read_json(path, DatasetFormatError).get("metadata", {}).get("provenance") or {})


# --------------------------------------------------------------------------
# checkpoints

@dataclass
class Checkpoint:
    """Flat parameters plus everything needed to rebuild their model."""

    kind: str
    config: dict
    layout: ParamLayout
    values: np.ndarray
    scaling: Scaling = field(default_factory=Scaling)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CHECKPOINT_KINDS:
            raise CheckpointError(f"unknown checkpoint kind {self.kind!r}")
        self.values = np.array(self.values, dtype=float).reshape(-1)
        if self.values.size != self.layout.size:
            raise CheckpointError(f"{self.values.size} values for a layout of {self.layout.size}")
        expected = _expected_layout(self.kind, self.config)
        if expected != self.layout:
            raise CheckpointError("stored layout does not match the configured architecture")

    def expect(self, kind: str) -> Checkpoint:
        if self.kind != kind:
            raise CheckpointKindError(f"expected a {kind} checkpoint, got {self.kind}")
        return self

    def to_theta(self) -> tuple[np.ndarray, SsmConfig, Scaling]:
        self.expect("theta")
        return self.values.copy(), SsmConfig(**self.config["ssm"]), self.scaling

    def to_manifold(self) -> Manifold:
        self.expect("manifold")
        return Manifold.from_gamma(self.values, SsmConfig(**self.config["ssm"]), self.config["n_phi"],
                                   self.scaling)

    def to_encoder(self) -> EncoderParams:
        self.expect("encoder")
        return EncoderParams(EncoderConfig(**self.config["encoder"]), self.values)


def _expected_layout(kind, config) -> ParamLayout:
    try:
        if kind == "theta":
            return theta_layout(SsmConfig(**config["ssm"]))
        if kind == "manifold":
            ssm = SsmConfig(**config["ssm"])
            return manifold_layout(theta_count(ssm), int(config["n_phi"]))
        return encoder_layout(EncoderConfig(**config["encoder"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid {kind} config echo: {exc}") from exc


def theta_checkpoint(theta, ssm: SsmConfig, scaling: Scaling = Scaling(), meta: dict | None = None) -> Checkpoint:
    return Checkpoint("theta", {"ssm": ssm.as_dict()}, theta_layout(ssm), theta, scaling, dict(meta or {}))


def manifold_checkpoint(m: Manifold, meta: dict | None = None) -> Checkpoint:
    return Checkpoint("manifold", {"ssm": m.ssm.as_dict(), "n_phi": m.n_phi}, m.layout, m.gamma, m.scaling,
                      dict(meta or {}))


def encoder_checkpoint(psi: EncoderParams, scaling: Scaling = Scaling(), meta: dict | None = None) -> Checkpoint:
    return Checkpoint("encoder", {"encoder": psi.config.as_dict()}, psi.layout, psi.values, scaling,
                      dict(meta or {}))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": FORMAT_VERSION,
        "kind": ckpt.kind,
        "config": ckpt.config,
        "layout": ckpt.layout.to_table(),
        "scaling": ckpt.scaling.as_dict(),
        "meta": {k: _plain_float(v) for k, v in ckpt.meta.items()},
        "n_values": int(ckpt.values.size),
    }
    Path(path).write_text(_render(doc, {"values": ckpt.values}), encoding="utf-8")


def load_checkpoint(path, kind: str | None = None) -> Checkpoint:
    """Read a checkpoint, optionally insisting on its kind.

    Raises
    ------
    CheckpointKindError
        ``kind`` given and the file holds another kind.
    CheckpointError
        Malformed file or parameter count mismatch.
    """
    doc = _read_json(path, CheckpointError)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint document")
    if kind is not None and doc.get("kind") != kind:
        raise CheckpointKindError(f"{path}: expected a {kind} checkpoint, got {doc.get('kind')!r}")
    try:
        layout = ParamLayout.from_table(doc["layout"])
        values = _numeric_array(doc["values"], "values", CheckpointError)
        scaling = Scaling(**doc["scaling"])
        config, meta = doc["config"], doc.get("meta", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NonFiniteValueError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from exc
    if doc.get("n_values", values.size) != values.size:
        raise CheckpointError(f"{path}: declares {doc['n_values']} values but stores {values.size}")
    return Checkpoint(doc.get("kind"), config, layout, values, scaling, meta)


# --------------------------------------------------------------------------
# result tables

def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format_real(x) if math.isfinite(x) else "nan"
    return str(x)


def write_table(path, header, rows, provenance: dict | None = None) -> None:
    """CSV with an optional ``# key=value`` provenance line before the header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if provenance:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([_cell(v) for v in row] for row in rows)


def export_results(
    results: list[FitResult],
    path,
    aggregate_path=None,
    provenance: dict | None = None,
    timing: bool = True,
) -> None:
    """One row per run at ``path``; per-(mode, L) medians and quartiles at ``aggregate_path``.

    With ``timing=False`` the wall-time cells are left empty, which keeps
    the files identical across repeated runs. ``provenance`` entries are
    written as a leading ``# key=value`` comment line.
    """
    rows = [(r.mode, r.L, r.run, r.fit_percent, r.rmse, r.wall_time_s if timing else None, r.status, r.seed)
            for r in results]
    write_table(path, RESULT_COLUMNS, rows, provenance)
    if aggregate_path is not None:
        agg = aggregate(results)
        header = ["mode", "L", "n_runs", "n_failed"] + [
            f"{k}_{q}" for k in ("fit_percent", "rmse", "wall_time_s") for q in ("q25", "median", "q75")]
        if not timing:
            for row in agg:
                for q in ("q25", "median", "q75"):
                    row[f"wall_time_s_{q}"] = None
        write_table(aggregate_path, header, [[row[h] for h in header] for row in agg], provenance)


def read_results(path) -> list[dict]:
    """Rows of a results CSV as dictionaries (comment lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_trace(path, loss, lr=None, provenance: dict | None = None) -> None:
    """Optimizer trace with columns iteration, lr, loss."""
    loss = np.asarray(loss, dtype=float).reshape(-1)
    lr = np.full(loss.size, np.nan) if lr is None else np.asarray(lr, dtype=float).reshape(-1)
    rows = [(i, float(a), float(b)) for i, (a, b) in enumerate(zip(lr, loss))]
    write_table(path, ("iteration", "lr", "loss"), rows, provenance)
