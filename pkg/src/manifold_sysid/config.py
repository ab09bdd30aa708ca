"""Declarative run configuration: schema, presets and conversion to typed configs.

A run document is merged over its preset (``desk`` by default) and
validated against :data:`SCHEMA` before anything is computed. Unknown keys
are rejected at every level.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .archmods.scaling import Scaling
from .archmods.ssm import SsmConfig
from .boucwen import CoeffRanges
from .errors import ConfigError, SpecError
from .hashing import config_hash
from .optim import AdamConfig, LbfgsConfig
from .pipeline.meta import MetaTrainConfig
from .pipeline.studies import MODES, DEFAULT_LENGTHS, McStudyConfig
from .pipeline.training import FullTrainConfig, ReducedTrainConfig
from .signals import MultisineSpec

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_INT0 = {"type": "integer", "minimum": 0}
_SKIP = {"type": ["integer", "null"], "minimum": 0}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


_ADAM = _obj({
    "lr_init": _POS, "lr_final": _POS, "beta1": _NONNEG, "beta2": _NONNEG, "eps": _POS,
    "weight_decay": _NONNEG, "total_iters": _INT0, "schedule": {"enum": ["constant", "cosine"]},
})
_LBFGS = _obj({
    "memory": {"type": ["integer", "null"], "minimum": 1}, "max_iters": _INT0, "c1": _POS, "c2": _POS,
    "grad_tol": _NONNEG, "max_ls_evals": _INT1, "refine": {"type": "boolean"}, "refine_tol": _NONNEG,
})
_RANGES = {"oneOf": [
    {"enum": ["nominal", "broad"]},
    _obj({"around_nominal": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}}),
    {"type": "object", "additionalProperties": {
        "type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}, "minProperties": 1},
]}

SCHEMA = _obj({
    "preset": {"enum": ["desk", "reference"]},
    "seed": _INT0,
    "out": {"type": "string"},
    "threads": {"type": ["integer", "null"], "minimum": 1},
    "ssm": _obj({"n_x": _INT1, "n_u": _INT1, "n_y": _INT1, "hidden_f": _INT1, "hidden_g": _INT1}),
    "scaling": _obj({"u_scale": _POS, "y_scale": _POS}),
    "excitation": _obj({"fs": _POS, "f_lo": _POS, "f_hi": _POS, "rms": _POS}),
    "data": _obj({
        "n_train": _INT1, "n_test": _INT1, "noise_std": _NONNEG, "substeps": _INT1, "coefficients": _RANGES,
    }),
    "full": _obj({"adam": _ADAM, "lbfgs": _LBFGS, "rho": _NONNEG, "n_skip": _SKIP, "init_output_gain": _NONNEG}),
    "reduced": _obj({"adam": _ADAM, "n_skip": _SKIP}),
    "meta": _obj({
        "n_phi": _INT1, "encoder_hidden": _INT1, "head_hidden": _INT1, "batch_size": _INT1, "seq_len": _INT1,
        "n_skip": _SKIP, "adam": _ADAM, "ranges": _RANGES, "noise_std": _NONNEG, "substeps": _INT1,
        "pool_size": {"type": ["integer", "null"], "minimum": 1},
        "input_seed": {"type": ["integer", "null"], "minimum": 0}, "init_output_gain": _NONNEG,
    }),
    "mc": _obj({
        "lengths": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "runs": _INT1, "modes": {"type": "array", "items": {"enum": list(MODES)}, "minItems": 1, "uniqueItems": True},
        "long_length": _INT1, "test_length": _INT1, "noise_std": _NONNEG, "substeps": _INT1,
    }),
    "hessian": _obj({"h": _POS}),
})

_COMMON = {
    "seed": 0,
    "threads": None,
    "scaling": {"u_scale": 50.0, "y_scale": 1000.0},
    "excitation": {"fs": 750.0, "f_lo": 5.0, "f_hi": 150.0, "rms": 50.0},
    "data": {"n_train": 40960, "n_test": 8192, "noise_std": 8e-6, "substeps": 10, "coefficients": "nominal"},
    "hessian": {"h": 1e-4},
}

PRESETS = {
    "reference": {
        **copy.deepcopy(_COMMON),
        "ssm": {"n_x": 3, "n_u": 1, "n_y": 1, "hidden_f": 16, "hidden_g": 16},
        "full": {
            "adam": {"lr_init": 1e-3, "lr_final": 1e-3, "weight_decay": 1e-4, "total_iters": 40000},
            "lbfgs": {"max_iters": 10000}, "rho": 0.0, "n_skip": None, "init_output_gain": 0.01,
        },
        "reduced": {"adam": {"lr_init": 1e-3, "lr_final": 1e-3, "total_iters": 10000}, "n_skip": None},
        "meta": {
            "n_phi": 20, "encoder_hidden": 128, "head_hidden": 128, "batch_size": 128, "seq_len": 2000,
            "n_skip": None, "ranges": "broad", "noise_std": 8e-6, "substeps": 10,
            "adam": {"lr_init": 2e-4, "lr_final": 2e-5, "total_iters": 200000, "schedule": "cosine"},
            "pool_size": None, "input_seed": None, "init_output_gain": 1.0,
        },
        "mc": {"lengths": list(DEFAULT_LENGTHS), "runs": 100, "modes": ["full", "reduced"],
               "long_length": 40960, "test_length": 8192, "noise_std": 8e-6, "substeps": 10},
    },
    "desk": {
        **copy.deepcopy(_COMMON),
        "ssm": {"n_x": 3, "n_u": 1, "n_y": 1, "hidden_f": 8, "hidden_g": 8},
        "full": {
            "adam": {"lr_init": 3e-3, "lr_final": 3e-3, "weight_decay": 1e-4, "total_iters": 2000},
            "lbfgs": {"max_iters": 1000}, "rho": 0.0, "n_skip": None, "init_output_gain": 0.01,
        },
        "reduced": {"adam": {"lr_init": 1e-3, "lr_final": 1e-3, "total_iters": 1000}, "n_skip": None},
        "meta": {
            "n_phi": 4, "encoder_hidden": 32, "head_hidden": 128, "batch_size": 16, "seq_len": 256,
            "n_skip": None, "ranges": {"around_nominal": 0.2}, "noise_std": 8e-6, "substeps": 10,
            "adam": {"lr_init": 1e-3, "lr_final": 1e-4, "total_iters": 3000, "schedule": "cosine"},
            "pool_size": None, "input_seed": None, "init_output_gain": 1.0,
        },
        "mc": {"lengths": [100, 250, 2500], "runs": 10, "modes": ["full", "reduced"],
               "long_length": 40960, "test_length": 8192, "noise_std": 8e-6, "substeps": 10},
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; non-dict values in ``override`` win."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("coefficients", "ranges"):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def resolve(doc: dict | None = None, seed: int | None = None, out: str | None = None) -> dict:
    """Validate a user document, merge it over its preset, apply overrides."""
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    validate(doc)
    preset = doc.get("preset", "desk")
    merged = deep_merge(PRESETS[preset], doc)
    merged["preset"] = preset
    if seed is not None:
        merged["seed"] = int(seed)
    if out is not None:
        merged["out"] = str(out)
    validate(merged)
    return merged


def load_config(path=None, seed: int | None = None, out: str | None = None) -> dict:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return resolve(doc, seed, out)


# keys that cannot change any artifact's content
UNHASHED = ("out", "threads")


def run_hash(cfg: dict) -> str:
    """Hash of the effective configuration, minus output directory and thread count."""
    return config_hash({k: v for k, v in cfg.items() if k not in UNHASHED})


# --------------------------------------------------------------------------
# typed views

def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def ranges_from(value) -> CoeffRanges:
    if value == "nominal":
        return CoeffRanges.fixed()
    if value == "broad":
        return CoeffRanges.broad()
    if "around_nominal" in value:
        return _wrap(CoeffRanges.around_nominal, value["around_nominal"])
    return _wrap(CoeffRanges.from_dict, value)


def ssm_config(cfg: dict) -> SsmConfig:
    return _wrap(SsmConfig, **cfg["ssm"])


def scaling(cfg: dict) -> Scaling:
    return _wrap(Scaling, **cfg["scaling"])


def excitation(cfg: dict, n_samples: int) -> MultisineSpec:
    e = cfg["excitation"]
    try:
        return MultisineSpec(n_samples, e["fs"], e["f_lo"], e["f_hi"], e["rms"])
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc


def adam_config(section: dict) -> AdamConfig:
    return _wrap(AdamConfig, **section)


def full_config(cfg: dict) -> FullTrainConfig:
    f = cfg["full"]
    return _wrap(FullTrainConfig, ssm=ssm_config(cfg), adam=adam_config(f["adam"]),
                 lbfgs=_wrap(LbfgsConfig, **f["lbfgs"]), rho=f["rho"], n_skip=f["n_skip"],
                 scaling=scaling(cfg), init_output_gain=f["init_output_gain"])


def reduced_config(cfg: dict) -> ReducedTrainConfig:
    r = cfg["reduced"]
    return _wrap(ReducedTrainConfig, adam=adam_config(r["adam"]), n_skip=r["n_skip"])


def meta_config(cfg: dict) -> MetaTrainConfig:
    m, e = cfg["meta"], cfg["excitation"]
    return _wrap(
        MetaTrainConfig, ssm=ssm_config(cfg), n_phi=m["n_phi"], encoder_hidden=m["encoder_hidden"],
        head_hidden=m["head_hidden"], batch_size=m["batch_size"], seq_len=m["seq_len"], n_skip=m["n_skip"],
        adam=adam_config(m["adam"]), ranges=ranges_from(m["ranges"]), fs=e["fs"], f_lo=e["f_lo"],
        f_hi=e["f_hi"], input_rms=e["rms"], noise_std=m["noise_std"], substeps=m["substeps"],
        seed=cfg["seed"], pool_size=m["pool_size"], input_seed=m["input_seed"], scaling=scaling(cfg),
        init_output_gain=m["init_output_gain"])


def mc_config(cfg: dict) -> McStudyConfig:
    mc = cfg["mc"]
    return _wrap(McStudyConfig, lengths=tuple(mc["lengths"]), runs=mc["runs"], modes=tuple(mc["modes"]),
                 long_length=mc["long_length"], test_length=mc["test_length"], noise_std=mc["noise_std"],
                 substeps=mc["substeps"], full=full_config(cfg), reduced=reduced_config(cfg), seed=cfg["seed"])
