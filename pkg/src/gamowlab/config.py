"""Run configuration: TOML files validated against per-subcommand JSON schemas.

Complex numbers are written either as plain numbers or as ``[re, im]``
pairs.  Matrices are nested lists; complex matrices give a ``real`` and an
optional ``imag`` part.  Every section is closed: unknown keys are errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SUBCOMMANDS = ("decay", "decompose", "histories", "kaon", "poles", "hardy")

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number,
                                "minItems": 2, "maxItems": 2}]}
_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _number}}
_cmatrix = {"type": "object", "additionalProperties": False, "required": ["real"],
            "properties": {"real": _matrix, "imag": _matrix}}


def _closed(properties: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False,
            "properties": properties, "required": list(required)}


MODEL = _closed({
    "poles": {"type": "array", "minItems": 1,
              "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}},
    "branching": {"type": "object", "additionalProperties": _number},
    "background": {"type": "array", "items": _number},
}, ["poles"])

WAVEFUNCTION = _closed({
    "pole_term": {"type": "boolean"},
    "kind": {"enum": ["rational-decay", "rational-with-threshold-factor"]},
    "numerator": {"type": "array", "minItems": 1, "items": _complex},
    "residues": {"type": "array", "minItems": 1, "items": _complex},
    "poles": {"type": "array", "minItems": 1, "items": _complex},
    "halfplane": {"enum": ["lower", "upper"]},
    "ell": {"type": "integer", "minimum": 0},
    "support": {"enum": ["half-line", "extended"]},
})

GRID = _closed({
    "t_max": {"type": "number", "exclusiveMinimum": 0},
    "n": {"type": "integer", "minimum": 2},
    "times": {"type": "array", "minItems": 1, "items": _number},
})

CONTOUR = _closed({
    "theta": {"type": "number", "minimum": 0},
    "delta": {"type": "number", "exclusiveMinimum": 0},
    "hardy_tol": {"type": "number", "exclusiveMinimum": 0},
})

FAMILY = _closed({
    "basis": {"enum": ["computational"]},
    "vectors": _cmatrix,
    "groups": {"type": "array", "minItems": 1,
               "items": {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 0}}},
})

CHAIN = _closed({
    "name": {"type": "string"},
    "base_time": _number,
    "steps": {"type": "array",
              "items": {"type": "array", "minItems": 3, "maxItems": 3,
                        "prefixItems": [{"type": "string"}, {"type": "integer"}, _number]}},
    "scan": _closed({"family": {"type": "string"}, "time": _number},
                    ["family", "time"]),
}, ["steps"])

BEAM = _closed({
    "momentum_p": {"type": "number", "exclusiveMinimum": 0},
    "mass_m": {"type": "number", "exclusiveMinimum": 0},
    "n_events": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer", "minimum": 0},
})

KAON_DECAY = _closed({
    "gamma": {"type": "number", "exclusiveMinimum": 0},
    "branching": {"type": "object", "additionalProperties": _number},
})

ANALYSIS = _closed({
    "window": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
    "bin_width": {"type": "number", "exclusiveMinimum": 0},
    "fit": {"enum": ["unbinned", "binned"]},
    "noise": {"type": "array", "items": _number},
    "write_events": {"type": "boolean"},
    "workers": {"type": "integer", "minimum": 1},
})

PHYSICAL = _closed({
    "tau_s": {"type": "number", "exclusiveMinimum": 0},
    "momentum_p": {"type": "number", "exclusiveMinimum": 0},
    "mass_m": {"type": "number", "exclusiveMinimum": 0},
})

SEARCH = _closed({
    "seeds": {"type": "array", "minItems": 1, "items": _complex},
    "tol": {"type": "number", "exclusiveMinimum": 0},
    "grid": {"type": "array", "items": _number, "minItems": 1},
})


def _top(sections: dict, required=()) -> dict:
    props = {"subcommand": {"enum": list(SUBCOMMANDS)}, **sections}
    return _closed(props, required)


CONFIG_SCHEMAS = {
    "decay": _top({"model": MODEL, "wavefunction": WAVEFUNCTION, "grid": GRID,
                   "contour": CONTOUR}, ["model"]),
    "decompose": _top({"model": MODEL, "wavefunction": WAVEFUNCTION, "grid": GRID,
                       "contour": CONTOUR}, ["model", "wavefunction"]),
    "histories": _top({
        "dimension": {"type": "integer", "minimum": 1},
        "hamiltonian": _cmatrix,
        "state": {"oneOf": [{"enum": ["maximally-mixed"]}, _cmatrix]},
        "families": {"type": "object", "minProperties": 1, "additionalProperties": FAMILY},
        "chains": {"type": "array", "minItems": 1, "items": CHAIN},
    }, ["dimension", "families", "chains"]),
    "kaon": _top({"beam": BEAM, "decay": KAON_DECAY, "analysis": ANALYSIS,
                  "physical": PHYSICAL}),
    "poles": _top({"model": MODEL, "search": SEARCH}, ["model"]),
    "hardy": _top({"wavefunction": WAVEFUNCTION, "contour": CONTOUR}, ["wavefunction"]),
}


def load_config(path: str | Path | None, subcommand: str) -> dict:
    """Parse and validate a TOML config for ``subcommand``.

    A missing ``path`` yields an empty config, which is only valid for
    subcommands without required sections.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    validate_config(data, subcommand)
    return data


def validate_config(data: dict, subcommand: str):
    declared = data.get("subcommand", subcommand)
    if declared != subcommand:
        raise ConfigError(f"config is for {declared!r}, not {subcommand!r}")
    try:
        jsonschema.validate(data, CONFIG_SCHEMAS[subcommand])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def as_complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def as_matrix(spec: dict):
    try:
        real = np.array(spec["real"], dtype=float)
        imag = np.array(spec.get("imag", np.zeros_like(real)), dtype=float)
    except ValueError as exc:
        raise ConfigError(f"ragged matrix: {exc}") from None
    if real.shape != imag.shape or real.ndim != 2:
        raise ConfigError("matrix real and imag parts must be equal-shape 2-D arrays")
    return real + 1j * imag
