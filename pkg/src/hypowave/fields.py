"""JSON load/save for spectral fields."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .heisenberg import SpectralFieldHeis
from .io import atomic_write_text
from .su2 import HalfInt, SpectralFieldSU2

Field = Union[SpectralFieldSU2, SpectralFieldHeis]


class FieldSchemaError(ValueError):
    pass


def _enc(M: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _dec(obj, where: str, shape=None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FieldSchemaError(f"{where}: entries must be [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FieldSchemaError(f"{where}: expected a matrix of [re, im] pairs, got shape {arr.shape}")
    M = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and M.shape != shape:
        raise FieldSchemaError(f"{where}: matrix shape {M.shape} does not match {shape}")
    return M


def field_to_dict(f: Field) -> dict:
    if f.group == "su2":
        return {
            "group": "su2",
            "lmax2": f.lmax.twice,
            "coeffs": {str(tw): _enc(M) for tw, M in sorted(f.coeffs.items())},
        }
    out = {
        "group": "heis",
        "trunc": f.trunc,
        "lambdas": [float(x) for x in f.lambdas],
        "coeffs": [_enc(M) for M in f.mats],
    }
    if f.weights is not None:
        out["weights"] = [float(x) for x in f.weights]
    return out


def field_from_dict(d: dict) -> Field:
    if not isinstance(d, dict) or "group" not in d:
        raise FieldSchemaError("$: missing 'group'")
    g = d["group"]
    if g == "su2":
        coeffs = d.get("coeffs")
        if not isinstance(coeffs, dict):
            raise FieldSchemaError("$.coeffs: expected an object keyed by 2l")
        out = {}
        for key, val in coeffs.items():
            try:
                tw = int(key)
            except ValueError as exc:
                raise FieldSchemaError(f"$.coeffs[{key!r}]: key must be an integer 2l") from exc
            if tw < 0:
                raise FieldSchemaError(f"$.coeffs[{key!r}]: 2l must be nonnegative")
            out[tw] = _dec(val, f"$.coeffs[{key!r}]", (tw + 1, tw + 1))
        lmax2 = int(d.get("lmax2", max(out, default=0)))
        if out and max(out) > lmax2:
            raise FieldSchemaError(f"$.lmax2: {lmax2} is below stored key {max(out)}")
        return SpectralFieldSU2(out, HalfInt(lmax2))
    if g == "heis":
        try:
            N = int(d["trunc"])
            lam = np.asarray(d["lambdas"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise FieldSchemaError("$: heis fields need 'trunc' and 'lambdas'") from exc
        coeffs = d.get("coeffs", [])
        if len(coeffs) != lam.size:
            raise FieldSchemaError(f"$.coeffs: {len(coeffs)} matrices for {lam.size} lambdas")
        mats = np.zeros((lam.size, N, N), dtype=complex)
        for j, val in enumerate(coeffs):
            mats[j] = _dec(val, f"$.coeffs[{j}]", (N, N))
        w = d.get("weights")
        try:
            return SpectralFieldHeis(lam, mats, None if w is None else np.asarray(w, dtype=float))
        except ValueError as exc:
            raise FieldSchemaError(f"$: {exc}") from exc
    raise FieldSchemaError(f"$.group: unknown group {g!r}")


def save_field(path, f: Field) -> Path:
    return atomic_write_text(path, json.dumps(field_to_dict(f)) + "\n")


def load_field(path) -> Field:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FieldSchemaError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return field_from_dict(d)
    except FieldSchemaError as exc:
        raise FieldSchemaError(f"{path}: {exc}") from exc


def io_field(path, mode: str, field: Optional[Field] = None):
    if mode == "load":
        return load_field(path)
    if mode == "save":
        if field is None:
            raise ValueError("save needs a field")
        return save_field(path, field)
    raise ValueError(f"mode must be 'load' or 'save', got {mode!r}")
