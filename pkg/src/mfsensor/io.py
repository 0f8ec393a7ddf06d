"""File formats: MFSM binary matrices, headerless CSV, JSON designs, run configs.

MFSM layout (all little-endian)::

    offset 0   4 bytes   b"MFSM"
    offset 4   uint32    version (1)
    offset 8   uint64    rows
    offset 16  uint64    cols
    offset 24  float64[rows * cols], column-major
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .basis import ENERGY_SQUARED, ReducedModel, SnapshotMatrix, restrict_to_candidates
from .errors import DataFormatError, InvalidInputError
from .model import DesignResult, FidelityClass, ProblemInstance, Selection

MAGIC = b"MFSM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_mfsm(path, mat) -> None:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.ndim != 2:
        raise InvalidInputError("MFSM stores 2-D matrices only")
    rows, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.asarray(mat, dtype="<f8").tobytes(order="F"))


def read_mfsm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError("file too short for an MFSM header", path)
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r}", path)
    if version != VERSION:
        raise DataFormatError(f"unsupported MFSM version {version}", path)
    expected = rows * cols * 8
    if len(raw) - _HEADER.size != expected:
        raise DataFormatError(
            f"payload is {len(raw) - _HEADER.size} bytes, header implies {expected}", path)
    mat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(
        (rows, cols), order="F").astype(float)
    if not np.all(np.isfinite(mat)):
        raise DataFormatError("non-finite values in payload", path)
    return mat


def read_csv(path) -> np.ndarray:
    """One row per location, comma-separated, no header."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError as exc:
                raise DataFormatError(f"non-numeric cell ({exc})", path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError("NaN or Inf value", path, lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataFormatError(
                    f"ragged row: {len(vals)} columns, expected {width}", path, lineno)
            rows.append(vals)
    if not rows:
        raise DataFormatError("empty file", path)
    return np.array(rows, dtype=float)


def write_csv(path, mat) -> None:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in mat:
            w.writerow([repr(float(v)) for v in row])


def guess_format(path) -> str:
    return "mfsm" if str(path).lower().endswith(".mfsm") else "csv"


def load_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = fmt or guess_format(path)
    if fmt == "mfsm":
        return read_mfsm(path)
    if fmt == "csv":
        return read_csv(path)
    raise InvalidInputError(f"unknown matrix format {fmt!r}")


def save_matrix(path, mat, fmt: str | None = None) -> None:
    fmt = fmt or guess_format(path)
    if fmt == "mfsm":
        write_mfsm(path, mat)
    elif fmt == "csv":
        write_csv(path, mat)
    else:
        raise InvalidInputError(f"unknown matrix format {fmt!r}")


def load_snapshots(path, fmt: str | None = None) -> SnapshotMatrix:
    return SnapshotMatrix(load_matrix(path, fmt))


def load_candidate_mask(path, n_points: int) -> np.ndarray:
    """0/1 mask (one entry per grid point) to sorted candidate indices."""
    mask = load_matrix(path).reshape(-1)
    if mask.size != n_points:
        raise DataFormatError(
            f"mask has {mask.size} entries, field has {n_points} points", path)
    idx = np.flatnonzero(mask != 0)
    if idx.size == 0:
        raise DataFormatError("mask selects no candidate locations", path)
    return idx


# -- reduced model directory ------------------------------------------------

def save_model(directory, model: ReducedModel, test=None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_mfsm(d / "phi.mfsm", model.phi)
    write_mfsm(d / "sing_vals.mfsm", model.sing_vals)
    write_mfsm(d / "prior_var.mfsm", model.prior_var)
    if model.mean is not None:
        write_mfsm(d / "mean.mfsm", model.mean)
    if test is not None:
        write_mfsm(d / "test.mfsm", test)
    all_points = (model.n_candidates == model.n_points)
    meta = {
        "ell": model.n_modes,
        "n_points": model.n_points,
        "lambda": model.lam,
        "p": model.n_snapshots,
        "energy": model.energy,
        "energy_mode": model.energy_mode,
        "center": model.mean is not None,
        "candidates": "all" if all_points else [int(i) for i in model.cand_idx],
    }
    (d / "model.json").write_text(json.dumps(meta, indent=1) + "\n")


def load_model(directory) -> ReducedModel:
    d = Path(directory)
    try:
        meta = json.loads((d / "model.json").read_text())
    except FileNotFoundError:
        raise DataFormatError("missing model.json", d) from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc}", d / "model.json") from None
    phi = read_mfsm(d / "phi.mfsm")
    cands = meta.get("candidates", "all")
    cand_idx = np.arange(phi.shape[0]) if cands == "all" else np.asarray(cands, dtype=np.int64)
    mean = read_mfsm(d / "mean.mfsm").reshape(-1) if meta.get("center") else None
    return ReducedModel(
        phi=phi,
        sing_vals=read_mfsm(d / "sing_vals.mfsm").reshape(-1),
        prior_var=read_mfsm(d / "prior_var.mfsm").reshape(-1),
        psi=restrict_to_candidates(phi, cand_idx),
        cand_idx=cand_idx,
        lam=float(meta["lambda"]),
        n_snapshots=int(meta["p"]),
        energy=float(meta.get("energy", 0.99)),
        energy_mode=meta.get("energy_mode", ENERGY_SQUARED),
        mean=mean,
    )


def load_test_split(directory):
    path = Path(directory) / "test.mfsm"
    return read_mfsm(path) if path.exists() else None


# -- design files -------------------------------------------------------------

def design_to_dict(result: DesignResult, inst: ProblemInstance, include_trace=True) -> dict:
    sel = result.selection
    doc = {
        "algorithm": result.algorithm,
        "fingerprint": inst.fingerprint(),
        "cheap": {"cost": inst.cheap.cost, "sigma": inst.cheap.sigma},
        "exp": {"cost": inst.exp.cost, "sigma": inst.exp.sigma},
        "budget": inst.budget,
        "cheap_idx": list(sel.cheap_idx),
        "exp_idx": list(sel.exp_idx),
        "k_ch": sel.k_cheap,
        "k_exp": sel.k_exp,
        "spend": result.spend,
        "phi_d": result.phi_d,
    }
    if include_trace and result.trace:
        doc["trace"] = [
            {"step": s, "fidelity": f, "location": int(i), "gain_per_cost": g, "phi_d": v}
            for s, f, i, g, v in result.trace]
    if result.meta:
        doc["meta"] = result.meta
    return doc


def write_design(path, result: DesignResult, inst: ProblemInstance, include_trace=True) -> None:
    doc = design_to_dict(result, inst, include_trace)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_design(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc}", path) from None
    for key in ("fingerprint", "cheap", "exp", "budget", "cheap_idx", "exp_idx"):
        if key not in doc:
            raise DataFormatError(f"design file lacks {key!r}", path)
    return doc


def design_fidelities(doc) -> tuple:
    return (FidelityClass(doc["cheap"]["cost"], doc["cheap"]["sigma"]),
            FidelityClass(doc["exp"]["cost"], doc["exp"]["sigma"]))


def design_selection(doc) -> Selection:
    return Selection(tuple(doc["cheap_idx"]), tuple(doc["exp_idx"]))


def check_fingerprint(doc, inst: ProblemInstance, path=None) -> None:
    if doc["fingerprint"] != inst.fingerprint():
        raise DataFormatError("design fingerprint does not match this model", path)


# -- run config ---------------------------------------------------------------

CONFIG_KEYS = {
    "lambda": float, "energy": float, "energy_mode": str, "train_frac": float,
    "cost_cheap": float, "cost_exp": float, "sigma_cheap": float, "sigma_exp": float,
    "budget": float, "algorithm": str, "seed": int, "max_iters": int,
    "center": None, "candidate_mask": str, "threads": int, "samples": int,
}


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError("expected key=value", path, lineno)
            key, value = (t.strip() for t in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise DataFormatError(f"unknown config key {key!r}", path, lineno)
            conv = CONFIG_KEYS[key] or _parse_bool
            try:
                out[key] = conv(value)
            except ValueError as exc:
                raise DataFormatError(str(exc), path, lineno) from None
    return out
