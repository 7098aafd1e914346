"""JSON problem and controller files.

A problem file holds the plant (``horizon``, ``dims``, ``A`` ... ``mu0``) and
optionally the controller subspace, as either

* ``"sparsity"``: an explicit (mN, pN) 0/1 array, ``{"kron": {"T": "causal",
  "S": [[...]]}}``, or ``{"S": [[...]], "kron": {...}}`` (explicit S wins), or
* ``"subspace"``: ``{"static_diag": true}``, ``{"static_pattern": [[...]]}``
  or ``{"basis": [K_1, K_2, ...]}``.

Without either, the subspace is all causal gains. A top-level ``"seed"`` is
used when no seed is given on the command line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ProblemFileError
from .model import CompactSystem, SystemData, assemble_compact, causal_mask, validate_system_data
from .subspace import (
    SubspaceSpec,
    explicit_subspace,
    kron_pattern,
    sparsity_subspace,
    static_diag_subspace,
    static_pattern_subspace,
)

BUNDLED = ("example1.json", "example2.json")


@dataclass(frozen=True, eq=False)
class Problem:
    system: SystemData
    compact: CompactSystem
    subspace: SubspaceSpec
    seed: int | None = None
    path: str | None = None


def resolve_path(path: str | Path) -> Path:
    """Return ``path``, falling back to a bundled example of the same name."""
    p = Path(path)
    if not p.exists() and p.name in BUNDLED and str(p) == p.name:
        return Path(str(resources.files("dlqg") / "data" / p.name))
    return p


def read_json(path: str | Path) -> Any:
    p = resolve_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {p}: {exc.strerror}", path=str(p)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(
            f"invalid JSON in {p}: {exc.msg}", path=str(p), line=exc.lineno, column=exc.colno
        ) from exc


def parse_subspace(doc: dict, m: int, p: int, N: int) -> SubspaceSpec:
    if "sparsity" in doc and "subspace" in doc:
        raise ProblemFileError("give either 'sparsity' or 'subspace', not both", field="subspace")
    if "subspace" in doc:
        sub = doc["subspace"]
        if not isinstance(sub, dict):
            raise ProblemFileError("'subspace' must be an object", field="subspace")
        if sub.get("static_diag"):
            return static_diag_subspace(m, p, N)
        if "static_pattern" in sub:
            small = np.asarray(sub["static_pattern"])
            if small.shape != (m, p):
                raise ProblemFileError(
                    f"static_pattern has shape {small.shape}, expected {(m, p)}", field="subspace"
                )
            return static_pattern_subspace(small, N)
        if "basis" in sub:
            return explicit_subspace(np.asarray(sub["basis"], dtype=float), m, p, N)
        raise ProblemFileError("unrecognized 'subspace' declaration", field="subspace")

    spar = doc.get("sparsity")
    if spar is None:
        return sparsity_subspace(causal_mask(m, p, N), m, p, N)
    if isinstance(spar, dict):
        if "S" in spar:
            return sparsity_subspace(np.asarray(spar["S"]), m, p, N)
        if "kron" in spar:
            kr = spar["kron"]
            try:
                S = kron_pattern(np.asarray(kr["S"]), N, kr.get("T", "causal"))
            except (KeyError, TypeError) as exc:
                raise ProblemFileError(f"malformed kron sparsity: {exc}", field="sparsity") from exc
            return sparsity_subspace(S, m, p, N)
        raise ProblemFileError("unrecognized 'sparsity' declaration", field="sparsity")
    return sparsity_subspace(np.asarray(spar), m, p, N)


def parse_problem(doc: Any, path: str | None = None) -> Problem:
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must be a JSON object", path=path)
    system = validate_system_data(doc)
    spec = parse_subspace(doc, system.m, system.p, system.horizon)
    seed = doc.get("seed")
    return Problem(system, assemble_compact(system), spec, None if seed is None else int(seed), path)


def load_problem(path: str | Path) -> Problem:
    return parse_problem(read_json(path), str(resolve_path(path)))


def load_controller(path: str | Path, shape: tuple[int, int]) -> np.ndarray:
    """Read ``{"K": [[...]]}``; a synthesis report works too."""
    doc = read_json(path)
    if not isinstance(doc, dict) or "K" not in doc:
        raise ProblemFileError("controller file needs a top-level 'K'", path=str(path))
    K = np.asarray(doc["K"], dtype=float)
    if K.shape != shape:
        raise ProblemFileError(
            f"controller has shape {K.shape}, expected {shape}", path=str(path), field="K"
        )
    return K
