"""TOML input files for games and single-player affine problems.

Game documents carry ``A``, ``B1``, ``B2``, ``Q1``, ``Q2``, ``R1``, ``R2`` as
row-major nested arrays, an optional ``x0`` vector, and an optional ``w`` list
of vectors.  Affine-problem documents carry ``A``, ``B``, ``Q``, ``R``,
optional ``x0`` and ``w``.  Unknown keys are rejected.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .affine_oc import AffineOCProblem
from .errors import SchemaError
from .game_model import GameDefinition

GAME_KEYS = {"A", "B1", "B2", "Q1", "Q2", "R1", "R2", "x0", "w"}
AFFINE_KEYS = {"A", "B", "Q", "R", "x0", "w"}


@dataclass(frozen=True)
class GameDocument:
    game: GameDefinition
    x0: np.ndarray | None
    w: np.ndarray | None


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"input file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"{path}: not valid TOML: {exc}") from exc


def _matrix(doc: dict, key: str, path) -> np.ndarray:
    value = doc[key]
    if not (isinstance(value, list) and value and all(isinstance(r, list) for r in value)):
        raise SchemaError(f"{path}: field '{key}' must be a nested (row-major) array")
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: field '{key}' is not numeric: {exc}") from exc
    if m.ndim != 2:
        raise SchemaError(f"{path}: field '{key}' has ragged rows")
    return m


def _vector(doc: dict, key: str, path) -> np.ndarray | None:
    if key not in doc:
        return None
    value = doc[key]
    if not (isinstance(value, list) and all(not isinstance(v, list) for v in value)):
        raise SchemaError(f"{path}: field '{key}' must be a flat array")
    return np.array(value, dtype=float)


def _vector_list(doc: dict, key: str, path) -> np.ndarray | None:
    if key not in doc:
        return None
    value = doc[key]
    if not (isinstance(value, list) and all(isinstance(v, list) for v in value)):
        raise SchemaError(f"{path}: field '{key}' must be a list of vectors")
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: field '{key}' is ragged or non-numeric") from exc


def _check_keys(doc: dict, allowed: set, required: set, path) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"{path}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    missing = required - set(doc)
    if missing:
        raise SchemaError(f"{path}: missing required keys {sorted(missing)}")


def load_game(path) -> GameDocument:
    """Parse a two-player game document."""
    path = Path(path)
    doc = _load_toml(path)
    _check_keys(doc, GAME_KEYS, GAME_KEYS - {"x0", "w"}, path)
    matrices = {k: _matrix(doc, k, path) for k in ("A", "B1", "B2", "Q1", "Q2", "R1", "R2")}
    try:
        game = GameDefinition(**matrices)
    except Exception as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    x0 = _vector(doc, "x0", path)
    if x0 is not None and x0.shape != (game.n,):
        raise SchemaError(f"{path}: x0 must have length {game.n}")
    w = _vector_list(doc, "w", path)
    if w is not None and (w.ndim != 2 or w.shape[1] != game.n):
        raise SchemaError(f"{path}: w entries must have length {game.n}")
    return GameDocument(game=game, x0=x0, w=w)


def load_affine_problem(path) -> AffineOCProblem:
    """Parse a single-player affine problem document."""
    path = Path(path)
    doc = _load_toml(path)
    _check_keys(doc, AFFINE_KEYS, AFFINE_KEYS - {"x0", "w"}, path)
    A = _matrix(doc, "A", path)
    B = _matrix(doc, "B", path)
    Q = _matrix(doc, "Q", path)
    R = _matrix(doc, "R", path)
    n = A.shape[0]
    x0 = _vector(doc, "x0", path)
    w = _vector_list(doc, "w", path)
    try:
        return AffineOCProblem(
            A=A, B=B, Q=Q, R=R,
            w=w if w is not None else np.zeros((0, n)),
            x0=x0 if x0 is not None else np.zeros(n),
        )
    except Exception as exc:
        raise SchemaError(f"{path}: {exc}") from exc
