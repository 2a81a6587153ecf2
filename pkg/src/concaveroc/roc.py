"""Placement values, ROC curves, the uniform-mixture concave CDF and EMSE."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import norm_cdf, norm_ppf
from .errors import InputError

GRID_SIZE = 1001


def default_grid(size: int = GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


@dataclass(frozen=True)
class Sample:
    """Test scores for the reference (group 0) and affected (group 1) subjects."""

    scores0: np.ndarray
    scores1: np.ndarray

    def __post_init__(self):
        s0 = np.asarray(self.scores0, dtype=float).ravel()
        s1 = np.asarray(self.scores1, dtype=float).ravel()
        for name, s in (("scores0", s0), ("scores1", s1)):
            if s.size == 0:
                raise InputError(f"{name} is empty")
            if not np.all(np.isfinite(s)):
                raise InputError(f"{name} contains non-finite values")
        object.__setattr__(self, "scores0", s0)
        object.__setattr__(self, "scores1", s1)

    @property
    def n0(self) -> int:
        return self.scores0.size

    @property
    def n1(self) -> int:
        return self.scores1.size

    def transform(self, fn) -> "Sample":
        return Sample(fn(self.scores0), fn(self.scores1))


@dataclass(frozen=True)
class RocCurve:
    """ROC values on a fixed grid of false-positive rates, plus the AUC."""

    grid: np.ndarray
    values: np.ndarray
    auc: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "auc", float(self.auc))

    def trapezoid_auc(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def is_concave(self, tol: float = 1e-9) -> bool:
        return bool(concavity_violations(self.values[None, :], self.grid, tol) == 0)

    def crosses_chance_line(self, tol: float = 1e-9) -> bool:
        return bool(np.any(self.values < self.grid - tol))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO(newline="")
        buf.write("t,roc\n")
        for t, v in zip(self.grid, self.values):
            buf.write(f"{t:.6f},{v:.6f}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def from_csv(cls, source, auc: float | None = None) -> "RocCurve":
        """Read a ``t,roc`` CSV from a path or a string of CSV text."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["t", "roc"]:
            raise InputError("ROC CSV must start with header 't,roc'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        grid, values = data[:, 0], data[:, 1]
        if auc is None:
            auc = float(np.trapezoid(values, grid))
        return cls(grid, values, auc)


def placement_values(sample: Sample, f0) -> np.ndarray:
    """``z_i = 1 - F0(Y1_i)``: share of the reference population above each affected score."""
    y1 = np.asarray(sample.scores1, dtype=float)
    if not np.all(np.isfinite(y1)):
        raise InputError("affected scores must be finite")
    z = 1.0 - np.asarray(f0(y1), dtype=float)
    return np.clip(z, 0.0, 1.0)


def clamp_placement_values(z, n0: int) -> np.ndarray:
    """Keep PVs in ``[1/(2 n0), 1 - 1/(2 n0)]`` so the uniform likelihood stays finite."""
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)) or not np.all(np.isfinite(z)):
        raise InputError("placement values must lie in [0, 1]")
    eps = 1.0 / (2.0 * n0)
    return np.clip(z, eps, 1.0 - eps)


def binormal_roc_values(a, b, grid):
    """``Phi(a + b Phi^{-1}(t))`` for scalar or column-vector ``a``, ``b``."""
    grid = np.asarray(grid, dtype=float)
    with np.errstate(divide="ignore"):
        q = norm_ppf(grid)
    vals = norm_cdf(np.asarray(a)[..., None] + np.asarray(b)[..., None] * q)
    return vals


def binormal_auc(a, b):
    return norm_cdf(np.asarray(a) / np.sqrt(1.0 + np.asarray(b) ** 2))


def binormal_roc(a: float, b: float, grid=None) -> RocCurve:
    if not b > 0:
        raise ValueError("binormal slope b must be positive")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    return RocCurve(grid, binormal_roc_values(a, b, grid), float(binormal_auc(a, b)))


def _check_bounds(w):
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise InputError("mixture bounds must be nonempty")
    if np.any(~(w > 0)) or np.any(w > 1):
        raise InputError("mixture bounds must lie in (0, 1]")
    return w


def concave_cdf_eval(w, t):
    """Average of Uniform(0, w_s) CDFs: ``mean_s min(t, w_s) / w_s``.

    ``w`` may be 1-D (one draw) or 2-D (draws x S); ``t`` is a grid.
    Evaluation is O(S log S + len(t)) per draw using sorted bounds.
    """
    w = _check_bounds(w)
    t = np.asarray(t, dtype=float)
    scalar_t = t.ndim == 0
    t = np.atleast_1d(t)
    single = w.ndim == 1
    W = np.sort(np.atleast_2d(w), axis=1)
    n_draws, S = W.shape
    out = np.empty((n_draws, t.size))
    for d in range(n_draws):
        ws = W[d]
        # suffix sums of 1/w over bounds strictly above t
        inv_tail = np.concatenate([np.cumsum((1.0 / ws)[::-1])[::-1], [0.0]])
        below = np.searchsorted(ws, t, side="right")
        out[d] = (below + t * inv_tail[below]) / S
    np.minimum(out, 1.0, out=out)
    if single:
        out = out[0]
        return float(out[0]) if scalar_t else out
    return out


def auc_from_bounds(w):
    """``1 - mean(w) / 2``; ``w`` 1-D or (draws x S)."""
    w = _check_bounds(w)
    return 1.0 - w.mean(axis=-1) / 2.0


def mann_whitney_auc(scores0, scores1) -> float:
    """P(Y1 > Y0) + 0.5 P(Y1 = Y0) via ranks."""
    s0 = np.asarray(scores0, dtype=float)
    s1 = np.asarray(scores1, dtype=float)
    s0s = np.sort(s0)
    lt = np.searchsorted(s0s, s1, side="left")
    le = np.searchsorted(s0s, s1, side="right")
    return float((lt.sum() + 0.5 * (le - lt).sum()) / (s0.size * s1.size))


def empirical_pv_cdf(z, grid) -> np.ndarray:
    zs = np.sort(np.asarray(z, dtype=float))
    return np.searchsorted(zs, np.asarray(grid, dtype=float), side="right") / zs.size


def empirical_roc(sample: Sample, grid=None) -> RocCurve:
    """Step-function ROC from empirical CDFs; AUC is the Mann-Whitney statistic."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    s0 = np.sort(sample.scores0)
    # placement value of each affected score: share of reference scores strictly above
    z = 1.0 - np.searchsorted(s0, sample.scores1, side="right") / s0.size
    values = empirical_pv_cdf(z, grid)
    return RocCurve(grid, values, mann_whitney_auc(sample.scores0, sample.scores1))


def emse(estimate: RocCurve, truth: RocCurve) -> float:
    """Integrated squared difference between two curves (trapezoid rule)."""
    if estimate.grid.shape != truth.grid.shape or not np.allclose(estimate.grid, truth.grid, 0, 1e-12):
        raise InputError("EMSE requires curves on identical grids")
    return float(np.trapezoid((estimate.values - truth.values) ** 2, truth.grid))


def concavity_violations(values, grid, tol: float = 1e-9) -> int:
    """Count curves (rows) whose finite-difference slopes ever increase."""
    values = np.atleast_2d(values)
    slopes = np.diff(values, axis=1) / np.diff(grid)
    bad = np.any(np.diff(slopes, axis=1) > tol * np.maximum(1.0, np.abs(slopes[:, 1:])), axis=1)
    return int(bad.sum())
