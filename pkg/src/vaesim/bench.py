"""Render-cost benchmark and the linear cost model.

The cost of one processing cycle of ``P`` samples, expressed in samples of
wall time (``tau_P = seconds * fs``), is modelled as::

    tau_P = a0 + a1*K + a2*K*P + a3*N*P + a4*N*K*P

with K sources and N output channels.  The CPU load is ``C = tau_P / P``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from ._validation import check_knp
from .engine import Receiver, Renderer, Scene, SceneParams, Source
from .geometry import Trajectory
from .receivers import HOA2D, NSP, VBAP2D, SpeakerLayout

FORMATS = ("nsp", "vbap", "hoa2d")
COEF_NAMES = ("a0", "a1", "a2", "a3", "a4")
CSV_FIELDS = ("K", "N", "P", "format", "l_d", "rep", "tau_P", "C")


@dataclass
class BenchGrid:
    K: Sequence[int] = (1, 10, 100, 256)
    N: Sequence[int] = (8, 48, 128)
    P: Sequence[int] = (64, 256, 1024)
    formats: Sequence[str] = FORMATS
    l_d: Sequence[float] = (1.0, 10000.0)
    repetitions: int = 2

    def __post_init__(self):
        for label in ("K", "N", "P", "l_d"):
            values = getattr(self, label)
            if not values or min(values) < 1:
                raise ValueError(f"grid values for {label} must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.formats) - set(FORMATS)
        if unknown:
            raise ValueError(f"unknown formats {sorted(unknown)}; choose from {FORMATS}")

    def points(self):
        """Grid points (K, N, P, format, l_d, rep) in run order."""
        return product(self.K, self.N, self.P, self.formats, self.l_d, range(self.repetitions))


@dataclass
class BenchMeasurement:
    K: int
    N: int
    P: int
    format: str
    l_d: float
    rep: int
    tau_P: float
    C: float = field(init=False)

    def __post_init__(self):
        self.C = self.tau_P / self.P


def _receiver_format(fmt: str, n: int, hoa_order: int):
    layout = SpeakerLayout.ring(n)
    if fmt == "nsp":
        return NSP(layout, dims=2)
    if fmt == "vbap":
        if n < 2:
            raise ValueError("VBAP needs at least two speakers")
        return VBAP2D(layout)
    if n < 2 * hoa_order + 1:
        raise ValueError(f"HOA2D order {hoa_order} needs N >= {2 * hoa_order + 1}")
    return HOA2D(layout, hoa_order)


def bench_scene(K: int, N: int, P: int, fmt: str, l_d: float, noise: np.ndarray,
                template: SceneParams | None = None, hoa_order: int = 3) -> Scene:
    """K static primary sources around a receiver at the origin; no reflectors."""
    base = template or SceneParams()
    params = SceneParams(**{**asdict(base), "block_size": P, "max_distance": l_d, "image_order": 0})
    dist = min(2.0, 0.5 * l_d)
    sources = []
    for k in range(K):
        az = 2 * math.pi * k / K
        pos = (dist * math.cos(az), dist * math.sin(az), 0.0)
        sources.append(Source(f"s{k}", Trajectory.static(pos), audio=noise, loop=True))
    rec = Receiver("out", _receiver_format(fmt, N, hoa_order))
    return Scene(params, sources=sources, receivers=[rec])


def time_scene(scene: Scene, duration: float, inner_reps: int = 3) -> float:
    """Median CPU time per cycle in samples, after one warm-up block."""
    renderer = Renderer(scene)
    fs = scene.params.fs
    n_blocks = max(1, round(duration * fs / renderer.block_size))
    renderer.process_block()
    taus = []
    for _ in range(max(1, inner_reps)):
        t0 = time.process_time()
        for _ in range(n_blocks):
            renderer.process_block()
        taus.append((time.process_time() - t0) * fs / n_blocks)
    return float(np.median(taus))


def run_benchmark(grid: BenchGrid | None = None, template: SceneParams | None = None,
                  duration: float = 10.0, inner_reps: int = 3, seed: int = 0, hoa_order: int = 3,
                  progress: Callable[[str], None] | None = None) -> tuple[list[BenchMeasurement], list[str]]:
    """Measure every grid point sequentially.

    Returns the measurements and a list of notes for skipped points.
    """
    grid = grid or BenchGrid()
    fs = (template or SceneParams()).fs
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, int(round(min(duration, 10.0) * fs)))
    rows, skipped = [], []
    for K, N, P, fmt, l_d, rep in grid.points():
        try:
            scene = bench_scene(K, N, P, fmt, l_d, noise, template, hoa_order)
        except ValueError as exc:
            if rep == 0:
                skipped.append(f"K={K} N={N} P={P} {fmt} l_d={l_d:g}: {exc}")
            continue
        tau = time_scene(scene, duration, inner_reps)
        rows.append(BenchMeasurement(K, N, P, fmt, l_d, rep, tau))
        if progress is not None:
            progress(f"K={K} N={N} P={P} {fmt} l_d={l_d:g} rep={rep}: C={rows[-1].C:.4g}")
    return rows, skipped


def write_csv(rows: Iterable[BenchMeasurement], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in rows:
            writer.writerow([r.K, r.N, r.P, r.format, f"{r.l_d:g}", r.rep, repr(r.tau_P), repr(r.C)])


def read_csv(path: str | Path) -> list[BenchMeasurement]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [BenchMeasurement(int(r["K"]), int(r["N"]), int(r["P"]), r["format"], float(r["l_d"]),
                                 int(r["rep"]), float(r["tau_P"])) for r in reader]


def _design(X: np.ndarray) -> np.ndarray:
    """Columns of C = tau_P / P for the five model terms."""
    K, N, P = X[:, 0], X[:, 1], X[:, 2]
    return np.column_stack([1.0 / P, K / P, K, N, N * K])


class CostModel(RegressorMixin, BaseEstimator):
    """Non-negative least-squares fit of the cycle-cost model.

    ``fit(X, y)`` takes rows ``(K, N, P)`` and measured ``tau_P`` in
    samples.  The squared error is minimized on the CPU load ``C = tau_P/P``.
    ``predict`` returns ``tau_P``; ``predict_load`` returns ``C``.

    Attributes
    ----------
    coef_ : ndarray of shape (5,)
        ``(a0, a1, a2, a3, a4)``, all >= 0.
    residual_ : float
        Root-mean-square error of the fitted load.
    """

    def fit(self, X, y):
        X = check_knp(X)
        tau = column_or_1d(np.asarray(y, dtype=float))
        if len(tau) != len(X):
            raise ValueError("X and y have different lengths")
        missing = [name for name, col in zip("KNP", X.T) if len(np.unique(col)) < 2]
        if missing:
            raise ValueError("design is rank deficient: no variation in " + ", ".join(missing))
        A = _design(X)
        b = tau / X[:, 2]
        scale = np.linalg.norm(A, axis=0)
        As = A / scale
        if np.linalg.matrix_rank(As) < A.shape[1]:
            raise ValueError("design is rank deficient: need at least 5 distinct (K, N, P) points "
                             "varying K jointly with N and P")
        sol, _ = nnls(As, b)
        self.coef_ = sol / scale
        self.residual_ = float(np.sqrt(np.mean((A @ self.coef_ - b) ** 2)))
        self.n_features_in_ = 3
        return self

    @classmethod
    def from_coefficients(cls, coefficients: Sequence[float]) -> "CostModel":
        coef = np.asarray(coefficients, dtype=float)
        if coef.shape != (5,):
            raise ValueError("expected five coefficients a0..a4")
        model = cls()
        model.coef_ = coef
        model.residual_ = float("nan")
        model.n_features_in_ = 3
        return model

    def predict_load(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return _design(check_knp(X)) @ self.coef_

    def predict(self, X) -> np.ndarray:
        X = check_knp(X)
        return self.predict_load(X) * X[:, 2]

    @property
    def coefficients(self) -> dict[str, float]:
        check_is_fitted(self, "coef_")
        return dict(zip(COEF_NAMES, (float(a) for a in self.coef_)))

    def report(self) -> str:
        """Key-value text report."""
        lines = [f"{k} = {v!r}" for k, v in self.coefficients.items()]
        lines.append(f"residual = {self.residual_!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_report(cls, text: str) -> "CostModel":
        values = {}
        for line in text.splitlines():
            if "=" in line:
                key, _, value = line.partition("=")
                values[key.strip()] = float(value)
        missing = [k for k in COEF_NAMES if k not in values]
        if missing:
            raise ValueError(f"report lacks {', '.join(missing)}")
        model = cls.from_coefficients([values[k] for k in COEF_NAMES])
        model.residual_ = values.get("residual", float("nan"))
        return model


def fit_cpu_model(measurements: Sequence[BenchMeasurement]) -> CostModel:
    X = np.array([(m.K, m.N, m.P) for m in measurements], dtype=float)
    y = np.array([m.tau_P for m in measurements], dtype=float)
    return CostModel().fit(X, y)


def kmax(model: CostModel | Sequence[float], load: float, P: float, N: float) -> int:
    """Largest source count whose predicted load stays at or below ``load``."""
    a0, a1, a2, a3, a4 = model.coef_ if isinstance(model, CostModel) else np.asarray(model, dtype=float)
    denom = a1 / P + a2 + a4 * N
    if denom <= 0:
        raise ValueError("model is degenerate: per-source cost is not positive")
    bound = (load - a0 / P - a3 * N) / denom
    return max(0, math.floor(bound))
