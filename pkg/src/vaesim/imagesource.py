"""Geometric image sources for polygonal reflectors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_frequency_targets
from .geometry import normalize
from .polygon import Polygon

DEFAULT_KAPPA = 2.7
DELTA_MAX = 1.0 - 1e-9


class Reflector(Polygon):
    """One-sided reflecting polygon.

    Reflects towards its normal (vertices counter-clockwise seen from the
    reflecting side).  ``rho`` and ``delta`` parametrize the first-order
    reflection filter, ``kappa`` the soft fade of edge reflections.
    """

    def __init__(self, vertices, rho: float = 1.0, delta: float = 0.0,
                 kappa: float = DEFAULT_KAPPA, name: str = ""):
        super().__init__(vertices)
        if not 0.0 <= rho <= 1.0:
            raise ValueError("reflectivity must lie in [0, 1]")
        if not 0.0 <= delta < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        self.rho = float(rho)
        self.delta = float(delta)
        self.kappa = float(kappa)
        self.name = name


def mirror_position(p_src: np.ndarray, reflector: Polygon) -> np.ndarray:
    """Mirror image of ``p_src`` across the reflector's plane."""
    p_src = np.asarray(p_src, dtype=float)
    return 2.0 * reflector.plane_point(p_src) - p_src


class Reflection(NamedTuple):
    kind: str  # "specular" or "edge"
    position: np.ndarray
    theta: float


def classify_reflection(p_img: np.ndarray, p_rec: np.ndarray, reflector: Polygon) -> Reflection | None:
    """Decide how an image source is heard at ``p_rec``.

    Returns None when the receiver is behind the reflector, the mirrored
    source is behind it (image on the reflecting side), or the path runs
    parallel to the plane.
    """
    p_img = np.asarray(p_img, dtype=float)
    p_rec = np.asarray(p_rec, dtype=float)
    d_img = reflector.signed_distance(p_img)
    d_rec = reflector.signed_distance(p_rec)
    if d_rec <= 0.0 or d_img >= 0.0:
        return None
    p_is = reflector.segment_intersection(p_img, p_rec)
    if p_is is None:
        return None
    if reflector.contains(p_is):
        return Reflection("specular", p_img, 0.0)
    p_edge = reflector.closest_boundary_point(p_is)
    dist = np.linalg.norm(p_img - p_rec)
    effective = p_rec + dist * normalize(p_edge - p_rec)
    cos_t = np.dot(normalize(p_img - p_rec), normalize(effective - p_rec))
    return Reflection("edge", effective, float(np.arccos(np.clip(cos_t, -1.0, 1.0))))


def edge_gain(theta: float, kappa: float = DEFAULT_KAPPA) -> float:
    if theta >= math.pi / 2:
        return 0.0
    return math.cos(theta) ** kappa


def reflection_filter(block: np.ndarray, rho: float, delta: float, state) -> np.ndarray:
    """First-order reflection low-pass; ``state`` is a OnePoleState."""
    x = np.asarray(block, dtype=float)
    out = np.empty_like(x)
    state.y = _kernels.reflect(x, float(rho), float(delta), state.y, out)
    return out


def absorption_from_coeffs(rho: float, delta: float, f, fs: float):
    """Absorption coefficient of the reflection filter at frequency ``f``."""
    z = np.exp(-2j * np.pi * np.asarray(f, dtype=float) / fs)
    h = rho * (1.0 - delta) / (1.0 - delta * z)
    return (1.0 - np.abs(h)) ** 2


class ReflectionFit(BaseEstimator):
    """Least-squares fit of reflection filter coefficients to absorption
    targets.

    Parameters
    ----------
    fs : float
        Sampling rate of the filter.
    tol : float
        Objective tolerance passed to the optimizer.

    Attributes
    ----------
    rho_, delta_ : float
        Fitted reflectivity and damping.
    residual_ : float
        Final sum of squared absorption errors.
    converged_ : bool
    """

    def __init__(self, fs: float = 44100.0, tol: float = 1e-12):
        self.fs = fs
        self.tol = tol

    def _objective(self, theta, f, alpha):
        return float(np.sum((absorption_from_coeffs(theta[0], theta[1], f, self.fs) - alpha) ** 2))

    def fit(self, frequencies, absorption):
        f, alpha = check_frequency_targets(frequencies, absorption, self.fs)
        bounds = [(0.0, 1.0), (0.0, DELTA_MAX)]
        best = None
        # the objective has flat regions; start from a small grid
        for rho0 in (0.2, 0.5, 0.8, 0.99):
            for delta0 in (0.0, 0.3, 0.6, 0.9):
                res = minimize(self._objective, x0=[rho0, delta0], args=(f, alpha),
                               method="L-BFGS-B", bounds=bounds,
                               options={"ftol": self.tol, "gtol": 1e-12, "maxiter": 2000})
                if best is None or res.fun < best.fun:
                    best = res
        self.rho_, self.delta_ = (float(v) for v in best.x)
        self.residual_ = float(best.fun)
        # a line-search stall on an exact fit still counts as converged
        self.converged_ = bool(best.success) or self.residual_ <= self.tol
        if not self.converged_:
            warnings.warn(f"reflection fit did not converge: {best.message}", RuntimeWarning)
        return self

    def predict(self, frequencies):
        check_is_fitted(self, "rho_")
        return absorption_from_coeffs(self.rho_, self.delta_, frequencies, self.fs)


def fit_reflection_coeffs(targets: Sequence[tuple[float, float]], fs: float = 44100.0) -> tuple[float, float]:
    """(rho, delta) matching ``[(frequency, absorption), ...]`` targets."""
    if len(targets) == 0:
        raise ValueError("no absorption targets given")
    f, a = zip(*targets)
    est = ReflectionFit(fs=fs).fit(f, a)
    return est.rho_, est.delta_


@dataclass
class ImageSource:
    """An image of ``parent`` produced by the reflector chain ``chain``."""

    parent: int
    chain: tuple[int, ...]
    position: np.ndarray
    effective_position: np.ndarray | None = None
    gain: float = 1.0
    filter_states: list = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.chain)

    @property
    def reflector(self) -> int:
        return self.chain[-1]


def reflector_chains(n_reflectors: int, max_order: int) -> list[tuple[int, ...]]:
    """All reflector sequences up to ``max_order`` without immediate repeats."""
    chains: list[tuple[int, ...]] = []
    level = [()]
    for _ in range(max_order):
        level = [c + (r,) for c in level for r in range(n_reflectors) if not c or c[-1] != r]
        chains.extend(level)
    return chains


def chain_position(p_src: np.ndarray, chain: Sequence[int], reflectors: Sequence[Polygon]) -> np.ndarray:
    p = np.asarray(p_src, dtype=float)
    for k in chain:
        p = mirror_position(p, reflectors[k])
    return p


def generate_image_sources(sources: Sequence[np.ndarray], reflectors: Sequence[Polygon],
                           max_order: int) -> list[ImageSource]:
    """Enumerate image sources of every source up to ``max_order``.

    Lower-order images act as sources for the next order; an image is
    never mirrored again in the reflector that produced it.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    chains = reflector_chains(len(reflectors), max_order)
    return [ImageSource(k, c, chain_position(p, c, reflectors))
            for k, p in enumerate(sources) for c in chains]


def classify_chain(p_src: np.ndarray, chain: Sequence[int], reflectors: Sequence[Reflector],
                   p_rec: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Effective position and soft-fade gain of a chained image at ``p_rec``.

    Bounces are checked from the last reflector back to the first; the
    reflection point of each bounce acts as the receiver of the one
    before.  Gains multiply across bounces; None if any bounce is not
    rendered.
    """
    images = [np.asarray(p_src, dtype=float)]
    for k in chain:
        images.append(mirror_position(images[-1], reflectors[k]))
    rec = np.asarray(p_rec, dtype=float)
    gain = 1.0
    effective = images[-1]
    for level in range(len(chain), 0, -1):
        refl = reflectors[chain[level - 1]]
        res = classify_reflection(images[level], rec, refl)
        if res is None:
            return None
        if level == len(chain):
            effective = res.position
        if res.kind == "edge":
            gain *= edge_gain(res.theta, refl.kappa)
            rec = refl.closest_boundary_point(refl.segment_intersection(images[level], rec))
        else:
            rec = refl.segment_intersection(images[level], rec)
    return effective, gain
