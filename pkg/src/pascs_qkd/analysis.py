"""Amplitude optimization, rate-versus-distance sweeps and protocol comparison."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import DEFAULT_LOSS_DB_PER_KM, ChannelParams, DetectionParams, SignConvention
from .keyrate import MutualInfoConvention, RatePoint, key_rate
from .modulation import StateFamily

log = logging.getLogger(__name__)

DEFAULT_ALPHA = {StateFamily.PASCS: 0.13, StateFamily.COHERENT: 0.25}
DEFAULT_K_MIN = 1e-10
DEFAULT_BOUNDS = (0.01, 1.0)
DOMINANCE_TOL = 1e-12

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NoSecureKeyError(RuntimeError):
    """No amplitude in the search interval gives a positive key rate."""


def golden_section_maximize(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-3
) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    best = max([(fx, x), (fc, c), (fd, d)])
    return best[1], best[0]


def _count_peaks(values: np.ndarray) -> int:
    """Number of separate rises-then-falls in a sampled curve."""
    diffs = np.sign(np.diff(values))
    diffs = diffs[diffs != 0]
    if diffs.size == 0:
        return 1
    peaks = int(np.sum((diffs[:-1] > 0) & (diffs[1:] < 0)))
    return max(peaks, 1)


@dataclass(frozen=True)
class AlphaOptimum:
    alpha: float
    key_rate: float
    unimodal: bool


def optimize_alpha(
    family: StateFamily | str,
    ch: ChannelParams,
    det: DetectionParams | None = None,
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
    tol: float = 1e-3,
    prescan_points: int = 50,
    **rate_kwargs,
) -> AlphaOptimum:
    """Amplitude that maximizes the key rate at a fixed operating point.

    A uniform pre-scan checks unimodality.  If the scan has one peak the
    golden-section search runs on the whole interval, otherwise it is
    confined to the two grid cells around the scan's best point.
    """
    family = StateFamily(family)
    det = DetectionParams() if det is None else det
    lo, hi = bounds
    if not (0.0 < lo < hi <= 1.5):
        raise ValueError(f"bounds must satisfy 0 < lo < hi <= 1.5, got {bounds}")

    def k_of(a: float) -> float:
        return key_rate(a, family, ch, det, **rate_kwargs).key_rate

    grid = np.linspace(lo, hi, prescan_points)
    scan = np.array([k_of(a) for a in grid])
    i_best = int(np.argmax(scan))
    if scan[i_best] <= 0.0:
        raise NoSecureKeyError(
            f"{family.value}: key rate <= 0 for all alpha in [{lo}, {hi}] "
            f"(T={ch.transmissivity:.4g}, xi={ch.excess_noise})"
        )

    unimodal = _count_peaks(scan) == 1
    if unimodal:
        a, b = lo, hi
    else:
        log.info("key rate multimodal in alpha for %s; refining around grid argmax", family.value)
        a, b = grid[max(i_best - 1, 0)], grid[min(i_best + 1, grid.size - 1)]
    x, fx = golden_section_maximize(k_of, a, b, tol)
    if fx < scan[i_best]:
        x, fx = float(grid[i_best]), float(scan[i_best])
    return AlphaOptimum(float(x), float(fx), unimodal)


def distance_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive ``start:stop:step`` grid."""
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    if stop < start:
        raise ValueError(f"stop {stop} < start {start}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def first_crossing(distances: Sequence[float], rates: Sequence[float], threshold: float = 0.0, strict: bool = True) -> float | None:
    """Largest distance reached before the rate first drops below ``threshold``.

    ``strict`` requires ``K > threshold``, otherwise ``K >= threshold``.
    Returns ``None`` if the very first point already fails, and the last
    distance if no point fails.  Stopping at the first failure keeps
    round-off noise at extreme losses from reviving a dead curve.
    """
    for i, k in enumerate(rates):
        ok = k > threshold if strict else k >= threshold
        if not ok:
            return None if i == 0 else float(distances[i - 1])
    return float(distances[-1]) if len(distances) else None


@dataclass
class SweepSpec:
    families: tuple[StateFamily, ...] = (StateFamily.PASCS,)
    alphas: dict = field(default_factory=dict)
    distances: tuple[float, float, float] = (0.0, 450.0, 1.0)
    excess_noises: tuple[float, ...] = (0.002,)
    beta: float = 1.0
    eta_det: float = 1.0
    loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM
    k_min: float = DEFAULT_K_MIN
    iab_convention: MutualInfoConvention = MutualInfoConvention.EB
    sign_convention: SignConvention = SignConvention.STANDARD
    truncation: int | None = None
    reoptimize: bool = False

    def __post_init__(self):
        self.families = tuple(StateFamily(f) for f in self.families)
        if not self.families:
            raise ValueError("at least one protocol family is required")
        self.alphas = {StateFamily(k): float(v) for k, v in self.alphas.items()}
        for fam in self.families:
            self.alphas.setdefault(fam, DEFAULT_ALPHA[fam])
        self.excess_noises = tuple(float(x) for x in self.excess_noises)
        if not self.excess_noises:
            raise ValueError("excess noise list is empty")
        if not self.k_min > 0:
            raise ValueError(f"k_min must be > 0, got {self.k_min}")
        self.iab_convention = MutualInfoConvention(self.iab_convention)
        self.sign_convention = SignConvention(self.sign_convention)
        DetectionParams(self.beta, self.eta_det)
        distance_grid(*self.distances)

    @property
    def detection(self) -> DetectionParams:
        return DetectionParams(self.beta, self.eta_det)

    def distance_grid(self) -> np.ndarray:
        return distance_grid(*self.distances)

    def rate_kwargs(self) -> dict:
        return dict(
            iab_convention=self.iab_convention,
            sign_convention=self.sign_convention,
            truncation=self.truncation,
        )


@dataclass(frozen=True)
class Curve:
    family: StateFamily
    alpha: float
    excess_noise: float
    points: tuple[RatePoint, ...]
    cutoff_positive: float | None
    cutoff_threshold: float | None
    error: str | None = None

    @property
    def distances(self) -> np.ndarray:
        return np.array([p.distance_km for p in self.points])

    @property
    def key_rates(self) -> np.ndarray:
        return np.array([p.key_rate for p in self.points])


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    curves: tuple[Curve, ...]

    def curve(self, family: StateFamily | str, excess_noise: float) -> Curve:
        family = StateFamily(family)
        for c in self.curves:
            if c.family is family and c.excess_noise == excess_noise:
                return c
        raise KeyError((family, excess_noise))


def _evaluate_curve(spec: SweepSpec, family: StateFamily, xi: float) -> Curve:
    det = spec.detection
    kwargs = spec.rate_kwargs()
    alpha = spec.alphas[family]
    points: list[RatePoint] = []
    try:
        if spec.reoptimize:
            # optimum at the middle of the distance range
            grid = spec.distance_grid()
            mid = ChannelParams.from_distance(float(np.median(grid)), xi, spec.loss_db_per_km)
            alpha = optimize_alpha(family, mid, det, **kwargs).alpha
        for d in spec.distance_grid():
            ch = ChannelParams.from_distance(float(d), xi, spec.loss_db_per_km)
            points.append(key_rate(alpha, family, ch, det, **kwargs))
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        log.warning("curve %s xi=%g failed: %s", family.value, xi, exc)
        return Curve(family, alpha, xi, tuple(points), None, None, error=str(exc))
    dist = [p.distance_km for p in points]
    rates = [p.key_rate for p in points]
    return Curve(
        family,
        alpha,
        xi,
        tuple(points),
        cutoff_positive=first_crossing(dist, rates, 0.0, strict=True),
        cutoff_threshold=first_crossing(dist, rates, spec.k_min, strict=False),
    )


def sweep_distance(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Key rate over the distance grid for every (family, excess noise) pair.

    Curves are independent and may run on ``workers`` threads; the output
    order is always families first, then excess noises, as given.
    """
    jobs = [(fam, xi) for fam in spec.families for xi in spec.excess_noises]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(lambda job: _evaluate_curve(spec, *job), jobs))
    else:
        curves = [_evaluate_curve(spec, fam, xi) for fam, xi in jobs]
    return SweepResult(spec, tuple(curves))


@dataclass(frozen=True)
class CurveComparison:
    excess_noise: float
    first: Curve
    second: Curve
    dominance: tuple[bool, ...]
    gap_positive: float | None
    gap_threshold: float | None

    @property
    def dominates(self) -> bool:
        return all(self.dominance)


def _gap(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


def compare_curves(first: Curve, second: Curve, tol: float = DOMINANCE_TOL) -> CurveComparison:
    """Pointwise ``K_first >= K_second - tol`` and the cutoff gaps."""
    if first.error or second.error:
        raise ValueError(f"cannot compare failed curves: {first.error or second.error}")
    da, db = first.distances, second.distances
    if da.shape != db.shape or not np.array_equal(da, db):
        raise ValueError("curves are on different distance grids")
    flags = tuple(bool(x) for x in first.key_rates >= second.key_rates - tol)
    return CurveComparison(
        excess_noise=first.excess_noise,
        first=first,
        second=second,
        dominance=flags,
        gap_positive=_gap(first.cutoff_positive, second.cutoff_positive),
        gap_threshold=_gap(first.cutoff_threshold, second.cutoff_threshold),
    )


@dataclass(frozen=True)
class ProtocolComparison:
    result: SweepResult
    comparisons: tuple[CurveComparison, ...]

    @property
    def dominates(self) -> bool:
        return all(c.dominates for c in self.comparisons)


def compare_protocols(spec: SweepSpec, workers: int = 1) -> ProtocolComparison:
    """PASCS against the coherent baseline at each excess noise in ``spec``."""
    if set(spec.families) != {StateFamily.PASCS, StateFamily.COHERENT}:
        spec = SweepSpec(**{**spec.__dict__, "families": (StateFamily.PASCS, StateFamily.COHERENT)})
    result = sweep_distance(spec, workers)
    comparisons = tuple(
        compare_curves(result.curve(StateFamily.PASCS, xi), result.curve(StateFamily.COHERENT, xi))
        for xi in spec.excess_noises
    )
    return ProtocolComparison(result, comparisons)
