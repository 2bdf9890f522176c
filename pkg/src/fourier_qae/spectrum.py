"""S(x) = sum_t f(t) e^{ixt}, its closed forms, peak location and angle recovery.

Because t is an integer, S is 2*pi-periodic in x. Peaks are reported in
[0, 2*pi); the true rotation phase c*m*theta (c = 2 for overlaps, 4 for
return probabilities) is recovered by unwrapping against a coarser estimate.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .acquire import AcquisitionConfig, SignalSeries, acquire_series

TWO_PI = 2 * np.pi
DEFAULT_STEP = 1e-3
DEFAULT_GRID = (0.0, TWO_PI, DEFAULT_STEP)
FLOOR_MADS = 5.0
# broad spectra (small T) put median + 5 MAD above the peak itself; the floor
# is then capped at this fraction of the tallest value
FLOOR_CAP = 0.5
RUNG_PEAK_FRACTION = 0.5
# ladder rungs drop peaks closer than these many widths (sqrt(2)*a) to 0 or pi:
# there the +x and -x peaks, or a side peak and the central one, overlap
MIRROR_GUARD = 2.5
CENTRAL_GUARD = 4.0


class NoPeakError(ValueError):
    pass


class AmbiguousUnwrapError(ValueError):
    pass


class LadderError(ValueError):
    pass


def wrap(x):
    return np.mod(x, TWO_PI)


def _circ(d):
    return (np.asarray(d) + np.pi) % TWO_PI - np.pi


def phase_factor(mode: str) -> int:
    """c in x = c*m*theta: 2 for overlap signals, 4 for return probabilities."""
    if mode in ("overlap", "exact_overlap", "hadamard_test"):
        return 2
    if mode in ("probability", "direct_probability"):
        return 4
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True, eq=False)
class SpectrumGrid:
    x_min: float
    x_max: float
    step: float
    x: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)  # windowed samples the spectrum was built from
    mode: str = "overlap"
    m: int = 1
    a: float = 0.0

    @property
    def values(self) -> list[tuple[float, float, float]]:
        return [(float(x), float(v.real), float(v.imag)) for x, v in zip(self.x, self.s)]

    @property
    def periodic(self) -> bool:
        return _one_period(self.x_min, self.x_max, self.step)

    def evaluate(self, x) -> np.ndarray:
        return _direct_sum(self.t, self.f, np.atleast_1d(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class PeakEstimate:
    x_peak: float
    height: float
    theta_hat: float
    m_used: int
    half_width: float
    aliased: bool

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("half_width")
        return d


def _direct_sum(t: np.ndarray, f: np.ndarray, x: np.ndarray) -> np.ndarray:
    # fixed summation order over t for reproducible results
    out = np.zeros(x.shape, dtype=complex)
    for tt, ff in zip(t, f):
        if ff != 0:
            out += ff * np.exp(1j * tt * x)
    return out


def _one_period(x_min: float, x_max: float, step: float) -> bool:
    return abs(x_max - x_min - TWO_PI) < 1.5 * step


def make_grid(x_min: float, x_max: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(np.floor((x_max - x_min) / step + 1e-9)) + 1
    x = x_min + step * np.arange(n)
    if _one_period(x_min, x_max, step):
        # exactly one period: drop points that repeat x_min + 2*pi
        x = x[x < x_min + TWO_PI - 0.5 * step]
    return x


def compute_spectrum(series: SignalSeries, x_min: float = DEFAULT_GRID[0], x_max: float = DEFAULT_GRID[1], step: float = DEFAULT_GRID[2]) -> SpectrumGrid:
    if not series.samples:
        raise ValueError("empty series")
    x = make_grid(x_min, x_max, step)
    t, f = series.t, series.windowed
    cfg = series.config
    return SpectrumGrid(
        float(x_min), float(x_max), float(step), x, _direct_sum(t, f, x), t, f,
        "overlap" if cfg.overlap else "probability", cfg.m, cfg.window.a,
    )


# --- closed forms ------------------------------------------------------------------


def _gauss_images(d, a: float, periodic: bool):
    d = np.asarray(d, dtype=float)
    g = lambda u: np.exp(-(u**2) / (4 * a * a))  # noqa: E731
    if not periodic:
        return g(d)
    d = _circ(d)
    # images beyond |k| = kmax are below exp(-pi^2 kmax^2 / a^2) for a < 1
    kmax = 3 + int(np.ceil(2 * a))
    return sum(g(d + TWO_PI * k) for k in range(-kmax, kmax + 1))


def analytic_spectrum_overlap(theta: float, m: int, a: float, x, *, periodic: bool = True):
    """(sqrt(pi)/2a) [G(x + 2m theta) + G(x - 2m theta)], G(u) = exp(-u^2/4a^2).

    With ``periodic=True`` every 2*pi image is summed (Poisson summation), which
    is the exact value of the untruncated integer-t sum.
    """
    y = 2 * m * theta
    return np.sqrt(np.pi) / (2 * a) * (_gauss_images(np.add(x, y), a, periodic) + _gauss_images(np.subtract(x, y), a, periodic))


def analytic_spectrum_probability(theta: float, m: int, a: float, x, *, periodic: bool = True):
    """(sqrt(pi)/4a) [G(x + 4m theta) + G(x - 4m theta) + 2 G(x)]."""
    y = 4 * m * theta
    return np.sqrt(np.pi) / (4 * a) * (
        _gauss_images(np.add(x, y), a, periodic)
        + _gauss_images(np.subtract(x, y), a, periodic)
        + 2 * _gauss_images(x, a, periodic)
    )


def truncated_spectrum_y_minus(theta: float, m: int, a: float, T: int, x):
    """1 + 2 sum_{t=1..T} exp(-a^2 t^2) cos(t (x - 2m theta)): the |y_-> signal cut at T."""
    u = np.asarray(x, dtype=float) - 2 * m * theta
    out = np.ones_like(u)
    for t in range(1, T + 1):
        out = out + 2 * np.exp(-((a * t) ** 2)) * np.cos(t * u)
    return out


# --- peaks -------------------------------------------------------------------------


def noise_floor(values: np.ndarray) -> float:
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    return med + FLOOR_MADS * mad


def theta_candidates(x: float, m: int, mode: str, lo: float = 0.0, hi: float = np.pi / 2) -> list[float]:
    """Every theta in [lo, hi] whose peak pair +-c*m*theta lands on x modulo 2*pi."""
    c = phase_factor(mode)
    cm = c * abs(m)
    if cm == 0:
        return [0.0] if lo <= 0.0 <= hi else []
    out = set()
    kmax = int(np.ceil(cm * max(abs(lo), abs(hi)) / TWO_PI)) + 1
    for sign in (1.0, -1.0):
        for k in range(-kmax, kmax + 1):
            th = (sign * x + TWO_PI * k) / cm
            if lo - 1e-12 <= th <= hi + 1e-12:
                out.add(round(th, 13))
    return sorted(out)


def _refine(spec: SpectrumGrid, i: int, vals: np.ndarray) -> tuple[float, float]:
    n = vals.size
    x0 = spec.x[i]
    if 0 < i < n - 1:
        left, right = vals[i - 1], vals[i + 1]
    else:
        # grid edge (or the periodic seam, whose spacing differs from step)
        left, right = spec.evaluate([x0 - spec.step, x0 + spec.step]).real
    c = vals[i]
    denom = left - 2 * c + right
    if denom >= 0:
        return float(x0), float(c)
    off = 0.5 * (left - right) / denom
    off = float(np.clip(off, -1.0, 1.0))
    height = c - 0.25 * (left - right) * off
    return float(x0 + off * spec.step), float(height)


def find_peaks(spec: SpectrumGrid, exclude_zero: bool = False, *, allow_empty: bool = False, exclude_halfwidth: float | None = None) -> list[PeakEstimate]:
    """Local maxima of Re S above the median + 5 MAD floor, tallest first.

    The floor never exceeds FLOOR_CAP times the maximum of Re S, so the single
    broad peak of a short series still counts. ``exclude_zero`` removes maxima
    within 3a of x = 0 (mod 2*pi), where the return-probability spectrum has
    its uninformative central peak.
    """
    vals = spec.s.real
    n = vals.size
    if n < 3:
        raise ValueError("grid needs at least 3 points")
    floor = min(noise_floor(vals), FLOOR_CAP * float(vals.max()))
    if spec.periodic:
        left, right = np.roll(vals, 1), np.roll(vals, -1)
        is_max = (vals > left) & (vals >= right)
    else:
        ext = spec.evaluate([spec.x[0] - spec.step, spec.x[-1] + spec.step]).real
        left = np.concatenate([[ext[0]], vals[:-1]])
        right = np.concatenate([vals[1:], [ext[1]]])
        is_max = (vals > left) & (vals >= right)
    idx = np.flatnonzero(is_max & (vals > floor))
    hw = 2 * spec.a * np.sqrt(np.log(2)) if spec.a else spec.step
    excl = 3 * spec.a if exclude_halfwidth is None else exclude_halfwidth
    peaks = []
    for i in idx:
        x, h = _refine(spec, int(i), vals)
        x = float(wrap(x))
        if exclude_zero and abs(_circ(x)) <= excl:
            continue
        if h <= 0:
            continue
        cands = theta_candidates(x, spec.m, spec.mode, 0.0, np.pi / 2)
        th = float(min(x, TWO_PI - x) / (phase_factor(spec.mode) * abs(spec.m))) if spec.m else 0.0
        peaks.append(PeakEstimate(x, float(h), th, int(spec.m), float(hw), len(cands) > 1))
    peaks.sort(key=lambda p: -p.height)
    if not peaks and not allow_empty:
        raise NoPeakError("no peak above floor")
    return peaks


def extract_theta(peaks: list[PeakEstimate], m: int, mode: str, *, prior: tuple[float, float] | None = None, theta_max: float = np.pi / 2, tol: float = 1e-9) -> float:
    """theta from the tallest peak: x/(2m) for overlaps, x/(4m) for probabilities.

    Candidates come from every 2*pi branch of +-x inside [0, theta_max], or
    inside ``prior`` (an interval from a coarser rung) when one is given.
    """
    if not peaks:
        raise ValueError("no peaks to extract from")
    x = peaks[0].x_peak
    if m == 0:
        return 0.0
    lo, hi = (0.0, theta_max) if prior is None else prior
    cands = theta_candidates(x, m, mode, max(0.0, lo), min(theta_max, hi))
    if not cands:
        raise AmbiguousUnwrapError(f"no branch of x={x:.6g} falls in [{lo:.6g}, {hi:.6g}]")
    if prior is not None:
        center = 0.5 * (lo + hi)
        return float(min(cands, key=lambda c: abs(c - center)))
    if max(cands) - min(cands) > tol:
        raise AmbiguousUnwrapError(f"x={x:.6g} at m={m} is consistent with theta in {cands}; supply ladder data")
    return float(cands[0])


# --- magnification ladder ---------------------------------------------------------------


@dataclass(frozen=True)
class LadderRung:
    m: int
    x_peak: float
    theta: float
    lo: float
    hi: float
    skipped: bool = False


@dataclass(frozen=True)
class LadderResult:
    theta: float
    half_width: float
    rungs: tuple[LadderRung, ...]

    def __float__(self):
        return self.theta


def _rung_peaks(spec: SpectrumGrid) -> list[float]:
    probability = spec.mode == "probability"
    peaks = find_peaks(spec, exclude_zero=probability, allow_empty=True)
    # truncation ripple can clear the floor; only peaks comparable to the global
    # maximum carry theta (a return-probability side peak is half the central one)
    ref = float(spec.s.real.max()) * (0.5 if probability else 1.0)
    xs = [p.x_peak for p in peaks[:4] if p.height >= RUNG_PEAK_FRACTION * ref]
    if not xs:
        # everything sits on x = 0 (theta = 0 or c*m*theta = 0 mod 2*pi)
        xs = [0.0]
    return xs


def ladder_refine(amp, schedule, base_cfg: AcquisitionConfig, *, grid=DEFAULT_GRID, prior: tuple[float, float] | None = None, theta_max: float = np.pi / 2, series_hook=None) -> LadderResult:
    """Narrow theta over increasing magnifications.

    At each m the candidate set {(+-x_peak + 2 pi k)/(c m)} is intersected with
    the interval kept from the previous rung; the member nearest the previous
    estimate is kept. The first rung must be unambiguous on its own (m = 1 for
    overlap signals) unless ``prior`` is given.

    Real-valued signals put peaks at both +x and -x. Peaks within MIRROR_GUARD
    widths of 0 or pi overlap their mirror image (CENTRAL_GUARD widths of 0 for
    the central peak of a return probability) and are biased, so they are
    discarded; a rung left without peaks is recorded as skipped.
    """
    schedule = [int(m) for m in schedule]
    if not schedule or any(m < 1 for m in schedule) or sorted(schedule) != schedule:
        raise ValueError("schedule must be increasing positive magnifications")
    lo, hi = prior if prior is not None else (0.0, theta_max)
    c = phase_factor(base_cfg.mode)
    est = None
    rungs = []
    step = grid[2]
    m_used = None
    mirrored = base_cfg.initial_state_mode != "y_minus_exact"
    for m in schedule:
        series = acquire_series(amp, replace(base_cfg, m=m))
        if series_hook is not None:
            series_hook(series)
        spec = compute_spectrum(series, *grid)
        xs = _rung_peaks(spec)
        if mirrored:
            sigma = np.sqrt(2) * spec.a
            g0 = (CENTRAL_GUARD if spec.mode == "probability" else MIRROR_GUARD) * sigma
            xs = [x for x in xs if abs(_circ(x)) >= g0 and abs(_circ(x - np.pi)) >= MIRROR_GUARD * sigma]
            if not xs:
                rungs.append(LadderRung(m, float("nan"), float("nan") if est is None else est, lo, hi, True))
                continue
        cands = []
        for x in xs:
            cands.extend((x, th) for th in theta_candidates(x, m, spec.mode, max(0.0, lo), min(theta_max, hi)))
        if not cands:
            raise LadderError(f"no candidate at m={m} inside [{lo:.6g}, {hi:.6g}]: inconsistent acquisition")
        if est is None and prior is None:
            # candidates closer than a peak width come from one (noise-split) peak
            thetas = sorted({round(th, 12) for _, th in cands})
            if thetas[-1] - thetas[0] > max(2 * step, 2 * np.sqrt(2) * spec.a) / (c * m):
                raise AmbiguousUnwrapError(f"first rung m={m} admits theta in {thetas}")
            x_best, est = cands[0]  # from the tallest peak
        else:
            ref = 0.5 * (lo + hi) if est is None else est
            x_best, est = min(cands, key=lambda p: abs(p[1] - ref))
        # keep everything within a few peak widths; the next rung must land inside
        w = max(3 * np.sqrt(2) * spec.a, step) / (c * m)
        lo, hi = max(0.0, est - w), min(theta_max, est + w)
        rungs.append(LadderRung(m, x_best, est, lo, hi))
        m_used = m
    if est is None:
        # every rung collided with its mirror image; only the prior remains
        return LadderResult(0.5 * (lo + hi), 0.5 * (hi - lo), tuple(rungs))
    return LadderResult(float(est), step / (c * m_used), tuple(rungs))


# --- serialization ------------------------------------------------------------------


def write_spectrum_csv(spec: SpectrumGrid, path, *, periodic_extension: tuple[float, float] | None = None) -> Path:
    """x, s_re, s_im rows. ``periodic_extension`` re-evaluates S over a wider x range
    (labeled in the header) for plots that show periodic images."""
    path = Path(path)
    x, s = spec.x, spec.s
    header = ["x", "s_re", "s_im"]
    if periodic_extension is not None:
        x = make_grid(periodic_extension[0], periodic_extension[1], spec.step)
        s = spec.evaluate(x)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if periodic_extension is not None:
            fh.write("# periodic extension: S(x + 2 pi) = S(x)\n")
        w.writerow(header)
        for xv, sv in zip(x, s):
            w.writerow([f"{xv:.17g}", f"{sv.real:.17g}", f"{sv.imag:.17g}"])
    return path


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    xs, ss = [], []
    with Path(path).open(newline="") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        for row in csv.DictReader(rows):
            xs.append(float(row["x"]))
            ss.append(complex(float(row["s_re"]), float(row["s_im"])))
    return np.array(xs), np.array(ss)


def write_peaks_json(peaks: list[PeakEstimate], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([p.to_json() for p in peaks], indent=2) + "\n")
    return path
