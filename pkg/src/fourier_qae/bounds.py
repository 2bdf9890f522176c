"""Error-budget formulas: truncation cutoff, shot-noise variance, low-variance magnifications."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from scipy.special import erfc


def cutoff_bound(a: float, T: int) -> float:
    """(2/a) exp(-a^2 T^2): bound on |S^inf(x) - S^T(x)| for every x."""
    _check_window(a, T)
    return 2.0 / a * math.exp(-((a * T) ** 2))


def erfc_bound(a: float, T: int) -> float:
    """(2/a) erfc(aT), the tighter form the exponential bound is derived from."""
    _check_window(a, T)
    return 2.0 / a * float(erfc(a * T))


def _check_window(a: float, T: int):
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")


def min_T(a: float, eps_c: float) -> int:
    """Smallest integer T with cutoff_bound(a, T) <= eps_c."""
    if eps_c <= 0:
        raise ValueError("eps_c must be positive")
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    arg = math.log(2.0 / (a * eps_c))
    if arg <= 0:
        return 1
    T = max(1, math.ceil(math.sqrt(arg) / a))
    # guard the ceil against rounding in log/sqrt
    while T > 1 and cutoff_bound(a, T - 1) <= eps_c:
        T -= 1
    while cutoff_bound(a, T) > eps_c:
        T += 1
    return T


def shot_variance(alpha: float, n_shot: int) -> float:
    """Var(alpha_hat) = (1 - alpha^2)/N for alpha_hat = 2 P_hat(0) - 1."""
    if abs(alpha) > 1 + 1e-12:
        raise ValueError("|alpha| must not exceed 1")
    if n_shot < 1:
        raise ValueError("n_shot must be >= 1")
    return max(0.0, 1.0 - alpha * alpha) / n_shot


@dataclass(frozen=True)
class MagnificationCandidate:
    m: int
    N: int
    residual: float  # |2 m t theta - N pi|


def optimal_magnifications(theta: float, t: int, m_max: int, tol: float | None = None) -> list[MagnificationCandidate]:
    """Integers 1 <= m <= m_max ranked by how close 2 m t theta lies to a multiple of pi.

    At 2 m t theta = N pi the Hadamard-test real part is +-1 and its shot
    variance vanishes. ``tol`` drops candidates whose residual exceeds it.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if t < 1:
        raise ValueError("t must be >= 1")
    out = []
    for m in range(1, m_max + 1):
        phase = 2 * m * t * theta
        N = max(1, round(phase / math.pi))
        res = abs(phase - N * math.pi)
        if tol is None or res <= tol:
            out.append(MagnificationCandidate(m, N, res))
    out.sort(key=lambda c: (c.residual, c.m))
    return out


@dataclass(frozen=True)
class BoundsReport:
    a: float
    T: int
    cutoff_bound: float
    erfc_bound: float
    min_T_for: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def bounds_report(a: float, T: int, eps_targets=()) -> BoundsReport:
    return BoundsReport(
        a=a,
        T=T,
        cutoff_bound=cutoff_bound(a, T),
        erfc_bound=erfc_bound(a, T),
        min_T_for={f"{e:.6g}": min_T(a, e) for e in eps_targets},
    )
