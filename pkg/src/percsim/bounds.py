"""Closed-form thresholds and constants: branching subcritical bound,
interference lattice constant, SINR interference thresholds and the
radius moment check for random powers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DivergenceError, InfeasibleError
from .pathloss import PathLoss, pathloss_inverse, shifted_pathloss
from .point_processes import MarkDistribution


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# branching bound for random radii

_K_MAX = 2**20


@dataclass(frozen=True)
class BranchingBound:
    """Subcritical intensity for the Boolean model with integer radii.

    Attributes
    ----------
    lambda0 : float
        ``1 / (C E[ceil(rho)^(2d-1)])``.
    C : float
        ``2^(d+1) * pi_d``.
    moment : float
        ``E[ceil(rho)^(2d-1)]`` (an upper bound when a tail estimate is added).
    d : int
    pmf : ndarray
        ``P(ceil(rho) = j)`` for ``j = 0 .. len(pmf)-1``.
    """

    lambda0: float
    C: float
    moment: float
    d: int
    pmf: np.ndarray = field(repr=False)

    def mu(self, lam: float, i: int, j: int) -> float:
        """Mean offspring ``lam P(rho=j) pi_d [(i+j)^d - max(0, i-j)^d]``."""
        pj = self.pmf[j] if j < len(self.pmf) else 0.0
        d = self.d
        return lam * pj * unit_ball_volume(d) * ((i + j) ** d - max(0, i - j) ** d)


def branching_subcritical_bound(dist: MarkDistribution, d: int = 2) -> BranchingBound:
    """Intensity below which the Boolean model with radii ``ceil(rho)`` is subcritical.

    Raises
    ------
    DivergenceError
        If ``E[rho^(2d-1)]`` is infinite.
    """
    m = 2 * d - 1
    if dist.tail_exponent <= m:
        raise DivergenceError(f"E[rho^{m}] diverges: tail exponent {dist.tail_exponent} <= {m}")
    upper = dist.upper
    kmax = int(math.ceil(upper)) if math.isfinite(upper) else _K_MAX
    pmf = dist.ceil_pmf(kmax)
    j = np.arange(kmax + 1, dtype=float)
    moment = float((j**m * pmf).sum())
    if not math.isfinite(upper):
        if dist.kind == "pareto":
            alpha, scale = dist.params
            if kmax >= scale:
                tail = (1 + 1 / kmax) ** m * alpha * scale**alpha * kmax ** (m - alpha) / (alpha - m)
                moment += tail
        elif float(dist.sf(kmax)) > 1e-300:
            warnings.warn("moment truncated with non-negligible mass beyond the summation range", RuntimeWarning, 2)
    C = 2 ** (d + 1) * unit_ball_volume(d)
    return BranchingBound(1.0 / (C * moment), C, moment, d, pmf)


# interference constants


@dataclass(frozen=True)
class LatticeConstant:
    """Truncated evaluation of the shifted lattice-sum constant.

    ``K0 = head + tail``; `tail` bounds the terms beyond index `N`.
    """

    K0: float
    head: float
    tail: float
    N: int

    @property
    def tail_ratio(self) -> float:
        return self.tail / self.head


def _k0_weights(i: np.ndarray, d: int) -> np.ndarray:
    return (2 * i + 2) ** d - (2 * i) ** d


def lattice_constant(ell: PathLoss, d: int = 2, rtol: float = 1e-9, n_max: int = 2**24) -> LatticeConstant:
    """Bound on ``sum_{z in Z^d} l_{6n}(|nz - x|)`` uniform in ``n`` and ``x``.

    With ``c = 3 sqrt(d)`` and ``i0 = ceil(c)``::

        K0 = sum_{i=0}^{i0} w_i + sum_{i>=i0} w_i l(i - c),   w_i = (2i+2)^d - (2i)^d

    The second sum is truncated at ``N`` (doubled until the tail bound
    ``int_N^inf 2d (2x+4)^(d-1) l(x - c) dx`` is below ``rtol`` times the head).

    Raises
    ------
    DivergenceError
        If ``l`` is not integrable in dimension `d`.
    """
    ell_d = ell.with_dimension(d) if ell.d != d else ell
    if not ell_d.integrable():
        raise DivergenceError(f"lattice sum diverges: path loss not integrable in d={d}")
    c = 3.0 * math.sqrt(d)
    i0 = int(math.ceil(c))
    first = float(_k0_weights(np.arange(i0 + 1, dtype=float), d).sum())

    def tail_from(N):
        upper = ell.support + c
        if N >= upper:
            return 0.0
        def f(x):
            return 2 * d * (2 * x + 4) ** (d - 1) * float(ell(x - c))

        # purely relative tolerance: the tail is tiny next to quad's default epsabs
        opts = dict(epsabs=0.0, epsrel=1e-10, limit=400)
        if math.isfinite(upper):
            return float(integrate.quad(f, N, upper, **opts)[0])
        # x = N / t turns power-law tails into bounded or mildly singular integrands on (0, 1]
        val, _ = integrate.quad(lambda t: f(N / t) * N / (t * t) if t > 0 else 0.0, 0.0, 1.0, **opts)
        return float(val)

    N = max(64, 2 * i0)
    while True:
        i = np.arange(i0, N + 1, dtype=float)
        head = first + float((_k0_weights(i, d) * ell(i - c)).sum())
        tail = tail_from(N)
        if not math.isfinite(tail):
            raise DivergenceError("tail integral diverges")
        if tail <= rtol * head:
            return LatticeConstant(head + tail, head, tail, N)
        if N >= n_max:
            warnings.warn(f"lattice sum tail {tail / head:.3g} of head at N={N}", RuntimeWarning, 2)
            return LatticeConstant(head + tail, head, tail, N)
        N *= 2


def lattice_shot_sum(ell: PathLoss, n: float, x, extent: int) -> float:
    """Direct ``sum_{|z|_inf <= extent} l_{6n}(|nz - x|)`` over ``z in Z^d``."""
    x = np.asarray(x, float)
    d = x.shape[0]
    axes = [np.arange(-extent, extent + 1)] * d
    z = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    dist = np.sqrt(((n * z - x) ** 2).sum(-1))
    return float(shifted_pathloss(ell.with_dimension(d), 6.0 * n, dist).sum())


def gamma_prime(ell: PathLoss, N0: float, tau: float, P: float, r: float, M: float) -> float:
    """``(N0 / (P M)) (l(r) / l(r_B) - 1)`` with ``l(r_B) = tau N0 / P``.

    Requires ``d0 < r < r_B``.
    """
    level = tau * N0 / P
    if not ell.at_zero > level:
        raise InfeasibleError("need l(0) > tau N0 / P")
    r_b = pathloss_inverse(ell, level, clamp=True)
    if not (ell.d0 < r < r_b):
        raise InfeasibleError(f"need d0={ell.d0} < r={r} < r_B={r_b}")
    if not M > 0:
        raise InfeasibleError("M must be > 0")
    return N0 / (P * M) * (float(ell(r)) / level - 1.0)


def delta_radius(ell: PathLoss, N0: float, tau: float, r: float) -> float:
    """``l^-1(N0 tau / r) / 2`` for a power level ``r >= N0 tau / l(0)``."""
    level = N0 * tau
    if not r >= level / ell.at_zero:
        raise InfeasibleError("power level must satisfy r >= N0 tau / l(0)")
    return pathloss_inverse(ell, level / r, clamp=True) / 2.0


def gamma_star(ell: PathLoss, N0: float, tau: float, r: float, M: float) -> float:
    """``(N0 / M) (l(delta) / l(2 delta) - 1)``."""
    delta = delta_radius(ell, N0, tau, r)
    far = float(ell(2 * delta))
    if far <= 0:
        raise InfeasibleError("l(2 delta) = 0: ratio undefined")
    if not M > 0:
        raise InfeasibleError("M must be > 0")
    return N0 / M * (float(ell(delta)) / far - 1.0)


def interference_constants(ell: PathLoss, d: int = 2, N0: float | None = None, tau: float | None = None,
                           P: float | None = None, r: float | None = None, M: float | None = None,
                           power_level: float | None = None) -> dict:
    """Evaluate ``K0`` and, when their inputs are given, ``gamma'``, ``gamma*`` and ``delta``.

    Infeasible optional quantities are reported as error strings instead of
    aborting the others.
    """
    k0 = lattice_constant(ell, d)
    out: dict = {"K0": k0.K0, "K0_head": k0.head, "K0_tail": k0.tail, "K0_N": k0.N}
    if None not in (N0, tau, P, r, M):
        try:
            out["gamma_prime"] = gamma_prime(ell, N0, tau, P, r, M)
        except InfeasibleError as exc:
            out["gamma_prime"] = f"infeasible: {exc}"
    if None not in (N0, tau, power_level, M):
        try:
            out["delta"] = delta_radius(ell, N0, tau, power_level)
            out["gamma_star"] = gamma_star(ell, N0, tau, power_level, M)
        except InfeasibleError as exc:
            out["gamma_star"] = f"infeasible: {exc}"
    return out


# radius moment under random powers


@dataclass(frozen=True)
class MomentCheck:
    """Outcome of the ``E[R^(2d-1)]`` evaluation for ``R = l^-1(tau N0 / rho)``.

    Attributes
    ----------
    value : float
        Numeric value (``inf`` when divergence is detected).
    finite : bool
    alpha_beta_ok : bool
        Whether ``alpha * beta > 2d - 1`` for the tail exponent of the power
        law and the decay exponent of the path loss.
    bound : float
        A priori upper bound when one applies, else ``inf``.
    note : str
    """

    value: float
    finite: bool
    alpha_beta_ok: bool
    bound: float
    note: str

    @property
    def label(self) -> str:
        return self.note if self.finite else "divergent"


def theta_moment_check(ell: PathLoss, dist: MarkDistribution, d: int = 2, tau: float = 1.0,
                       N0: float = 1.0, rtol: float = 1e-9, max_doublings: int = 200) -> MomentCheck:
    """Evaluate ``int_0^inf P(rho > tau N0 / l(t^(1/(2d-1)))) dt``.

    The substitution ``t = r^(2d-1)`` gives
    ``int_0^inf (2d-1) r^(2d-2) P(rho > tau N0 / l(r)) dr``, integrated over
    doubling intervals.  The integral is declared finite once a geometric
    extrapolation of the remaining increments falls below `rtol` of the
    running total, and divergent when increments stop shrinking.
    """
    m = 2 * d - 1
    level = tau * N0
    alpha, beta = dist.tail_exponent, ell.decay_exponent
    ab_ok = (alpha * beta > m) if (math.isfinite(alpha) and math.isfinite(beta)) else True

    def g(r):
        with np.errstate(divide="ignore"):
            lv = float(ell(r))
            thr = level / lv if lv > 0 else math.inf
        return m * r ** (m - 1) * float(dist.sf(thr))

    bound, note = math.inf, "finite"
    stop = math.inf
    if math.isfinite(ell.support):
        stop = ell.support
        bound, note = stop**m, "finite (compact support)"
    if math.isfinite(dist.upper):
        reach = pathloss_inverse(ell, level / dist.upper, clamp=True) if dist.upper > 0 else 0.0
        if reach**m < bound:
            bound = reach**m
            if note == "finite":
                note = "finite (bounded power)"
        stop = min(stop, reach)
    if math.isfinite(stop):
        if stop <= 0:
            return MomentCheck(0.0, True, ab_ok, bound, note)
        val, _ = integrate.quad(g, 0.0, stop, limit=400)
        return MomentCheck(float(val), True, ab_ok, bound, note)

    total, _ = integrate.quad(g, 0.0, 1.0, limit=200)
    lo = 1.0
    incs = []
    for _ in range(max_doublings):
        inc, _ = integrate.quad(g, lo, 2 * lo, limit=200)
        total += inc
        incs.append(inc)
        lo *= 2
        if inc == 0.0:
            return MomentCheck(float(total), True, ab_ok, bound, note)
        if len(incs) >= 8:
            ratios = [incs[-k] / incs[-k - 1] for k in range(1, 5) if incs[-k - 1] > 0]
            rho = max(ratios) if ratios else 1.0
            if rho < 0.99 and inc * rho / (1 - rho) < rtol * total:
                return MomentCheck(float(total + inc * rho / (1 - rho)), True, ab_ok, bound, note)
            if min(ratios) >= 0.999 and len(incs) >= 16:
                return MomentCheck(math.inf, False, ab_ok, bound, "divergent")
    return MomentCheck(math.inf, False, ab_ok, bound, "divergent")
