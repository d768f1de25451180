"""Path-loss profiles, their generalized inverse, and the shifted profile."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DivergenceError, UnreachableError


@dataclass(frozen=True)
class PathLoss:
    """Nonincreasing signal attenuation ``r -> l(r)`` with ``l(0) <= 1``.

    Build instances with :meth:`power_law_one_plus`, :meth:`min_power_law`,
    :meth:`compact_support` or :meth:`table`.

    Attributes
    ----------
    kind : str
    params : tuple
    d : int
        Dimension used for the integrability check and the shifted profile.
    d0 : float
        Width of the flat prefix ``[0, d0]``.
    """

    kind: str
    params: tuple
    d: int = 2
    d0: float = 0.0
    validate: bool = True

    def __post_init__(self):
        if self.kind in ("one_plus", "min_power"):
            if not self.params[0] > 0:
                raise ValueError("exponent must be > 0")
        elif self.kind == "compact":
            base, rmax = self.params
            if not rmax > 0:
                raise ValueError("support radius must be > 0")
            if base.kind == "compact":
                raise ValueError("nested compact profiles are not supported")
        elif self.kind == "table":
            knots, vals = (np.asarray(a, float) for a in self.params)
            if knots.ndim != 1 or knots.shape != vals.shape or knots.size < 2:
                raise ValueError("table needs matching 1-D knots and values")
            if knots[0] != 0 or (np.diff(knots) <= 0).any():
                raise ValueError("table knots must start at 0 and increase")
            if (np.diff(vals) > 0).any() or vals[0] > 1 or vals[-1] < 0:
                raise ValueError("table values must be nonincreasing in [0, 1]")
            if vals[-1] != 0:
                raise ValueError("table must end at value 0 (compact support)")
        else:
            raise ValueError(f"unknown path-loss kind {self.kind!r}")
        if self.validate and not self.integrable():
            raise DivergenceError(
                f"path loss {self.kind}{self.params} is not integrable against r^(d-1) in d={self.d}"
            )

    # constructors
    @classmethod
    def power_law_one_plus(cls, p: float, d: int = 2, validate: bool = True) -> "PathLoss":
        """``l(r) = (1 + r)^-p``."""
        return cls("one_plus", (float(p),), d, 0.0, validate)

    @classmethod
    def min_power_law(cls, p: float, d: int = 2, validate: bool = True) -> "PathLoss":
        """``l(r) = min(1, r^-p)``, flat on ``[0, 1]``."""
        return cls("min_power", (float(p),), d, 1.0, validate)

    @classmethod
    def compact_support(cls, base: "PathLoss", r_max: float) -> "PathLoss":
        """``base(r) * 1{r < r_max}``."""
        return cls("compact", (base, float(r_max)), base.d, base.d0, False)

    @classmethod
    def table(cls, knots, values, d: int = 2) -> "PathLoss":
        """Monotone piecewise-linear interpolation of samples, zero past the last knot."""
        knots = tuple(float(k) for k in knots)
        values = tuple(float(v) for v in values)
        v = np.asarray(values)
        flat = np.nonzero(v < v[0])[0]
        d0 = knots[flat[0] - 1] if flat.size else knots[-1]
        return cls("table", (knots, values), d, d0, False)

    # evaluation
    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if r.ndim == 0:
            # numpy's 0-d and vectorized pow differ in the last ulp; always
            # take the array path so every caller sees the same values
            return self(r.reshape(1))[0]
        k, p = self.kind, self.params
        if k == "one_plus":
            with np.errstate(over="ignore"):
                return (1.0 + r) ** (-p[0])
        if k == "min_power":
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(r <= 1.0, 1.0, r ** (-p[0]))
        if k == "compact":
            return np.where(r < p[1], p[0](r), 0.0)
        return np.interp(r, p[0], p[1], right=0.0)

    @property
    def at_zero(self) -> float:
        return float(self(0.0))

    @property
    def support(self) -> float:
        """Right end of the support (``inf`` if not compact)."""
        if self.kind == "compact":
            return self.params[1]
        if self.kind == "table":
            return self.params[0][-1]
        return math.inf

    @property
    def decay_exponent(self) -> float:
        """Largest ``beta`` with ``l(r) <= C r^-beta`` eventually (``inf`` if compact)."""
        if self.kind in ("one_plus", "min_power"):
            return self.params[0]
        return math.inf

    def integrable(self) -> bool:
        """Numerically check ``int_0^inf r^(d-1) l(r) dr < inf``.

        Compact profiles are integrable.  Otherwise the log-log slope of
        ``l`` far out must be below ``-d``.
        """
        if math.isfinite(self.support):
            return True
        r1, r2 = 1e6, 2e6
        v1, v2 = float(self(r1)), float(self(r2))
        if v2 == 0.0:
            return True
        slope = math.log(v2 / v1) / math.log(r2 / r1)
        return slope < -self.d - 1e-9

    def with_dimension(self, d: int) -> "PathLoss":
        if self.kind == "compact":
            return PathLoss.compact_support(self.params[0].with_dimension(d), self.params[1])
        return PathLoss(self.kind, self.params, d, self.d0, self.validate)


def pathloss_eval(ell: PathLoss, r):
    """Evaluate the profile; `r` must be nonnegative."""
    r = np.asarray(r, dtype=float)
    if (r < 0).any():
        raise ValueError("distance must be >= 0")
    return ell(r)


def _bisect_inverse(ell: PathLoss, y: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # smallest float r with l(r) <= y, given l(0) > y and l(hi) <= y;
    # bisection on the bit patterns, which order nonnegative floats
    lo_b = np.zeros(y.shape, np.int64)
    hi_b = hi.astype(np.float64).view(np.int64).copy()
    while True:
        active = hi_b - lo_b > 1
        if not active.any():
            break
        mid_b = lo_b + (hi_b - lo_b) // 2
        below = ell(mid_b.view(np.float64)) <= y
        hi_b = np.where(active & below, mid_b, hi_b)
        lo_b = np.where(active & ~below, mid_b, lo_b)
    return hi_b.view(np.float64)


def pathloss_inverse(ell: PathLoss, y, clamp: bool = False):
    """Generalized inverse ``inf{r >= 0 : l(r) <= y}``.

    For ``y >= l(0)`` the result is 0.  The returned float is the smallest
    representable distance with ``l(r) <= y``, so ``dist < inverse`` is
    exactly equivalent to ``l(dist) > y`` for the evaluated profile.

    Parameters
    ----------
    ell : PathLoss
    y : float or array
        Signal level, must be > 0.
    clamp : bool
        For compactly supported profiles, levels below the smallest positive
        value attained are unreachable; with ``clamp=True`` they map to the
        support radius instead of raising.

    Raises
    ------
    ValueError
        If any ``y <= 0``.
    UnreachableError
        For unreachable levels without `clamp`.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if (y_arr <= 0).any() or np.isnan(y_arr).any():
        raise ValueError("signal level must be > 0")
    out = np.zeros_like(y_arr)
    l0 = ell.at_zero
    need = y_arr < l0
    if need.any():
        yy = y_arr[need]
        supp = ell.support
        if math.isfinite(supp):
            hi = np.full_like(yy, supp)
            # smallest level reached just before the support ends
            floor_val = float(ell(np.nextafter(supp, 0.0)))
            unreachable = yy < floor_val
            if unreachable.any() and not clamp:
                raise UnreachableError(
                    f"level {yy[unreachable].min():.6g} below the minimum positive value "
                    f"{floor_val:.6g} of the compact profile"
                )
        else:
            hi = np.ones_like(yy)
            for _ in range(2100):
                grow = ell(hi) > yy
                if not grow.any():
                    break
                hi = np.where(grow, hi * 2, hi)
            if (ell(hi) > yy).any():
                raise ValueError("signal level too small to invert")
        out[need] = _bisect_inverse(ell, yy, hi)
    return out if np.ndim(y) else float(out[0])


def shifted_pathloss(ell: PathLoss, a: float, r):
    """``l_a(r) = l(0) 1{r < a sqrt(d)/2} + l(r - a sqrt(d)/2) 1{r >= a sqrt(d)/2}``."""
    if a < 0:
        raise ValueError("shift must be >= 0")
    r = np.asarray(r, dtype=float)
    h = a * math.sqrt(ell.d) / 2.0
    return np.where(r < h, ell.at_zero, ell(np.maximum(r - h, 0.0)))


def interference_tail_bound(ell: PathLoss, lam: float, radius: float) -> float:
    """``lam * |S^{d-1}| * int_radius^inf r^(d-1) l(r) dr``.

    Expected interference at a point from a homogeneous Poisson process
    beyond distance `radius`; the bias incurred by truncating at a padded
    window of that width.
    """
    d = ell.d
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    upper = ell.support
    if radius >= upper:
        return 0.0
    val, _ = integrate.quad(lambda r: r ** (d - 1) * float(ell(r)), radius, upper, limit=200)
    return lam * sphere * val
