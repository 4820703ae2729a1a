"""Second-order z-domain small-signal model of the regulator loop.

The comparator is a unit-gain sampler, the barrel shifter an integrator
``k_forward / (z - 1)`` and the output node a ZOH-discretized RC pole::

    P(z) = k_out * (1 - alpha) / f1 / (z - alpha),   alpha = exp(-f1 * T)

Closing the loop with unity feedback gives

    H(z) = K / (z**2 - (1 + alpha) z + K (1 - alpha) + alpha)

with ``K = k_forward * k_out * (1 - alpha) / f1``.  ``k_out = i_dev / c_load``
(DC proportionality constant ``1 / c_load``), so one ON device settles to
``i_dev * (r_load || r_pmos)`` volts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import LdoDesign, ValidationError

_BISECT_RTOL = 1e-9


@dataclass(frozen=True)
class ClosedLoopModel:
    """Linearized loop at one operating point.

    Attributes:
        t_sample: clock period T (s).
        f1: load-pole rate (1/s).
        alpha: open-loop plant pole ``exp(-f1 * T)``.
        k_out: plant gain ``i_dev / c_load`` (V/s).
        k_loop: dimensionless open-loop gain K.
    """

    t_sample: float
    f1: float
    alpha: float
    k_out: float
    k_loop: float

    @classmethod
    def from_alpha(cls, alpha: float, k_loop: float, t_sample: float = 1.0) -> "ClosedLoopModel":
        """Build a model directly from ``(alpha, K)``, with ``k_forward = 1`` implied."""
        if not 0.0 < alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {alpha}", "alpha")
        f1 = -math.log(alpha) / t_sample
        k_out = k_loop * f1 / (1.0 - alpha)
        return cls(t_sample=t_sample, f1=f1, alpha=alpha, k_out=k_out, k_loop=k_loop)

    def with_gain(self, k_loop: float) -> "ClosedLoopModel":
        """Same plant pole with a different open-loop gain (``k_forward = 1`` implied)."""
        return ClosedLoopModel(self.t_sample, self.f1, self.alpha,
                               k_loop * self.f1 / (1.0 - self.alpha), k_loop)

    @property
    def char_poly(self) -> list[float]:
        """Denominator of H(z), highest power first."""
        a = self.alpha
        return [1.0, -(1.0 + a), self.k_loop * (1.0 - a) + a]

    @property
    def loop_drive(self) -> float:
        """``k_forward * k_out`` recovered from K (V/s per comparator unit)."""
        return self.k_loop * self.f1 / (1.0 - self.alpha)

    @property
    def device_step(self) -> float:
        """DC output change from one actuation step, ``k_forward * k_out / f1`` (V)."""
        return self.k_loop / (1.0 - self.alpha)

    @property
    def fs_ratio(self) -> float:
        """fs / f1 with f1 as an inverse time constant."""
        return 1.0 / (self.f1 * self.t_sample)

    @property
    def fs_ratio_hz(self) -> float:
        """fs / (f1 / 2 pi), i.e. the ratio against the load pole in Hz."""
        return 2.0 * math.pi * self.fs_ratio

    def to_dict(self) -> dict:
        return {
            "t_sample": self.t_sample,
            "f1": self.f1,
            "alpha": self.alpha,
            "k_out": self.k_out,
            "k_loop": self.k_loop,
            "char_poly": self.char_poly,
        }


def build_model(design: LdoDesign) -> ClosedLoopModel:
    """Linearize ``design`` around its nominal operating point."""
    if not isinstance(design, LdoDesign):
        raise ValidationError("build_model expects an LdoDesign", "design")
    t = design.t_sample
    f1 = design.load_pole
    alpha = math.exp(-f1 * t)
    k_out = design.i_dev / design.c_load
    # (1 - e^-x) / f1 without cancellation for small f1*T
    gain_per_k_out = -math.expm1(-f1 * t) / f1
    k_loop = design.k_forward * k_out * gain_per_k_out
    return ClosedLoopModel(t_sample=t, f1=f1, alpha=alpha, k_out=k_out, k_loop=k_loop)


def _quadratic_roots(a1: float, a0: float) -> tuple[complex, complex]:
    """Roots of z**2 + a1 z + a0, computed without catastrophic cancellation."""
    disc = a1 * a1 - 4.0 * a0
    if disc >= 0.0:
        sq = math.sqrt(disc)
        q = -0.5 * (a1 + math.copysign(sq, a1)) if a1 != 0.0 else 0.5 * sq
        if q == 0.0:
            r1 = r2 = 0.0
        else:
            r1, r2 = q, a0 / q
        return complex(r1), complex(r2)
    re = -0.5 * a1
    im = 0.5 * math.sqrt(-disc)
    return complex(re, -im), complex(re, im)


def _ordered(p1: complex, p2: complex) -> tuple[complex, complex]:
    return tuple(sorted((p1, p2), key=lambda p: (p.real, p.imag)))  # type: ignore[return-value]


def closed_loop_poles(model: ClosedLoopModel) -> tuple[complex, complex]:
    """Both closed-loop poles, ordered by real part then imaginary part."""
    _, a1, a0 = model.char_poly
    return _ordered(*_quadratic_roots(a1, a0))


def jury_table_stable(coeffs) -> bool:
    """General Jury test: True iff every root of ``coeffs`` lies strictly inside |z| = 1.

    ``coeffs`` are real polynomial coefficients, highest power first.
    """
    a = [float(c) for c in coeffs]
    while a and a[0] == 0.0:
        a.pop(0)
    n = len(a) - 1
    if n < 1:
        return True
    if a[0] < 0:
        a = [-c for c in a]
    p_at_1 = sum(a)
    p_at_m1 = sum(c * (-1) ** (n - i) for i, c in enumerate(a))
    if not p_at_1 > 0.0:
        return False
    if not (-1) ** n * p_at_m1 > 0.0:
        return False
    # Jury/Schur-Cohn row reduction on ascending coefficients c_0 .. c_m:
    # |c_0| < |c_m|, then recurse on (c_m p(z) - c_0 z^m p(1/z)) / z
    row = a[::-1]
    if n == 2:
        # P(1) > 0, (-1)^n P(-1) > 0 and |a0| < a2 are the complete second-order
        # conditions; the reduced row would only re-test them with cancellation
        return abs(row[0]) < abs(row[2])
    while len(row) > 1:
        m = len(row) - 1
        if not abs(row[0]) < abs(row[m]):
            return False
        row = [row[m] * row[k] - row[0] * row[m - k] for k in range(1, m + 1)]
    return True


def jury_stable(model: ClosedLoopModel) -> bool:
    """Strict Schur stability of the closed loop (reduces to ``0 < K < 1``)."""
    return jury_table_stable(model.char_poly)


def _max_pole_modulus(alpha: float, k: float) -> float:
    a1 = -(1.0 + alpha)
    a0 = k * (1.0 - alpha) + alpha
    p1, p2 = _quadratic_roots(a1, a0)
    return max(abs(p1), abs(p2))


def _discriminant(alpha: float, k: float) -> float:
    # (1 + alpha)^2 - 4 (K (1 - alpha) + alpha), factored to avoid cancellation near alpha = 1
    return (1.0 - alpha) * (1.0 - alpha - 4.0 * k)


def _bisect(f, lo: float, hi: float, rtol: float = _BISECT_RTOL) -> float:
    """Sign-change bisection with f(lo) <= 0 < f(hi), run to float resolution."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * 1e-3 * abs(hi):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RootLocus:
    points: list[tuple[float, complex, complex]] = field(default_factory=list)
    k_breakaway: float = math.nan
    k_unstable: float = math.nan
    alpha: float = math.nan

    @property
    def breakaway_point(self) -> float:
        """Location of the double real pole on the z-plane."""
        return 0.5 * (1.0 + self.alpha)


def root_locus(model: ClosedLoopModel, k_max: float, steps: int) -> RootLocus:
    """Pole pairs on a uniform gain grid over ``[0, k_max]`` plus the two critical gains.

    The breakaway gain is the root of the discriminant and the instability
    gain the root of ``max|pole| - 1``; both are located by bisection rather
    than by their closed forms.
    """
    if not k_max > 0:
        raise ValidationError("k_max must be positive", "k_max")
    if int(steps) != steps or steps < 2:
        raise ValidationError("steps must be an integer >= 2", "steps")
    alpha = model.alpha
    points = []
    for k in np.linspace(0.0, k_max, int(steps)):
        k = float(k)
        p1, p2 = _ordered(*_quadratic_roots(-(1.0 + alpha), k * (1.0 - alpha) + alpha))
        points.append((k, p1, p2))

    # discriminant falls through zero at breakaway
    hi = 1.0
    while _discriminant(alpha, hi) >= 0.0:
        hi *= 2.0
    k_break = _bisect(lambda k: -_discriminant(alpha, k), 0.0, hi)

    # past breakaway |pole| = sqrt(a0), monotone in K
    lo = k_break
    hi = max(2.0 * k_break, 1.0)
    while _max_pole_modulus(alpha, hi) < 1.0:
        hi *= 2.0
    k_unst = _bisect(lambda k: _max_pole_modulus(alpha, k) - 1.0, lo, hi)
    return RootLocus(points=points, k_breakaway=k_break, k_unstable=k_unst, alpha=alpha)


def _power_divided_difference(p1: complex, p2: complex, n: np.ndarray) -> np.ndarray:
    """``(p1**n - p2**n) / (p1 - p2)`` evaluated without cancellation (``n * p**(n-1)`` if equal)."""
    if p1.imag != 0.0 or p2.imag != 0.0:
        # conjugate pair r e^{+-j theta}: r^(n-1) sin(n theta) / sin(theta)
        r = abs(p1)
        theta = abs(math.atan2(p1.imag, p1.real))
        return r ** (n - 1.0) * np.sin(n * theta) / math.sin(theta)
    x1, x2 = p1.real, p2.real
    if x1 == x2:
        return n * x1 ** (n - 1.0)
    if x1 * x2 <= 0.0:
        return (x1 ** n - x2 ** n) / (x1 - x2)
    if abs(x1) > abs(x2):
        x1, x2 = x2, x1
    # p2^(n-1) (q^n - 1) / (q - 1), q = p1 / p2 in (0, 1]
    qm1 = (x1 - x2) / x2
    return x2 ** (n - 1.0) * np.expm1(n * math.log1p(qm1)) / qm1


@dataclass(frozen=True)
class StepResponse:
    recurrence: np.ndarray
    closed_form: np.ndarray
    final_value: float


def linear_step_response(model: ClosedLoopModel, n_steps: int) -> StepResponse:
    """Unit-step response of H(z) by difference equation and by partial fractions.

    The difference equation is ``y[n] = (1+alpha) y[n-1] - a0 y[n-2] + K u[n-2]``.
    The closed form expands ``K z / ((z-1)(z-p1)(z-p2))``.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValidationError("n_steps must be an integer >= 1", "n_steps")
    n_steps = int(n_steps)
    _, a1, a0 = model.char_poly
    k = model.k_loop

    rec = np.zeros(n_steps)
    y1 = y2 = 0.0
    for i in range(n_steps):
        y = -a1 * y1 - a0 * y2 + (k if i >= 2 else 0.0)
        rec[i] = y
        y2, y1 = y1, y

    h1 = 1.0 + a1 + a0
    final = k / h1 if h1 != 0.0 else math.inf
    n = np.arange(n_steps)
    if k == 0.0:
        closed = np.zeros(n_steps)
    else:
        p1, p2 = _quadratic_roots(a1, a0)
        # y[n] = A + B p1^n + C p2^n.  B p1^n + C p2^n = K g[p1, p2] with
        # g(p) = p^n / (p - 1); expanding the divided difference keeps it
        # accurate when p1 and p2 nearly coincide.
        a_res = k / ((1.0 - p1) * (1.0 - p2))
        d_n = _power_divided_difference(p1, p2, n)
        g12 = d_n / (p2 - 1.0) - np.power(p1, n) / ((p1 - 1.0) * (p2 - 1.0))
        closed = (a_res + k * g12).real
    return StepResponse(recurrence=rec, closed_form=np.asarray(closed, dtype=float),
                        final_value=final)


def overshoot_to_pm(overshoot_fraction: float) -> tuple[float, float]:
    """Damping ratio and phase-margin estimate from a fractional overshoot.

    Inverts ``Os = exp(-pi zeta / sqrt(1 - zeta**2))`` and applies the
    ``PM ~= 100 * zeta`` rule of thumb.  Returns ``(zeta, pm_degrees)``.
    """
    os_ = float(overshoot_fraction)
    if not 0.0 < os_ < 1.0:
        raise ValidationError(f"overshoot fraction must lie in (0, 1), got {os_}",
                              "overshoot_fraction")
    ln_os = math.log(os_)
    zeta = -ln_os / math.sqrt(math.pi ** 2 + ln_os ** 2)
    return zeta, 100.0 * zeta


def pm_to_overshoot(zeta: float) -> float:
    """Forward relation, overshoot of a second-order system with damping ``zeta``."""
    if not 0.0 <= zeta < 1.0:
        raise ValidationError("zeta must lie in [0, 1)", "zeta")
    return math.exp(-math.pi * zeta / math.sqrt(1.0 - zeta * zeta))
