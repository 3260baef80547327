"""Special functions backing the significance tests.

Self-contained regularized incomplete beta via the standard continued
fraction (modified Lentz iteration), plus the t and F tail probabilities
built on it. math.lgamma supplies the log-beta prefactor.
"""

import math

from .util import AuditError

_MAX_ITER = 300
_EPS = 1e-14
_FPMIN = 1e-300


class NumericsError(AuditError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericsError(f"incomplete beta failed to converge "
                        f"(a={a}, b={b}, x={x})")


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise NumericsError(f"shape parameters must be positive (a={a}, b={b})")
    if not 0.0 <= x <= 1.0:
        raise NumericsError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    # converges fastest below the distribution's bulk; use symmetry above
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with df degrees of freedom."""
    if df <= 0:
        raise NumericsError(f"degrees of freedom must be positive, got {df}")
    if math.isnan(t) or math.isinf(t):
        raise NumericsError(f"non-finite t statistic: {t}")
    if t == 0.0:
        return 1.0
    return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail P(F >= f) for the F distribution with (d1, d2) df."""
    if d1 <= 0 or d2 <= 0:
        raise NumericsError(f"degrees of freedom must be positive "
                            f"({d1}, {d2})")
    if math.isnan(f) or math.isinf(f):
        raise NumericsError(f"non-finite F statistic: {f}")
    if f <= 0.0:
        return 1.0
    return reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
