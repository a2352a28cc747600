"""Admissible parameter windows: lambda thresholds, alpha and b ranges, Strichartz pairs."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .errors import LambdaOutOfRange, OutOfRange

# (name, coefficients highest degree first, required sign, dimensions it constrains)
POLYNOMIALS = (
    ("p_2_13_3", (2.0, -13.0, 3.0), +1, (1,)),
    ("p_2_7_1", (2.0, -7.0, 1.0), +1, (2,)),
    ("p_18_39_29_4", (18.0, -39.0, 29.0, -4.0), -1, (3,)),
    ("p_36_78_47_1", (36.0, -78.0, 47.0, -1.0), -1, (3,)),
    ("p_18_51_47_10", (18.0, -51.0, 47.0, -10.0), -1, (3,)),
)
_POLY = {name: coeffs for name, coeffs, _, _ in POLYNOMIALS}


def poly_eval(coeffs, x):
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def bisect_root(coeffs, lo=0.0, hi=0.5, tol=1e-12):
    """Root of a polynomial bracketed by a sign change on [lo, hi]."""
    flo, fhi = poly_eval(coeffs, lo), poly_eval(coeffs, hi)
    if flo == 0.0:
        return lo
    if flo * fhi > 0:
        raise OutOfRange("no sign change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = poly_eval(coeffs, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_n(n):
    if n not in (1, 2, 3):
        raise OutOfRange(f"dimension {n} not in {{1, 2, 3}}")


def lambda_threshold(n):
    """Upper end of the admissible lambda range in dimension n."""
    _check_n(n)
    if n == 1:
        return (13.0 - math.sqrt(145.0)) / 4.0
    if n == 2:
        return (7.0 - math.sqrt(41.0)) / 4.0
    return bisect_root(_POLY["p_36_78_47_1"], 0.0, 0.5)


def threshold_polynomial(n):
    return {1: "p_2_13_3", 2: "p_2_7_1", 3: "p_36_78_47_1"}[n]


def _check_lambda(n, lam):
    if not (0.0 <= lam < lambda_threshold(n)):
        raise LambdaOutOfRange(f"lambda={lam} outside [0, {lambda_threshold(n):.6f}) for n={n}")


def alpha_max(n, lam):
    _check_n(n)
    _check_lambda(n, lam)
    if n in (1, 2):
        return 1.0
    return 0.5 + 1.0 / (3.0 * (1.0 - lam)) - 0.75 * lam


@dataclass(frozen=True)
class BWindow:
    eq16: tuple
    strict: tuple
    discrepancy: bool
    empty: bool


def b_window(n, lam, alpha):
    """Rate windows for b: the closed-form one and the stricter one the estimates need.

    The strict lower end is max(closed-form lower end, 1/2 + lam); ``discrepancy`` marks
    the cases where the two lower ends differ.  An empty window is reported,
    not raised.
    """
    amax = alpha_max(n, lam)
    if not (0.0 < alpha <= amax):
        raise OutOfRange(f"alpha={alpha} outside (0, {amax}]")
    lo16 = (n * (-2.0 * lam**2 + lam + 1.0) + 8.0 * lam) / 4.0
    hi = lam + alpha * (1.0 - 2.0 * lam)
    lo_strict = max(lo16, 0.5 + lam)
    return BWindow((lo16, hi), (lo_strict, hi), lo_strict > lo16, lo_strict >= hi)


def k_upper(n, lam):
    return 1.0 + 2.0 / (n * (1.0 - lam))


def admissible_pair(n, lam, alpha_n, alpha=None):
    """beta_n, k1 and the verdict map for a Strichartz exponent alpha_n > 2."""
    _check_n(n)
    if not alpha_n > 2:
        raise OutOfRange(f"alpha_n={alpha_n} must exceed 2")
    inv = 0.0 if math.isinf(alpha_n) else 1.0 / alpha_n
    k1 = n * (0.5 - inv)
    beta_n = 2.0 / k1
    verdicts = {
        "alpha_n_gt_n_rho": alpha_n > 2.0 / (1.0 - lam),
        "inv_alpha_n_lt_half_1_minus_lambda": inv < (1.0 - lam) / 2.0,
        "k1_gt_n_lambda_half": k1 > n * lam / 2.0,
        "sobolev_2k1_lt_n": 2.0 * k1 < n,
    }
    if alpha is not None:
        verdicts["k1_plus_2alpha_lt_bound"] = k1 + 2.0 * alpha < k_upper(n, lam)
    return beta_n, k1, verdicts


def default_alpha_n(n, lam, alpha):
    """Midpoint in 1/alpha_n of the interval allowed by all pair conditions."""
    upper = (1.0 - lam) / 2.0
    lower = max(0.0, 0.5 - (k_upper(n, lam) - 2.0 * alpha) / n)
    mid = 0.5 * (lower + upper)
    return math.inf if mid <= 0 else 1.0 / mid


def default_alpha(n, lam):
    """Three quarters of the way from the smallest alpha that opens the strict
    b window up to alpha_max."""
    amax = alpha_max(n, lam)
    lo16 = (n * (-2.0 * lam**2 + lam + 1.0) + 8.0 * lam) / 4.0
    a_open = max(0.0, (max(lo16, 0.5 + lam) - lam) / (1.0 - 2.0 * lam))
    if a_open >= amax:
        return amax
    return a_open + 0.75 * (amax - a_open)


def cubic_ledger(n, lam):
    """Every polynomial condition evaluated at lam, with its verdict."""
    if not 0.0 <= lam < 0.5:
        raise OutOfRange(f"lambda={lam} outside [0, 1/2)")
    _check_n(n)
    out = {}
    for name, coeffs, sign, dims in POLYNOMIALS:
        v = poly_eval(coeffs, lam)
        out[name] = {"value": v, "satisfied": v * sign > 0, "relevant": n in dims}
    return out


@dataclass
class ParameterReport:
    n: int
    lam: float
    rho_L: float
    alpha: float
    alpha_max: float
    b_window_eq16: tuple
    b_window_strict: tuple
    b_discrepancy: bool
    b_empty: bool
    beta_n: float
    alpha_n: float
    k1: float
    k_upper: float
    cubic_values: dict
    verdicts: dict = field(default_factory=dict)

    @property
    def admissible(self):
        return all(self.verdicts.values())

    def rows(self):
        """Flat (key, value) pairs in a fixed order."""
        rows = [
            ("n", self.n),
            ("lambda", self.lam),
            ("rho_L", self.rho_L),
            ("alpha", self.alpha),
            ("alpha_max", self.alpha_max),
            ("b_lo_eq16", self.b_window_eq16[0]),
            ("b_hi", self.b_window_eq16[1]),
            ("b_lo_strict", self.b_window_strict[0]),
            ("b_discrepancy", self.b_discrepancy),
            ("b_empty", self.b_empty),
            ("beta_n", self.beta_n),
            ("alpha_n", self.alpha_n),
            ("k1", self.k1),
            ("k_upper", self.k_upper),
        ]
        for name, entry in self.cubic_values.items():
            rows.append((f"{name}_value", entry["value"]))
            rows.append((f"{name}_ok", entry["satisfied"]))
        for name, ok in self.verdicts.items():
            rows.append((f"verdict_{name}", ok))
        rows.append(("admissible", self.admissible))
        return rows

    def to_keyvalue(self):
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.rows())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        rows = self.rows()
        w.writerow([k for k, _ in rows])
        w.writerow([_fmt(v) for _, v in rows])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parameter_report(n, lam, alpha=None, alpha_n=None):
    """Evaluate every condition at (n, lam); raises LambdaOutOfRange above the threshold."""
    _check_lambda(n, lam)
    amax = alpha_max(n, lam)
    alpha = default_alpha(n, lam) if alpha is None else alpha
    win = b_window(n, lam, alpha)
    alpha_n = default_alpha_n(n, lam, alpha) if alpha_n is None else alpha_n
    beta_n, k1, verdicts = admissible_pair(n, lam, alpha_n, alpha)
    ledger = cubic_ledger(n, lam)
    verdicts["lambda_below_threshold"] = lam < lambda_threshold(n)
    verdicts["b_window_nonempty"] = not win.empty
    for name, entry in ledger.items():
        if entry["relevant"]:
            verdicts[f"{name}_sign"] = entry["satisfied"]
    return ParameterReport(
        n=n,
        lam=lam,
        rho_L=2.0 / (n * (1.0 - lam)),
        alpha=alpha,
        alpha_max=amax,
        b_window_eq16=win.eq16,
        b_window_strict=win.strict,
        b_discrepancy=win.discrepancy,
        b_empty=win.empty,
        beta_n=beta_n,
        alpha_n=alpha_n,
        k1=k1,
        k_upper=k_upper(n, lam),
        cubic_values=ledger,
        verdicts=verdicts,
    )
