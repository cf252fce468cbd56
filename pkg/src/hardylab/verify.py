"""Numerical verification of the weighted inequalities and the two scalar
inequalities they rest on.

A verification compares one weighted integral of a test function against one
or two weighted integrals of its derivative; the verdict accounts for the
quadrature error bounds, and an indeterminate first pass is retried once at
a hundredfold tighter tolerance before reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InadmissibleInstanceError, InvalidTestFunctionError
from .expr import (
    Expr,
    Interval,
    abs_,
    compile_fn,
    differentiate,
    div,
    mul,
    pow_,
    singular_points,
    to_string,
)
from .instance import HardyInstance, build_measures, check_admissibility
from .quadrature import (
    DEFAULT_TOL,
    DEFAULT_TOL_ABS,
    STATUS_DIVERGENT,
    QuadratureResult,
    ZERO_RESULT,
    integrate,
)
from .spaces import modular

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"


@dataclass
class TestFunction:
    """Compactly supported Lipschitz function with an explicit derivative.

    ``edge_exponent`` is the decay rate at the support boundary; it controls
    which inequalities the function is admissible for.  The function
    evaluates to exactly 0 outside its support.
    """

    kind: str
    support: Interval
    edge_exponent: float
    params: dict
    _f: callable = field(repr=False)
    _df: callable = field(repr=False)
    split_points: tuple = ()

    def __call__(self, x: float) -> float:
        if not self.support.lo < x < self.support.hi:
            return 0.0
        return self._f(x)

    def derivative(self, x: float) -> float:
        if not self.support.lo < x < self.support.hi:
            return 0.0
        return self._df(x)

    def validate(self, samples: int = 512):
        if not self.support.finite:
            raise InvalidTestFunctionError("support must be compact")
        xs = self.support.midpoint_grid(samples)
        vals = [self(x) for x in xs]
        if any(v < 0 for v in vals):
            raise InvalidTestFunctionError(f"{self.kind} takes negative values")
        slopes = [abs(self.derivative(x)) for x in xs]
        if not all(map(math.isfinite, slopes)):
            raise InvalidTestFunctionError(f"{self.kind} has unbounded slope")
        return self


def power_bump(center: float, halfwidth: float, height: float = 1.0, k: float = 3.0) -> TestFunction:
    """height * (1 - ((x-center)/halfwidth)^2)_+^k, edge exponent k."""
    if halfwidth <= 0 or height < 0 or k < 1:
        raise InvalidTestFunctionError("power bump needs halfwidth > 0, height >= 0, k >= 1")
    m, r, c = float(center), float(halfwidth), float(height)

    def f(x):
        s = (x - m) / r
        return c * (1.0 - s * s) ** k

    def df(x):
        s = (x - m) / r
        return c * k * (1.0 - s * s) ** (k - 1.0) * (-2.0 * s / r)

    return TestFunction(
        "power-bump", Interval(m - r, m + r), k,
        {"center": m, "halfwidth": r, "height": c, "k": k},
        f, df, split_points=(m,),
    ).validate()


def tent(center: float, halfwidth: float, height: float = 1.0) -> TestFunction:
    """Piecewise-linear hat; edge exponent 1."""
    m, r, c = float(center), float(halfwidth), float(height)

    def f(x):
        return c * (1.0 - abs(x - m) / r)

    def df(x):
        return -c / r if x > m else (c / r if x < m else 0.0)

    return TestFunction(
        "tent", Interval(m - r, m + r), 1.0,
        {"center": m, "halfwidth": r, "height": c},
        f, df, split_points=(m,),
    ).validate()


def spline_bump(support: Interval, knot_values, rng=None) -> TestFunction:
    """Square of a clamped cubic spline through random interior knots.

    Squaring keeps the function nonnegative and C^1 with edge exponent 4
    (value and slope both vanish at the support boundary).
    """
    values = np.asarray(knot_values, dtype=float)
    n = len(values)
    xs = np.linspace(support.lo, support.hi, n + 2)
    ys = np.concatenate([[0.0], values, [0.0]])
    s = CubicSpline(xs, ys, bc_type="clamped")
    ds = s.derivative()

    def f(x):
        v = float(s(x))
        return v * v

    def df(x):
        return 2.0 * float(s(x)) * float(ds(x))

    return TestFunction(
        "spline-bump", support, 4.0,
        {"support": [support.lo, support.hi], "knot_values": values.tolist()},
        f, df, split_points=tuple(float(x) for x in xs[1:-1]),
    ).validate()


def from_expr(e: Expr, support: Interval, edge_exponent: float) -> TestFunction:
    fn = compile_fn(e)
    dfn = compile_fn(differentiate(e))
    return TestFunction(
        "custom", support, float(edge_exponent),
        {"expr": to_string(e)},
        fn, dfn, split_points=tuple(singular_points(e, support)),
    ).validate()


@dataclass
class VerificationReport:
    lhs: QuadratureResult
    rhs_main: QuadratureResult
    rhs_log: QuadratureResult
    margin: float
    verdict: str
    retried: bool = False

    @property
    def combined_error(self) -> float:
        return self.lhs.error_bound + self.rhs_main.error_bound + self.rhs_log.error_bound


def _verdict(lhs, rhs_main, rhs_log):
    # max-depth results keep honest error bounds and enter the margin
    # comparison; a suspected divergence makes the values untrustworthy
    margin = (rhs_main.value + rhs_log.value) - lhs.value
    cb = lhs.error_bound + rhs_main.error_bound + rhs_log.error_bound
    if STATUS_DIVERGENT in (lhs.status, rhs_main.status, rhs_log.status):
        return margin, INDETERMINATE
    if margin > cb or (margin == 0.0 and cb == 0.0):
        return margin, PASS
    if margin < -cb:
        return margin, FAIL
    return margin, INDETERMINATE


# ---------------------------------------------------------------------------
# scalar inequalities


def check_young(s1: float, s2: float, p: float, tau: float) -> float:
    """RHS - LHS of the weighted Young inequality
    s1 s2^(p-1) <= s1^p / (p tau^(p-1)) + (p-1)/p tau s2^p.

    Both sides are assembled from the same x * x^(p-1) products, so the
    equality case (s1 = s2, tau = 1, p = 2) cancels exactly."""
    if s1 < 0 or s2 < 0 or not 1.0 < p or tau <= 0:
        raise ValueError("need s1, s2 >= 0, p > 1, tau > 0")
    lhs = s1 * s2 ** (p - 1.0)
    s1_p = s1 * s1 ** (p - 1.0)
    s2_p = s2 * s2 ** (p - 1.0)
    rhs = s1_p / (p * tau ** (p - 1.0)) + (p - 1.0) / p * tau * s2_p
    return rhs - lhs


def check_sum_power(s1: float, s2: float, p: float) -> float:
    """RHS - LHS of (s1+s2)^p <= 2^((p-1) chi[s1 != 0]) (s1^p + s2^p);
    the factor is exactly 1 when s1 == 0."""
    if s1 < 0 or s2 < 0 or not 1.0 < p:
        raise ValueError("need s1, s2 >= 0, p > 1")
    lhs = (s1 + s2) ** p
    factor = 2.0 ** (p - 1.0) if s1 != 0.0 else 1.0
    return factor * (s1 ** p + s2 ** p) - lhs


# ---------------------------------------------------------------------------
# the two weighted inequalities


def _require_support_inside(tf: TestFunction, domain: Interval):
    if not (domain.lo < tf.support.lo and tf.support.hi < domain.hi):
        raise InvalidTestFunctionError(
            "test function support must lie strictly inside the domain"
        )


def _derivative_view(tf: TestFunction):
    g = lambda x: tf.derivative(x)
    g.support = tf.support
    g.split_points = tf.split_points
    return g


def _tlogt_view(tf: TestFunction):
    def g(x):
        v = tf(x)
        if v <= 0.0:
            return 0.0  # t log t extended by 0 at t = 0
        return v * math.log(v)

    # t log t vanishes again at t = 1; |g|^p has a kink wherever tf crosses
    # 1, so those crossings become quadrature splits
    from .expr import _fn_zeros

    xs = tf.support.midpoint_grid(512)
    crossings, _ = _fn_zeros(lambda x: tf(x) - 1.0, xs)
    g.support = tf.support
    g.split_points = tuple(sorted(set(tf.split_points) | set(crossings)))
    return g


def verify_caccioppoli(inst: HardyInstance, phi: TestFunction, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Compare the instance's left weight integrated against ``phi`` with the
    gradient-side integral of |phi'|^p phi^(1-p).

    Requires edge exponent strictly above p_plus - 1 so the right side is
    integrable at the support boundary; violating functions are rejected.
    """
    if phi.edge_exponent <= inst.vp.p_plus - 1.0:
        raise InvalidTestFunctionError(
            f"edge exponent {phi.edge_exponent} must exceed p_plus - 1 = "
            f"{inst.vp.p_plus - 1.0}"
        )
    _require_support_inside(phi, inst.domain)
    mu1, _ = build_measures(inst)
    return _run_caccioppoli(inst, phi, mu1, tol)


def _run_caccioppoli(inst, phi, mu1, tol, retried=False):
    p_fn = compile_fn(inst.vp.p)
    dens1 = mu1.density_fn()
    sigma_fn = compile_fn(inst.sigma)
    u_fn = compile_fn(inst.u)
    up_fn = compile_fn(inst.u_prime)
    beta = inst.beta

    lo = max(inst.domain.lo, phi.support.lo)
    hi = min(inst.domain.hi, phi.support.hi)
    splits = sorted(set(mu1.split_points) | set(phi.split_points))

    def lhs_integrand(x):
        v = phi(x)
        if v == 0.0:
            return 0.0
        d = dens1(x)
        return 0.0 if d == 0.0 else d * v

    def rhs_integrand(x):
        dv = phi.derivative(x)
        pv = p_fn(x)
        phiv = phi(x)
        if phiv <= 0.0 or dv == 0.0:
            # below floating-point resolution of the edge; the limit is 0
            # whenever the edge-exponent hypothesis holds
            return 0.0
        uv = u_fn(x)
        if not uv > 0.0 or up_fn(x) == 0.0:
            return 0.0
        bs = beta - sigma_fn(x)
        if bs <= 0.0:
            return math.inf
        # assembled in log space: |phi'|^p and phi^(1-p) individually
        # under/overflow near the support edge while their product is tame;
        # (p-1) log(p-1) takes its limit value 0 where p touches 1
        lp1 = (pv - 1.0) * math.log(pv - 1.0) if pv > 1.0 else 0.0
        log_total = (
            lp1
            - pv * math.log(pv)
            - (pv - 1.0) * math.log(bs)
            + (pv - beta - 1.0) * math.log(uv)
            + pv * math.log(abs(dv))
            + (1.0 - pv) * math.log(phiv)
        )
        if log_total < -700.0:
            return 0.0
        if log_total > 700.0:
            return math.inf
        return math.exp(log_total)

    tol_abs = retried if isinstance(retried, float) else DEFAULT_TOL_ABS
    lhs = integrate(lhs_integrand, Interval(lo, hi), split_at=splits,
                    endpoint_singular=(True, True), tol=tol, tol_abs=tol_abs)
    rhs = integrate(rhs_integrand, Interval(lo, hi), split_at=splits,
                    endpoint_singular=(True, True), tol=tol, tol_abs=tol_abs)
    margin, verdict = _verdict(lhs, rhs, ZERO_RESULT)
    if verdict == INDETERMINATE and retried is False:
        # retry once with tolerances scaled to the problem's magnitude
        scale = max(abs(lhs.value), abs(rhs.value), 1e-300)
        return _run_caccioppoli(
            inst, phi, mu1, tol / 100.0, retried=max(scale * tol * 1e-4, 1e-300)
        )
    return VerificationReport(lhs, rhs, ZERO_RESULT, margin, verdict, bool(retried))


def verify_hardy(inst: HardyInstance, xi: TestFunction, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Compare the modular of ``xi`` against the derivative modular plus the
    |xi log xi| correction carrying the exponent's derivative.

    The correction vanishes identically for a constant exponent and is then
    reported as an exact zero."""
    _require_support_inside(xi, inst.domain)
    mu1, mu2 = build_measures(inst)
    return _run_hardy(inst, xi, mu1, mu2, tol)


def _log_weight_measure(inst, mu2):
    from .instance import WeightedMeasure

    p, dp = inst.vp.p, inst.p_prime
    weight = pow_(div(abs_(dp), p), p)
    return WeightedMeasure(
        density=mul(weight, mu2.density),
        split_points=mu2.split_points,
        provenance="rhs-log-weight",
        indicators=mu2.indicators,
    )


def _run_hardy(inst, xi, mu1, mu2, tol, retried=False):
    tol_abs = retried if isinstance(retried, float) else DEFAULT_TOL_ABS
    lhs = modular(xi, inst.vp, mu=mu1, tol=tol, tol_abs=tol_abs)
    rhs_main = modular(_derivative_view(xi), inst.vp, mu=mu2, tol=tol, tol_abs=tol_abs)
    if inst.p_prime.kind == "const" and inst.p_prime.value == 0.0:
        rhs_log = ZERO_RESULT
    else:
        rhs_log = modular(
            _tlogt_view(xi), inst.vp, mu=_log_weight_measure(inst, mu2),
            tol=tol, tol_abs=tol_abs,
        )
    margin, verdict = _verdict(lhs, rhs_main, rhs_log)
    if verdict == INDETERMINATE and retried is False:
        # retry once with tolerances scaled to the problem's magnitude
        scale = max(abs(lhs.value), abs(rhs_main.value), abs(rhs_log.value), 1e-300)
        return _run_hardy(
            inst, xi, mu1, mu2, tol / 100.0,
            retried=max(scale * tol * 1e-4, 1e-300),
        )
    return VerificationReport(lhs, rhs_main, rhs_log, margin, verdict, bool(retried))


# ---------------------------------------------------------------------------
# batch verification


@dataclass
class BatchSummary:
    counts: dict
    worst_margin: float
    witnesses: list
    evaluations: int
    cases: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return self.counts[FAIL]


def _support_window(domain: Interval) -> Interval:
    w = domain.window(8.0)
    span = w.hi - w.lo
    return Interval(w.lo + 0.04 * span, w.hi - 0.04 * span)


def random_test_function(inst: HardyInstance, rng, family: str = "power_bump") -> TestFunction:
    """Draw one test function for the instance; deterministic given rng state."""
    win = _support_window(inst.domain)
    span = win.hi - win.lo
    kind = family
    if family == "mixed":
        kind = "power_bump" if rng.random() < 0.5 else "spline"
    if kind == "power_bump":
        r = float(rng.uniform(0.05, 0.25) * span / 2)
        m = float(rng.uniform(win.lo + r, win.hi - r))
        c = float(rng.uniform(0.5, 2.0))
        k = float(math.ceil(inst.vp.p_plus) + 1)
        return power_bump(m, r, c, k)
    if kind == "spline":
        r = float(rng.uniform(0.08, 0.3) * span / 2)
        m = float(rng.uniform(win.lo + r, win.hi - r))
        n = int(rng.integers(2, 5))
        values = rng.uniform(0.2, 1.2, size=n)
        return spline_bump(Interval(m - r, m + r), values, rng)
    raise InvalidTestFunctionError(f"unknown family {family!r}")


def batch_verify(
    inst: HardyInstance,
    family: str = "power_bump",
    count: int = 50,
    seed: int = 0,
    which: str = "hardy",
    tol: float = DEFAULT_TOL,
    jobs: int = 1,
) -> BatchSummary:
    """Run ``count`` seeded verifications of one inequality over a family.

    Refuses to run on instances that fail their admissibility checks; the
    verdict counts, the worst margin, and replayable witnesses for every
    non-pass case are collected.  The test functions are drawn up front, so
    results are identical for any ``jobs`` value."""
    report = check_admissibility(inst, grid_size=2000)
    if not report.admissible:
        bad = [c.name for c in report.conditions if not c.holds]
        raise InadmissibleInstanceError(
            f"instance fails {bad}; run check_admissibility for details"
        )
    rng = np.random.default_rng(seed)
    if which == "caccioppoli":
        # the gradient-side integrand needs edge exponent above p_plus - 1,
        # which only the power bumps guarantee for every exponent
        family = "power_bump"
    tfs = [random_test_function(inst, rng, family) for _ in range(count)]
    runner = verify_caccioppoli if which == "caccioppoli" else verify_hardy

    if jobs > 1 and count > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(lambda tf: runner(inst, tf, tol), tfs))
    else:
        reports = [runner(inst, tf, tol) for tf in tfs]

    counts = {PASS: 0, FAIL: 0, INDETERMINATE: 0}
    witnesses = []
    cases = []
    worst = math.inf
    evaluations = 0
    for index, (tf, rep) in enumerate(zip(tfs, reports)):
        counts[rep.verdict] += 1
        worst = min(worst, rep.margin)
        evaluations += rep.lhs.evaluations + rep.rhs_main.evaluations + rep.rhs_log.evaluations
        record = {
            "index": index,
            "kind": tf.kind,
            "params": tf.params,
            "verdict": rep.verdict,
            "margin": rep.margin,
        }
        cases.append(record)
        if rep.verdict != PASS:
            witnesses.append(record)
    return BatchSummary(counts, worst if count else math.nan, witnesses, evaluations, cases)
