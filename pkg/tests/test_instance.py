import math

import numpy as np
import pytest

from hardylab.errors import InvalidParamsError, ZeroSetUnresolvedError
from hardylab.expr import Interval, evaluate, parse
from hardylab.instance import (
    build_measures,
    check_admissibility,
    check_nonneg,
    constant_exponent_measures,
    lhs_core_expr,
    make_instance,
    pointwise_condition_expr,
    preset,
    weak_pdi_residual,
)
from hardylab.verify import tent

SIGMA_T3 = 2 * math.exp(-1.5) + 1


def test_admissibility_distance_preset():
    inst = preset("cor51", M=1.0, p="2", sigma="1", beta=2.0)
    report = check_admissibility(inst)
    assert report.admissible
    # Phi u + sigma |u'|^p is identically sigma = 1 away from the kink
    assert report.condition("pointwise").worst_margin == pytest.approx(1.0, abs=1e-12)
    assert report.condition("beta-margin").worst_margin == pytest.approx(1.0, abs=1e-12)


def test_admissibility_beta_gap_violated():
    inst = preset("cor51", M=1.0, p="2", sigma="3", beta=2.0)
    report = check_admissibility(inst)
    cond = report.condition("beta-margin")
    assert cond.verdict == "violated"
    assert cond.worst_margin == pytest.approx(-1.0, abs=1e-12)


def test_exponential_preset_condition_minimum():
    # condition sigma - (exp(-x^2)(2x^2-1) + 1): its minimum is 0, attained
    # where t = x^2 maximizes exp(-t)(2t-1), i.e. at x = sqrt(3/2)
    inst = preset(
        "cor55", p="2-exp(-x^2)", sigma=repr(SIGMA_T3), beta=SIGMA_T3 + 1,
        domain=Interval(0, math.inf),
    )
    assert check_admissibility(inst).admissible
    cond = check_nonneg(inst.condition, inst.domain)
    assert cond.verdict == "holds-numerically"
    assert 0 <= cond.worst_margin < 1e-4
    xs = np.linspace(0.01, 4, 40001)
    vals = [evaluate(inst.condition, float(x)) for x in xs]
    x_min = xs[int(np.argmin(vals))]
    assert x_min == pytest.approx(math.sqrt(1.5), abs=1e-3)


def test_weak_pdi_tent_across_kink():
    inst = preset("cor51", M=1.0, p="2", sigma="1", beta=2.0)
    w = tent(0.0, 0.5, 1.0)
    assert weak_pdi_residual(inst, w) == pytest.approx(2.0, abs=1e-6)


def test_weak_pdi_away_from_kink():
    inst = preset("cor51", M=1.0, p="2", sigma="1", beta=2.0)
    w = tent(0.5, 0.3, 1.0)
    assert weak_pdi_residual(inst, w) == pytest.approx(0.0, abs=1e-6)


def test_weak_pdi_fails_for_large_phi():
    inst = make_instance(
        Interval(-1, 1), "2", "1 - abs(x)", "1e6", "1", 2.0
    )
    w = tent(0.0, 0.5, 1.0)
    assert weak_pdi_residual(inst, w) < -1e4


def test_lhs_core_exponential_factorization():
    # for u = e^x the core factors as e^(2x) (sigma - p' x - p + 1)
    inst = preset("cor55", p="2-exp(-x^2)", sigma="3", beta=4.0, domain=Interval(-2, 2))
    core = lhs_core_expr(inst)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-2, 2, size=20):
        x = float(x)
        p = 2 - math.exp(-x * x)
        dp = 2 * x * math.exp(-x * x)
        expected = math.exp(2 * x) * (3.0 - dp * x - p + 1.0)
        assert evaluate(core, x) == pytest.approx(expected, rel=1e-12)


def test_lhs_core_power_factorization():
    alpha, sigma = 2.0, 2.0
    inst = preset("cor53", alpha=alpha, p="x+3", sigma=repr(sigma), beta=3.0)
    core = lhs_core_expr(inst)
    rng = np.random.default_rng(4)
    for x in rng.uniform(0.05, 0.95, size=20):
        x = float(x)
        p = x + 3
        bar_g = (
            sigma * alpha ** 2
            - 1.0 * x * alpha * math.log(abs(alpha * x ** (alpha - 1)))
            + (p - 1) * alpha * (1 - alpha)
        )
        assert evaluate(core, x) == pytest.approx(x ** (2 * alpha - 2) * bar_g, rel=1e-12)


def test_lhs_core_constant_u_is_zero():
    inst = make_instance(Interval(0, 1), "2", "3", "0", "1", 2.0)
    core = lhs_core_expr(inst)
    for x in (0.2, 0.7):
        assert evaluate(core, x) == 0.0


def test_lhs_core_matches_pointwise_condition_for_auto_phi():
    # (Phi u + sigma |u'|^p) == |u'|^(p-2) * core when Phi is the symbolic
    # negative divergence term
    inst = preset("cor53", alpha=2.0, p="x+3", sigma="2", beta=3.0)
    cond = pointwise_condition_expr(inst)
    core = lhs_core_expr(inst)
    for x in (0.2, 0.5, 0.8):
        up = abs(2 * x)
        p = x + 3
        assert evaluate(cond, x) == pytest.approx(
            up ** (p - 2) * evaluate(core, x), rel=1e-11
        )


def test_check_nonneg_trivial_cases():
    zero = parse("0")
    rep = check_nonneg(zero, Interval(-1, 1))
    assert rep.verdict == "holds-numerically"
    assert rep.worst_margin == 0.0
    rep = check_nonneg(parse("-x^2"), Interval(-1, 1))
    assert rep.verdict == "violated"
    assert rep.witness is not None and rep.witness != 0.0


def test_check_nonneg_normalized_power_condition():
    inst = preset("cor64", a=1.0, p="x+2", beta=5.0, domain=Interval(0, 1))
    rep = check_nonneg(inst.condition, inst.domain)
    assert rep.verdict == "holds-numerically"
    # a=1: the condition reads beta - 2(p-1) = 5 - 2(x+1), minimum 1 at x=1
    assert rep.worst_margin == pytest.approx(1.0, abs=1e-3)


def test_measures_distance_preset_forms():
    M, beta = 1.0, 2.0
    inst = preset("cor51", M=M, p="2-exp(-x^2)", sigma="1", beta=beta)
    mu1, mu2 = build_measures(inst)
    for x in (-0.6, 0.2, 0.8):
        u = M - abs(x)
        p = 2 - math.exp(-x * x)
        assert mu1.density_at(x) == pytest.approx(u ** (-beta - 1), rel=1e-12)
        expected2 = u ** (p - beta - 1) * (2 * (p - 1) / (beta - 1)) ** (p - 1)
        assert mu2.density_at(x) == pytest.approx(expected2, rel=1e-12)


def test_measures_reciprocal_preset_forms():
    a, beta, sigma = 1.0, 10.0, 9.0
    inst = preset("cor54", a=a, p="2+x/10", sigma=repr(sigma), beta=beta)
    mu1, mu2 = build_measures(inst)
    for x in (0.5, 2.0, 7.0):
        p = 2 + x / 10
        dp = 0.1
        bar_g = sigma + dp * x * math.log(a / x ** 2) - 2 * p + 2
        exp1 = (a / x) ** (p - beta - 1) * x ** (-p) * bar_g
        exp2 = (a / x) ** (p - beta - 1) * (2 * (p - 1) / (beta - sigma)) ** (p - 1)
        assert mu1.density_at(x) == pytest.approx(exp1, rel=1e-10)
        assert mu2.density_at(x) == pytest.approx(exp2, rel=1e-10)


def test_constant_p_measure_has_no_factor_two():
    inst = preset("constp", p=3.0, alpha=0.7, sigma=0.5, beta=2.0)
    mu1, mu2 = build_measures(inst)
    p, beta, sigma = 3.0, 2.0, 0.5
    for x in (0.5, 2.0):
        u = x ** 0.7
        expected = ((p - 1) / (beta - sigma)) ** (p - 1) * u ** (p - beta - 1)
        assert mu2.density_at(x) == pytest.approx(expected, rel=1e-12)


def test_constant_exponent_measure_relation():
    # thm-form mu2 equals ((p-1)/(beta-sigma))^(p-1) times the
    # constant-exponent form, and mu1 moves by the reciprocal factor
    inst = preset("constp", p=3.0, alpha=0.7, sigma=0.5, beta=2.0)
    mu1, mu2 = build_measures(inst)
    m1c, m2c = constant_exponent_measures(inst)
    p, beta, sigma = 3.0, 2.0, 0.5
    c = ((p - 1) / (beta - sigma)) ** (p - 1)
    for x in (0.3, 1.0, 4.0):
        assert mu2.density_at(x) == pytest.approx(c * m2c.density_at(x), rel=1e-12)
        assert m1c.density_at(x) == pytest.approx(mu1.density_at(x) / c, rel=1e-12)


def test_indicator_zeroes_density_outside_u_support():
    inst = make_instance(Interval(-1, 1), "2", "max(x, 0)", "0", "1", 2.0)
    mu1, mu2 = build_measures(inst)
    assert mu1.density_at(-0.5) == 0.0
    assert mu2.density_at(-0.5) == 0.0  # u' = 0 on the left half
    assert mu1.density_at(0.5) > 0.0


def test_unresolvable_u_zero_raises():
    inst = make_instance(Interval(0, 1), "2", "(x-0.5)^2", None, "1", 2.0)
    with pytest.raises(ZeroSetUnresolvedError):
        build_measures(inst)


def test_preset_triple_examples_admissible():
    triples = [
        dict(p="1+d/(abs(x)+1)", sigma="d", beta=2.0, domain=Interval(-5, 5), d=1.0),
        dict(p="exp(x)", sigma="(x+1)*exp(x)-1+0.1", beta=22.3, domain=Interval(0, 2)),
        dict(p="2-exp(-x^2)", sigma=repr(SIGMA_T3), beta=SIGMA_T3 + 1,
             domain=Interval(0, math.inf)),
    ]
    for kwargs in triples:
        inst = preset("cor55", **kwargs)
        assert check_admissibility(inst).admissible
        assert check_nonneg(inst.condition, inst.domain).verdict == "holds-numerically"


def test_preset_power_negative_alpha():
    # alpha < 0 is allowed; |u'| enters through exact absolute values
    inst = preset("cor53", alpha=-1.0, p="2", sigma="4", beta=5.0,
                  domain=Interval(0.5, 2.0))
    assert check_admissibility(inst).admissible
    mu1, _ = build_measures(inst)
    for x in (0.7, 1.5):
        # u = 1/x: core = x^(-4) (sigma - 2p + 2), mu1 = |u'|^(p-2) u^(-beta-1) core
        expected = x ** (-4) * (4.0 - 2 * 2.0 + 2) * x ** (-2 * (2.0 - 2)) * x ** 6
        assert mu1.density_at(x) == pytest.approx(expected, rel=1e-10)


def test_preset_degenerate_power_is_vacuous():
    inst = preset("cor53", alpha=1.0, p="2", sigma="0", beta=1.0)
    assert inst.vacuous
    assert evaluate(inst.condition, 0.5) == 0.0


def test_preset_invalid_params():
    with pytest.raises(InvalidParamsError):
        preset("cor54", a=-1.0)
    with pytest.raises(InvalidParamsError):
        preset("cor51", M=1.0, beta=-2.0)
    with pytest.raises(InvalidParamsError):
        preset("nonsense")
    with pytest.raises(InvalidParamsError):
        preset("cor53", alpha=2.0, domain=Interval(-1, 1))


def test_classical_weight_from_constant_preset():
    inst = preset("constp")
    mu1, mu2 = build_measures(inst)
    for x in (0.25, 1.0, 5.0):
        assert mu1.density_at(x) * x * x == pytest.approx(0.25, rel=1e-12)
        assert mu2.density_at(x) == pytest.approx(1.0, rel=1e-12)


SHIPPED_PRESETS = [
    ("cor51", dict(M=1.0, p="2", sigma="1", beta=2.0)),
    ("cor51", dict(M=1.0, p="2-exp(-x^2)", sigma="1", beta=2.0)),
    ("cor53", dict(alpha=2.0, p="x+3", sigma="2", beta=3.0)),
    ("cor54", dict(a=1.0, p="2", sigma="2.5", beta=3.5)),
    ("cor55", dict(p="1+d/(abs(x)+1)", sigma="d", beta=2.0, domain=Interval(-5, 5), d=1.0)),
    ("cor55", dict(p="2-exp(-x^2)", sigma=repr(SIGMA_T3), beta=SIGMA_T3 + 1,
                   domain=Interval(0, math.inf))),
    ("cor64", dict(a=1.0, p="x+2", beta=5.0, domain=Interval(0, 1))),
    ("constp", dict()),
]


def test_every_shipped_preset_passes_checks():
    for name, kwargs in SHIPPED_PRESETS:
        inst = preset(name, **kwargs)
        report = check_admissibility(inst, grid_size=10_000)
        assert report.admissible, (name, kwargs)
        if inst.condition is not None:
            cond = check_nonneg(inst.condition, inst.domain, grid_size=10_000)
            assert cond.verdict == "holds-numerically", (name, kwargs)


def test_measure_densities_nonnegative_on_grids():
    for name, kwargs in SHIPPED_PRESETS:
        inst = preset(name, **kwargs)
        mu1, mu2 = build_measures(inst)
        f1, f2 = mu1.density_fn(), mu2.density_fn()
        for x in inst.domain.midpoint_grid(400):
            assert f1(x) >= -1e-12, (name, x)
            assert f2(x) >= 0.0, (name, x)
