"""Numerical verification suite shared by self-tests, tests, and the runner.

Every check returns a CheckResult with the worst observed violation and the
threshold it was held to.  Checks draw their randomness from an explicit
generator, so a fixed seed reproduces identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cocycle import (
    OrbitCache,
    check_norm_equivalence,
    check_one_step_contraction,
    cocycle_eval,
    envelope_along_orbit,
    operator_norm,
)
from .driving import BasePoint, step
from .green import (
    WeightSequence,
    Window,
    WindowSequence,
    dense_green_solve,
    green_apply,
    green_norm_bound_check,
    green_residual,
    weighted_norm,
)
from .shadowing import (
    iteration_bound,
    make_weight,
    nonlinear_orbit,
    solve,
    source_term,
)

__all__ = [
    "CheckResult",
    "SelfTestReport",
    "scenario_self_test",
    "noisy_pseudo_orbit",
    "admissible_weight_kinds",
    "check_cocycle_property",
    "check_projectors",
    "check_dichotomy_bounds",
    "check_norm_equivalence_sweep",
    "check_one_step_contraction_sweep",
    "check_green_linearity",
    "check_green_inversion",
    "check_green_norm_bounds",
    "check_source_lipschitz",
    "check_solver_certificates",
    "check_envelope_growth",
    "check_layer_coverage",
    "check_layered_shadowing",
    "run_invariant_suite",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SelfTestReport:
    scenario: str
    results: tuple[CheckResult, ...]
    passed: bool

    def describe(self) -> str:
        lines = []
        for r in self.results:
            status = "ok" if r.passed else "FAIL"
            lines.append(
                f"  [{status}] {r.name}: worst {r.worst:.3e} vs {r.threshold:.3e}"
                + (f" ({r.detail})" if r.detail else "")
            )
        return "\n".join(lines)


def _points(scenario, rng, count: int) -> list[BasePoint]:
    pts = [scenario.base_point]
    for _ in range(count - 1):
        pts.append(scenario.sample_point(rng))
    return pts


def check_cocycle_property(scenario, rng, pairs: int = 25, span: int = 32) -> CheckResult:
    """A(w, n+m) = A(sigma^m w, n) A(w, m) at relative error <= 1e-10.

    The error is measured relative to |A(s^m w, n)| |A(w, m)|, the
    backward-stable scale: for opposite-sign n, m the two factors nearly
    cancel, and no multiplication order can deliver accuracy relative to the
    (exponentially smaller) result itself.
    """
    worst = 0.0
    for point in _points(scenario, rng, 3):
        cache = OrbitCache(scenario.cocycle, point)
        for _ in range(pairs):
            n = int(rng.integers(-span, span + 1))
            m = int(rng.integers(-span, span + 1))
            whole = cocycle_eval(scenario.cocycle, point, n + m, cache=cache)
            left = cocycle_eval(scenario.cocycle, cache.point(m), n)
            right = cocycle_eval(scenario.cocycle, point, m, cache=cache)
            scale = max(operator_norm(whole), operator_norm(left) * operator_norm(right))
            err = operator_norm(whole - left @ right) / max(scale, 1e-300)
            worst = max(worst, err)
    return CheckResult("cocycle-composition", worst, 1e-10, worst <= 1e-10)


def check_projectors(scenario, rng, points: int = 4, span: int = 32) -> CheckResult:
    """P^2 = P within 1e-10 and equivariance within 1e-8 relative."""
    worst_idem = 0.0
    worst_equiv = 0.0
    for point in _points(scenario, rng, points):
        cache = OrbitCache(scenario.cocycle, point, scenario.dichotomy)
        p = cache.projector(0)
        worst_idem = max(worst_idem, operator_norm(p @ p - p))
        for n in (1, 2, 5, span // 2, span):
            a_n = cocycle_eval(scenario.cocycle, point, n, cache=cache)
            lhs = cache.projector(n) @ a_n
            rhs = a_n @ p
            err = operator_norm(lhs - rhs) / max(operator_norm(a_n), 1e-300)
            worst_equiv = max(worst_equiv, err)
    passed = worst_idem <= 1e-10 and worst_equiv <= 1e-8
    return CheckResult(
        "projector-family", max(worst_idem, worst_equiv), 1e-8, passed,
        detail=f"idempotency {worst_idem:.2e}, equivariance {worst_equiv:.2e}",
    )


def check_dichotomy_bounds(scenario, rng, points: int = 3, max_n: int = 64) -> CheckResult:
    """Contraction bounds with K(w) at the declared rate and at rate + margin.

    The operators A(w,n)P(w) and A(w,-n)(I-P(w)) are accumulated with
    projector-sandwiched factors, which is the same matrix in exact
    arithmetic but keeps round-off from leaking into the expanding
    complementary direction.
    """
    dich = scenario.dichotomy
    strict = dich.rate + dich.margin
    worst = 0.0
    for point in _points(scenario, rng, points):
        cache = OrbitCache(scenario.cocycle, point, dich)
        k = cache.bound(0)
        fwd = cache.projector(0).copy()
        bwd = np.eye(scenario.cocycle.dim) - cache.projector(0)
        for n in range(1, max_n + 1):
            fwd = cache.stable_map(n - 1) @ fwd
            bwd = cache.unstable_map(-n) @ bwd
            bound = k * math.exp(-strict * n)
            worst = max(
                worst,
                operator_norm(fwd) / bound - 1.0,
                operator_norm(bwd) / bound - 1.0,
            )
    return CheckResult("dichotomy-bounds", worst, 1e-9, worst <= 1e-9)


def check_norm_equivalence_sweep(scenario, rng, vectors: int = 1000) -> CheckResult:
    """|x| <= |x|_w <= 2 K(w) |x| over random vectors and points."""
    worst = 0.0
    failures = 0
    per_point = max(1, vectors // 4)
    for point in _points(scenario, rng, 4):
        cache = OrbitCache(scenario.cocycle, point, scenario.dichotomy)
        for _ in range(per_point):
            x = rng.standard_normal(scenario.cocycle.dim)
            rep = check_norm_equivalence(
                scenario.cocycle, scenario.dichotomy, point, x, scenario.horizon,
                allow_uncertified=scenario.allow_uncertified_truncation,
                cache=cache,
            )
            if not rep.passed:
                failures += 1
            lower = rep.plain - rep.adapted.value
            upper = rep.adapted.value - rep.upper
            worst = max(worst, lower, upper)
    return CheckResult(
        "norm-equivalence", worst, 1e-9, failures == 0,
        detail=f"{failures} failures",
    )


def check_one_step_contraction_sweep(scenario, rng, pairs: int = 200,
                                     max_n: int = 10) -> CheckResult:
    """n-step adapted-norm contraction margins stay above -1e-9."""
    worst = 0.0
    per_point = max(1, pairs // 4)
    for point in _points(scenario, rng, 4):
        cache = OrbitCache(scenario.cocycle, point, scenario.dichotomy)
        for _ in range(per_point):
            x = rng.standard_normal(scenario.cocycle.dim)
            n = int(rng.integers(0, max_n + 1))
            rep = check_one_step_contraction(
                scenario.cocycle, scenario.dichotomy, point, x, n, scenario.horizon,
                allow_uncertified=scenario.allow_uncertified_truncation,
                cache=cache,
            )
            worst = max(worst, -rep.stable_margin, -rep.unstable_margin)
    return CheckResult("adapted-contraction", worst, 1e-9, worst <= 1e-9)


def check_green_linearity(scenario, rng, trials: int = 10, half: int = 8) -> CheckResult:
    """Linearity of the Green operator to 1e-12 relative."""
    window = Window.symmetric(half)
    cache = OrbitCache(scenario.cocycle, scenario.base_point, scenario.dichotomy)
    worst = 0.0
    for _ in range(trials):
        z1 = WindowSequence(window, rng.standard_normal((window.length, scenario.cocycle.dim)))
        z2 = WindowSequence(window, rng.standard_normal((window.length, scenario.cocycle.dim)))
        a, b = float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2))
        combo = green_apply(
            scenario.cocycle, scenario.dichotomy, scenario.base_point,
            a * z1 + b * z2, cache=cache,
        )
        parts = a * green_apply(
            scenario.cocycle, scenario.dichotomy, scenario.base_point, z1, cache=cache
        ) + b * green_apply(
            scenario.cocycle, scenario.dichotomy, scenario.base_point, z2, cache=cache
        )
        scale = max(combo.sup_norm(), 1e-300)
        worst = max(worst, (combo - parts).sup_norm() / scale)
    return CheckResult("green-linearity", worst, 1e-12, worst <= 1e-12)


def check_green_inversion(scenario, rng, trials: int = 20, half: int = 8) -> CheckResult:
    """Residual identity and dense-oracle equivalence, both directions.

    Forward: the residual of green_apply output vanishes on interior indices.
    Converse: the dense boundary-value solve of the same input reproduces
    green_apply, so any sequence satisfying the residual identity plus the
    two boundary conditions is the Green image of its residual.
    """
    window = Window.symmetric(half)
    point = scenario.base_point
    cache = OrbitCache(scenario.cocycle, point, scenario.dichotomy)
    worst_res = 0.0
    worst_dense = 0.0
    for _ in range(trials):
        z = WindowSequence(window, rng.standard_normal((window.length, scenario.cocycle.dim)))
        w = green_apply(scenario.cocycle, scenario.dichotomy, point, z, cache=cache)
        rep = green_residual(scenario.cocycle, scenario.dichotomy, point, z, w, cache=cache)
        worst_res = max(
            worst_res,
            max(rep.max_norm, rep.left_edge_gap) / (1.0 + z.sup_norm()),
        )
        dense = dense_green_solve(scenario.cocycle, scenario.dichotomy, point, z, cache=cache)
        scale = max(w.sup_norm(), 1e-300)
        worst_dense = max(worst_dense, (w - dense).sup_norm() / scale)
    worst = max(worst_res, worst_dense)
    return CheckResult(
        "green-inversion", worst, 1e-10, worst <= 1e-10,
        detail=f"residual {worst_res:.2e}, dense gap {worst_dense:.2e}",
    )


def admissible_weight_kinds(scenario) -> list[str]:
    """Weight families whose ratio bound fits e^{rate - eps} for the scenario."""
    limit = math.exp(scenario.dichotomy.rate - scenario.epsilon)
    kinds = ["constant"]
    if scenario.dichotomy.rate > scenario.epsilon:
        kinds.append("exponential")
    if limit >= 2.0:
        kinds.append("polynomial")
    return kinds


def _weights_of_kind(scenario, kind: str, window: Window) -> WeightSequence:
    if kind == "exponential":
        return make_weight(
            "exponential", window, rate=scenario.dichotomy.rate - scenario.epsilon
        )
    return make_weight(kind, window, scale=scenario.weight_scale)


def check_green_norm_bounds(scenario, rng, trials: int = 100, half: int = 8) -> CheckResult:
    """Weighted-norm amplification below (1+e^{-eps})/(1-e^{-eps}) + 1e-6."""
    window = Window.symmetric(half)
    worst = -math.inf
    kinds = admissible_weight_kinds(scenario)
    for kind in kinds:
        weights = _weights_of_kind(scenario, kind, window)
        rep = green_norm_bound_check(
            scenario.cocycle, scenario.dichotomy, scenario.base_point, weights,
            scenario.epsilon, trials, scenario.horizon, rng,
            allow_uncertified=scenario.allow_uncertified_truncation,
        )
        worst = max(worst, rep.max_ratio - rep.bound)
    return CheckResult(
        "green-norm-bound", worst, 1e-6, worst <= 1e-6,
        detail=f"families {', '.join(kinds)}",
    )


def noisy_pseudo_orbit(
    scenario,
    window: Window,
    rng: np.random.Generator,
    *,
    noise: float = 0.5,
    weights: WeightSequence | None = None,
    start: np.ndarray | None = None,
) -> tuple[WindowSequence, WeightSequence]:
    """An exact orbit plus jitter scaled to respect the defect allowance.

    The jitter at index n has norm at most noise * allowed(n) / (1 + G r k),
    where G bounds |A| plus the perturbation Lipschitz constant, r is the
    weight ratio bound, and k the worst adjacent ratio of the allowances, so
    the triangle inequality keeps every defect within its allowance.
    """
    if not 0 <= noise <= 1:
        raise ValueError("noise must lie in [0, 1]")
    if weights is None:
        weights = scenario.default_weights(window)
    cache = OrbitCache(scenario.cocycle, scenario.base_point, scenario.dichotomy)
    if start is None:
        start = 0.5 * rng.standard_normal(scenario.cocycle.dim)
    orbit = nonlinear_orbit(
        scenario.cocycle, scenario.perturbation, scenario.base_point, start, window,
        cache=cache,
    )
    allowed = np.array(
        [weights.value_at(n) / (2.0 * cache.bound(n)) for n in window.indices()]
    )
    growth = max(
        operator_norm(cache.matrix(n)) for n in range(window.n_min, window.n_max)
    ) + scenario.perturbation.lipschitz_budget / min(
        cache.bound(n) for n in window.indices()
    )
    adjacent = float(np.max(allowed[:-1] / allowed[1:])) if len(allowed) > 1 else 1.0
    amp = noise * allowed / (1.0 + growth * adjacent)
    jitter = rng.standard_normal((window.length, scenario.cocycle.dim))
    norms = np.linalg.norm(jitter, axis=1)
    norms[norms == 0] = 1.0
    jitter = jitter / norms[:, None] * amp[:, None]
    return WindowSequence(window, orbit.values + jitter), weights


def check_source_lipschitz(scenario, rng, pairs: int = 50, half: int = 8) -> CheckResult:
    """Weighted-norm Lipschitz bound 2 c e^{rate-eps} of the source map."""
    window = Window.symmetric(half)
    pseudo, weights = noisy_pseudo_orbit(scenario, window, rng)
    prob = scenario.problem(pseudo, weights)
    cache = prob.cache()
    factor = (
        2.0
        * scenario.perturbation.lipschitz_budget
        * math.exp(scenario.dichotomy.rate - scenario.epsilon)
    )
    worst = 0.0
    uncert = scenario.allow_uncertified_truncation
    for _ in range(pairs):
        z1 = WindowSequence(window, rng.standard_normal((window.length, scenario.cocycle.dim)))
        z2 = WindowSequence(window, rng.standard_normal((window.length, scenario.cocycle.dim)))
        num = weighted_norm(
            scenario.cocycle, scenario.dichotomy, scenario.base_point,
            source_term(prob, z1, cache) - source_term(prob, z2, cache),
            weights, scenario.horizon, allow_uncertified=uncert, cache=cache,
        )
        den = weighted_norm(
            scenario.cocycle, scenario.dichotomy, scenario.base_point,
            z1 - z2, weights, scenario.horizon, allow_uncertified=uncert, cache=cache,
        )
        worst = max(worst, num - factor * den)
    return CheckResult("source-lipschitz", worst, 1e-9, worst <= 1e-9)


def check_solver_certificates(scenario, rng, half: int = 10,
                              tol: float = 1e-10) -> CheckResult:
    """Run the solver on a noisy orbit and verify every certificate.

    Window sizes are kept moderate so two-sided orbit magnitudes stay well
    inside the range where the absolute residual threshold is meaningful
    (hyperbolic orbits grow like e^{rate * half} toward the window edges).
    """
    window = Window.symmetric(half)
    pseudo, weights = noisy_pseudo_orbit(scenario, window, rng)
    prob = scenario.problem(pseudo, weights)
    res = solve(prob, tol=tol)
    shadow_bound, q = prob.constants
    issues = []
    if not res.defect.all_within:
        issues.append("pseudo-orbit defect exceeded its allowance")
    if not res.shadow_ok:
        issues.append("shadowing certificate failed")
    if not res.ball_ok:
        issues.append("an iterate left the invariant ball")
    if res.max_orbit_residual > 1e-8:
        issues.append(f"orbit residual {res.max_orbit_residual:.2e}")
    if res.fixed_point_gap > 2 * tol:
        issues.append(f"fixed-point gap {res.fixed_point_gap:.2e}")
    if res.iterations > iteration_bound(shadow_bound, q, tol):
        issues.append(f"{res.iterations} iterations exceeded the a-priori bound")
    worst = max(res.max_orbit_residual, res.fixed_point_gap)
    return CheckResult(
        "solver-certificates", worst, 1e-8, not issues, detail="; ".join(issues)
    )


def check_envelope_growth(scenario, rng, horizon: int = 200,
                          samples: int = 5) -> CheckResult:
    """K <= D and D(sigma^n w) <= D(w) e^{rho |n|} along sampled orbits."""
    layering = scenario.layering
    if layering is None:
        raise ValueError("scenario has no layering data")
    rho = layering.rho
    base = scenario.base
    bound = scenario.dichotomy.bound
    worst = 0.0
    for point in _points(scenario, rng, samples):
        values = envelope_along_orbit(
            base, bound, point, rho, layering.envelope.horizon, -horizon, horizon
        )
        ns = np.arange(-horizon, horizon + 1)
        ks = np.array([bound(step(base, point, int(n))) for n in ns])
        worst = max(worst, float(np.max(ks / values)) - 1.0)
        origin = values[horizon]
        worst = max(
            worst, float(np.max(values / (origin * np.exp(rho * np.abs(ns))))) - 1.0
        )
    return CheckResult("envelope-growth", worst, 1e-9, worst <= 1e-9)


def check_layer_coverage(scenario, rng, samples: int = 400,
                         depth: int = 200) -> CheckResult:
    """Fraction of points hitting the good level set within `depth` steps."""
    layering = scenario.layering
    if layering is None:
        raise ValueError("scenario has no layering data")
    base = scenario.base
    env = layering.envelope
    hits = 0
    for _ in range(samples):
        point = scenario.sample_point(rng)
        values = envelope_along_orbit(
            base, scenario.dichotomy.bound, point, layering.rho, env.horizon,
            0, depth,
        )
        if np.any(values <= layering.level_threshold):
            hits += 1
    coverage = hits / samples
    return CheckResult(
        "layer-coverage", 1.0 - coverage, 0.01, coverage >= 0.99,
        detail=f"coverage {coverage:.3f} at depth {depth}",
    )


def check_layered_shadowing(scenario, rng, half: int = 10) -> CheckResult:
    """Shadow a pseudo-orbit whose defects obey the per-layer allowance.

    For a point in layer m the allowance at index n is
    delta(n) e^{-rho |n - m|} / (2 T), which the envelope chain converts into
    the generic allowance delta(n) / (2 K(sigma^n w)).
    """
    layering = scenario.layering
    if layering is None:
        raise ValueError("scenario has no layering data")
    rng_local = rng
    point = scenario.base_point
    m = layering.layer_index(point)
    if m is None:
        raise ValueError("anchor point has no layer index")
    window = Window.symmetric(half)
    weights = scenario.default_weights(window)
    cache = OrbitCache(scenario.cocycle, point, scenario.dichotomy)
    orbit = nonlinear_orbit(
        scenario.cocycle, scenario.perturbation, point,
        0.5 * rng_local.standard_normal(scenario.cocycle.dim), window, cache=cache,
    )
    allowed = np.array(
        [
            weights.value_at(n)
            * math.exp(-layering.rho * abs(n - m))
            / (2.0 * layering.level_threshold)
            for n in window.indices()
        ]
    )
    generic = np.array(
        [weights.value_at(n) / (2.0 * cache.bound(n)) for n in window.indices()]
    )
    if np.any(allowed > generic * (1 + 1e-12)):
        return CheckResult(
            "layered-shadowing", float(np.max(allowed / generic)) - 1.0, 0.0, False,
            detail="layer allowance exceeds the generic allowance",
        )
    growth = max(
        operator_norm(cache.matrix(n)) for n in range(window.n_min, window.n_max)
    ) + scenario.perturbation.lipschitz_budget
    adjacent = float(np.max(allowed[:-1] / allowed[1:]))
    amp = 0.8 * allowed / (1.0 + growth * adjacent)
    jitter = rng_local.standard_normal((window.length, scenario.cocycle.dim))
    norms = np.linalg.norm(jitter, axis=1)
    norms[norms == 0] = 1.0
    jitter = jitter / norms[:, None] * amp[:, None]
    pseudo = WindowSequence(window, orbit.values + jitter)
    prob = scenario.problem(pseudo, weights)
    res = solve(prob, tol=1e-10)
    ok = res.defect.all_within and res.shadow_ok and res.ball_ok
    return CheckResult(
        "layered-shadowing", res.max_orbit_residual, 1e-8,
        ok and res.max_orbit_residual <= 1e-8,
        detail=f"layer {m}",
    )


def scenario_self_test(scenario, seed: int = 90521) -> SelfTestReport:
    """Fast structural validation run when the registry is built."""
    rng = np.random.default_rng(seed)
    results = [
        check_cocycle_property(scenario, rng, pairs=8, span=16),
        check_projectors(scenario, rng, points=3, span=16),
        check_dichotomy_bounds(scenario, rng, points=2, max_n=32),
        _check_perturbation_lipschitz(scenario, rng),
        _check_contraction_constant(scenario),
    ]
    return SelfTestReport(
        scenario.name, tuple(results), all(r.passed for r in results)
    )


def _check_perturbation_lipschitz(scenario, rng, pairs: int = 40) -> CheckResult:
    budget = scenario.perturbation.lipschitz_budget
    worst = 0.0
    for point in _points(scenario, rng, 4):
        nxt = step(scenario.base, point, 1)
        allowed = budget / scenario.dichotomy.bound(nxt)
        for _ in range(pairs):
            x = rng.standard_normal(scenario.cocycle.dim) * 2.0
            y = rng.standard_normal(scenario.cocycle.dim) * 2.0
            num = float(np.linalg.norm(
                scenario.perturbation(point, x) - scenario.perturbation(point, y)
            ))
            den = float(np.linalg.norm(x - y))
            if den > 0:
                worst = max(worst, num - allowed * den)
    return CheckResult("perturbation-lipschitz", worst, 1e-9, worst <= 1e-9)


def _check_contraction_constant(scenario) -> CheckResult:
    from .shadowing import shadow_constant, ContractionError

    try:
        _, q = shadow_constant(
            scenario.dichotomy.rate, scenario.epsilon,
            scenario.perturbation.lipschitz_budget,
        )
    except ContractionError:
        return CheckResult("contraction-constant", 1.0, 1.0, False, "q >= 1")
    return CheckResult("contraction-constant", q, 1.0, q < 1.0, f"q = {q:.4f}")


def run_invariant_suite(scenario, seed: int = 421) -> list[CheckResult]:
    """The full property suite for one scenario."""
    rng = np.random.default_rng(seed)
    results = [
        check_cocycle_property(scenario, rng),
        check_projectors(scenario, rng),
        check_dichotomy_bounds(scenario, rng),
        _check_perturbation_lipschitz(scenario, rng),
        _check_contraction_constant(scenario),
        check_norm_equivalence_sweep(scenario, rng),
        check_one_step_contraction_sweep(scenario, rng),
        check_green_linearity(scenario, rng),
        check_green_inversion(scenario, rng),
        check_green_norm_bounds(scenario, rng),
        check_source_lipschitz(scenario, rng),
        check_solver_certificates(scenario, rng),
    ]
    if scenario.layering is not None:
        results.extend(
            [
                check_envelope_growth(scenario, rng),
                check_layer_coverage(scenario, rng, samples=200),
                check_layered_shadowing(scenario, rng),
            ]
        )
    return results
