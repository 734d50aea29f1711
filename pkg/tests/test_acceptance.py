"""Acceptance suite: one test per criterion, summarized at the end of the run.

Run just this module with ``pytest tests/test_acceptance.py -v``; the
"acceptance criteria" section of the terminal summary lists PASS/FAIL per
criterion.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from provable_repair import (
    Dnn,
    Layer,
    LinearProgram,
    LpStatus,
    NormObjective,
    Polygon2D,
    Segment,
    decouple,
    eval_ddnn,
    eval_dnn,
    exactline,
    param_jacobian,
    plane_transfer,
    solve,
)
from provable_repair.ddnn import apply_delta
from provable_repair.formats import load_labeled_csv, load_network, load_spec
from provable_repair.metrics import accuracy, drawdown, generalization
from provable_repair.repair import (
    PointConstraint,
    PointSpec,
    PolytopeConstraint,
    PolytopeSpec,
    RepairStatus,
    point_repair,
    polytope_repair,
    satisfies_points,
)

from netgen import (
    batch_pattern_bits,
    brute_force_lp,
    min_abs_relu_preactivation,
    n1,
    pattern_to_bits,
    random_dnn,
    strictly_inside_convex,
)

FIX = Path(__file__).parent / "fixtures"
BOX = np.array([[1.0], [-1.0]])


def box(lo, hi):
    return BOX, np.array([hi, -lo])


def crit(number, title):
    return pytest.mark.acceptance(number, title)


@crit(1, "golden point repair")
def test_golden_point_repair(record_property):
    spec = PointSpec([PointConstraint([0.5], *box(-1.0, -0.8)), PointConstraint([1.5], *box(-0.2, 0.0))])
    t0 = time.perf_counter()
    res = point_repair(n1(), 1, spec, NormObjective.L1, mask="paper4")
    elapsed = time.perf_counter() - t0
    record_property("detail", f"objective={res.norm_value!r} time={elapsed:.3f}s")
    assert res.status is RepairStatus.REPAIRED
    assert abs(res.norm_value - 26 / 15) <= 1e-6
    report = satisfies_points(res.repaired, spec, slack=1e-9)
    assert report.ok
    y05, y15 = eval_ddnn(res.repaired, [0.5])[0], eval_ddnn(res.repaired, [1.5])[0]
    assert -1.0 - 1e-9 <= y05 <= -0.8 + 1e-9
    assert -0.2 - 1e-9 <= y15 <= 0.0 + 1e-9
    assert elapsed < 1.0


@crit(2, "golden polytope repair")
def test_golden_polytope_repair(record_property):
    spec = PolytopeSpec([PolytopeConstraint(Segment([0.5], [1.5]), *box(-0.8, -0.4))])
    t0 = time.perf_counter()
    res = polytope_repair(n1(), 1, spec, NormObjective.L1, mask="paper4")
    elapsed = time.perf_counter() - t0
    record_property(
        "detail", f"objective={res.norm_value!r} key_points={res.key_point_count} time={elapsed:.3f}s"
    )
    assert res.status is RepairStatus.REPAIRED
    assert res.key_point_count == 4
    assert abs(res.norm_value - 0.2) <= 1e-6
    ys = np.array([eval_ddnn(res.repaired, [x])[0] for x in np.linspace(0.5, 1.5, 101)])
    assert np.all(ys <= -0.4 + 1e-9) and np.all(ys >= -0.8 - 1e-9)
    assert elapsed < 1.0


@crit(3, "golden region partition")
def test_golden_region_partition(record_property):
    part = exactline(n1(), Segment([-1.0], [2.0]))
    pieces = [(float(r.vertices[0][0]), float(r.vertices[1][0])) for r in part]
    record_property("detail", f"pieces={pieces}")
    assert len(pieces) == 3
    want = [(-1.0, 0.0), (0.0, 1.0), (1.0, 2.0)]
    for got, exp in zip(pieces, want):
        assert abs(got[0] - exp[0]) <= 1e-12 and abs(got[1] - exp[1]) <= 1e-12


@crit(4, "single-layer Jacobian")
def test_single_layer_jacobian(record_property):
    net = decouple(Dnn([Layer([[1.0, 2.0], [3.0, -4.0]], [0.0, 0.0], "relu")]))
    jac = param_jacobian(net, 1, [1.0, 2.0])
    record_property("detail", f"weight block={jac.matrix[:, :4].tolist()}")
    np.testing.assert_array_equal(jac.matrix[:, :4], [[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])


@crit(5, "decoupling preserves outputs")
def test_decoupling_preserves_outputs(record_property):
    rng = np.random.default_rng(1005)
    failures, worst = 0, 0.0
    for _ in range(100):
        net = random_dnn(rng, max_layers=4, max_width=8)
        dd = decouple(net)
        for _ in range(20):
            x = rng.normal(size=net.in_dim) * 2
            y, z = eval_dnn(net, x), eval_ddnn(dd, x)
            err = np.max(np.abs(y - z) / (1.0 + np.abs(y)))
            worst = max(worst, err)
            failures += int(err > 1e-9)
    record_property("detail", f"failures={failures} worst_rel={worst:.2e}")
    assert failures == 0


@crit(6, "Jacobian exactness")
def test_jacobian_exactness(record_property):
    rng = np.random.default_rng(1006)
    failures, worst = 0, 0.0
    for _ in range(100):
        dd = decouple(random_dnn(rng, max_layers=4, max_width=8))
        layer = int(rng.integers(1, len(dd) + 1))
        x = rng.normal(size=dd.in_dim)
        jac = param_jacobian(dd, layer, x)
        delta = rng.normal(size=jac.matrix.shape[1])
        actual = eval_ddnn(apply_delta(dd, layer, delta), x)
        err = np.max(np.abs(jac.predict(delta) - actual) / (1.0 + np.abs(actual)))
        worst = max(worst, err)
        failures += int(err > 1e-8)
    record_property("detail", f"failures={failures} worst_rel={worst:.2e}")
    assert failures == 0


@crit(7, "segment region soundness")
def test_segment_region_soundness(record_property):
    rng = np.random.default_rng(1007)
    mismatches = length_failures = edit_failures = checked = 0
    for _ in range(200):
        net = random_dnn(rng, max_layers=4, max_width=8, kinds=("relu", "identity"))
        seg = Segment(rng.normal(size=net.in_dim) * 2, rng.normal(size=net.in_dim) * 2)
        part = exactline(net, seg)
        bps = part.breakpoints

        ts = rng.uniform(size=1000)
        away = np.min(np.abs(ts[:, None] - bps[None, :]), axis=1) > 1e-9
        got = batch_pattern_bits(net, seg.point(ts))
        idx = np.clip(np.searchsorted(bps, ts, side="right") - 1, 0, len(part) - 1)
        for k in np.flatnonzero(away):
            checked += 1
            mismatches += int(not np.array_equal(got[k], pattern_to_bits(part.regions[idx[k]].pattern)))

        total = sum(r.measure for r in part) * seg.length
        length_failures += int(abs(total - seg.length) > 1e-9 * seg.length)

        dd = decouple(net)
        layer = int(rng.integers(1, len(dd) + 1))
        edited = apply_delta(dd, layer, rng.normal(size=dd.val_layers[layer - 1].num_params))
        again = exactline(edited, seg)
        same = np.array_equal(again.breakpoints, bps) and [r.pattern for r in again] == [r.pattern for r in part]
        edit_failures += int(not same)
    record_property(
        "detail",
        f"samples={checked} mismatches={mismatches} length_failures={length_failures} edit_failures={edit_failures}",
    )
    assert mismatches == 0 and length_failures == 0 and edit_failures == 0


@crit(8, "plane transfer")
def test_plane_transfer(record_property):
    quad = Dnn([Layer(np.eye(2), [0.0, 0.0], "relu"), Layer(np.eye(2), [0.0, 0.0], "identity")])
    square = Polygon2D([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    part = plane_transfer(quad, square)
    assert len(part) == 4

    g = np.linspace(-1, 1, 101)
    xs = np.array([[u, v] for u in g for v in g])
    bits = batch_pattern_bits(quad, xs)
    away = (min_abs_relu_preactivation(quad, xs) > 1e-9) & strictly_inside_convex(square.vertices, xs)
    covered = np.zeros(len(xs), dtype=bool)
    mismatches = 0
    for r in part:
        inside = strictly_inside_convex(r.vertices, xs) & away
        covered |= inside
        mismatches += int(np.sum(np.any(bits[inside] != pattern_to_bits(r.pattern), axis=1)))
    assert mismatches == 0
    assert np.all(covered[away])

    lifted = Dnn(
        [
            Layer([[-1.0, 0.0], [1.0, 0.0], [1.0, 0.0]], [0.0, 0.0, -1.0], "relu"),
            Layer([[-1.0, -1.0, 1.0]], [0.0], "identity"),
        ]
    )
    strip_part = plane_transfer(lifted, Polygon2D([[-1.0, -1.0], [2.0, -1.0], [2.0, 2.0], [-1.0, 2.0]]))
    strips = sorted((r.vertices[:, 0].min(), r.vertices[:, 0].max()) for r in strip_part)
    assert len(strips) == 3
    np.testing.assert_allclose(strips, [(-1, 0), (0, 1), (1, 2)], atol=1e-12)
    for y in np.linspace(-1, 2, 7):
        line = exactline(lifted, Segment([-1.0, y], [2.0, y]))
        pieces = sorted((r.vertices[0][0], r.vertices[1][0]) for r in line)
        np.testing.assert_allclose(pieces, strips, atol=1e-12)
    record_property("detail", f"regions={len(part)} grid_mismatches={mismatches} strips={len(strips)}")


@crit(9, "LP oracle agreement")
def test_lp_oracle_agreement(record_property):
    rng = np.random.default_rng(1009)
    t0 = time.perf_counter()
    status_mismatch = objective_mismatch = feasible_count = 0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, 11))
        lp = LinearProgram(
            rng.uniform(-5, 5, size=(k, n)),
            rng.uniform(-5, 5, size=k),
            rng.uniform(-5, 5, size=n),
            lower=np.full(n, -10.0),
            upper=np.full(n, 10.0),
        )
        out = solve(lp)
        feasible, best = brute_force_lp(lp.a, lp.b, lp.c, lp.lower, lp.upper)
        if (out.status is LpStatus.OPTIMAL) != feasible:
            status_mismatch += 1
        elif feasible:
            feasible_count += 1
            objective_mismatch += int(abs(out.objective - best) > 1e-6)
    elapsed = time.perf_counter() - t0
    record_property(
        "detail",
        f"feasible={feasible_count}/200 status_mismatch={status_mismatch} "
        f"objective_mismatch={objective_mismatch} time={elapsed:.1f}s",
    )
    assert status_mismatch == 0 and objective_mismatch == 0
    assert elapsed < 60.0


def _planted_problem(rng):
    net = decouple(random_dnn(rng, max_layers=3, max_width=6))
    layer = int(rng.integers(1, len(net) + 1))
    p = net.val_layers[layer - 1].num_params
    mask = rng.uniform(size=p) < 0.8
    mask[int(rng.integers(0, p))] = True
    planted = np.where(mask, rng.normal(size=p) * 0.5, 0.0)
    target = apply_delta(net, layer, planted)
    m = net.out_dim
    items = []
    for _ in range(int(rng.integers(1, 5))):
        x = rng.normal(size=net.in_dim)
        y = eval_ddnn(target, x)
        width = rng.uniform(0.01, 0.3, size=m)
        items.append(PointConstraint(x, np.vstack([np.eye(m), -np.eye(m)]), np.concatenate([y + width, width - y])))
    return net, layer, PointSpec(items), mask, planted


@crit(10, "repair soundness and minimality")
def test_repair_soundness_minimality(record_property):
    rng = np.random.default_rng(1010)
    unsound = not_minimal = unexpected_infeasible = 0
    for i in range(50):
        net, layer, spec, mask, planted = _planted_problem(rng)
        norm = NormObjective.L1 if i % 2 == 0 else NormObjective.LINF
        res = point_repair(net, layer, spec, norm, mask=mask)
        if not res.ok:
            unexpected_infeasible += 1
            continue
        unsound += int(not satisfies_points(res.repaired, spec, slack=1e-7))
        not_minimal += int(res.norm_value > norm.of(planted) + 1e-6)
        assert np.all(res.delta[~mask] == 0.0)

    # Small unplanted instances: every Infeasible verdict is re-checked by
    # vertex enumeration. The encoded feasible set is pointed (each delta is
    # sandwiched by non-negative auxiliaries), so an empty vertex set means an
    # empty feasible set.
    infeasible = unconfirmed = 0
    for _ in range(60):
        hidden = int(rng.integers(1, 3))
        net = Dnn(
            [
                Layer(rng.normal(size=(hidden, 1)), rng.normal(size=hidden) * 0.5, "relu"),
                Layer(rng.normal(size=(1, hidden)), rng.normal(size=1) * 0.5, "identity"),
            ]
        )
        layer = int(rng.integers(1, 3))
        xs = rng.normal(size=(2, 1))
        lo = rng.uniform(-3, 3, size=2)
        spec = PointSpec([PointConstraint(xs[j], *box(lo[j], lo[j] + 0.1)) for j in range(2)])
        norm = NormObjective.LINF if rng.uniform() < 0.5 else NormObjective.L1
        res = point_repair(net, layer, spec, norm)
        if res.status is RepairStatus.INFEASIBLE:
            infeasible += 1
            lp = res.program.lp
            feasible, _ = brute_force_lp(lp.a, lp.b, lp.c, lp.lower, lp.upper)
            unconfirmed += int(feasible)
        else:
            unsound += int(not satisfies_points(res.repaired, spec, slack=1e-7))
    record_property(
        "detail",
        f"planted: unsound={unsound} not_minimal={not_minimal} unexpected_infeasible={unexpected_infeasible}; "
        f"small: infeasible={infeasible} unconfirmed={unconfirmed}",
    )
    assert unsound == 0 and not_minimal == 0 and unexpected_infeasible == 0
    assert infeasible > 0 and unconfirmed == 0


@crit(11, "desk-scale classifier repair")
def test_desk_scale_classifier(record_property):
    t0 = time.perf_counter()
    buggy = load_network(FIX / "classifier.json")
    points, _ = load_spec(FIX / "classifier_spec.json", buggy.out_dim)
    repair_set = load_labeled_csv(FIX / "repair_set.csv")
    dd_set = load_labeled_csv(FIX / "drawdown.csv")
    gen_set = load_labeled_csv(FIX / "generalization.csv")
    assert len(repair_set) == 20 and len(dd_set) == 1000 and len(gen_set) == 1000
    assert accuracy(buggy, repair_set) == 0.0

    candidates = []
    for layer in range(1, len(buggy) + 1):
        res = point_repair(buggy, layer, points, NormObjective.L1)
        if res.ok:
            candidates.append((drawdown(buggy, res.repaired, dd_set), layer, res))
    assert candidates
    dd, layer, best = min(candidates, key=lambda c: (c[0], c[1]))
    efficacy = accuracy(best.repaired, repair_set)
    gen = generalization(buggy, best.repaired, gen_set)
    elapsed = time.perf_counter() - t0
    record_property(
        "detail",
        f"best layer={layer} efficacy={efficacy} drawdown={dd:+.3f} generalization={gen:+.3f} time={elapsed:.1f}s",
    )
    assert efficacy == 1.0
    assert -1.0 <= dd <= 1.0 and -1.0 <= gen <= 1.0
    assert elapsed < 30.0
