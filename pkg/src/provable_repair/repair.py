"""Single-layer repair of point and polytope specifications.

Point repair linearizes the decoupled network's output in one value layer's
parameters at each spec point (exactly, see ``jacobian``), turns every output
constraint into an LP row over the parameter delta, and solves for the
minimum-norm delta. Polytope repair first reduces each input polytope to the
vertices of its linear regions, each tagged with its region's pattern.
"""

from __future__ import annotations

import enum
import re
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .ddnn import Ddnn, _layer_index, apply_delta, decouple, eval_ddnn
from .errors import InputError, RepairError, RepairTimeoutError
from .jacobian import param_jacobian
from .lp import (
    LpStatus,
    MinNormProgram,
    NormObjective,
    encode_min_norm,
    solve,
    solve_external,
)
from .network import ActivationPattern, Dnn, as_input, eval_dnn, require_pwl
from .regions import Polygon2D, Polytope, Segment, key_points

DEFAULT_MARGIN = 1e-6


def evaluate(net, x) -> np.ndarray:
    if isinstance(net, Ddnn):
        return eval_ddnn(net, x)
    return eval_dnn(net, x)


def classification_rows(label: int, num_outputs: int, margin: float = DEFAULT_MARGIN):
    """Rows ``(e_j - e_label) . y <= -margin`` for every ``j != label``."""
    if not 0 <= label < num_outputs:
        raise InputError(f"label {label} out of range for {num_outputs} outputs")
    a = []
    for j in range(num_outputs):
        if j != label:
            r = np.zeros(num_outputs)
            r[j] = 1.0
            r[label] = -1.0
            a.append(r)
    return np.array(a).reshape(-1, num_outputs), np.full(len(a), -float(margin))


def _constraint_arrays(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape[0] != b.shape[0]:
        raise InputError(f"constraint matrix has {a.shape[0]} rows but rhs has {b.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("constraints must be finite")
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


@dataclass(frozen=True, eq=False)
class PointConstraint:
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise InputError("spec point must be a finite vector")
        x.setflags(write=False)
        a, b = _constraint_arrays(self.a, self.b)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True, eq=False)
class PolytopeConstraint:
    polytope: Polytope
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not isinstance(self.polytope, (Segment, Polygon2D)):
            raise InputError("polytope must be a Segment or Polygon2D")
        a, b = _constraint_arrays(self.a, self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def _check_outputs(items, num_outputs: Optional[int]):
    widths = {item.a.shape[1] for item in items}
    if len(widths) > 1:
        raise InputError(f"constraint matrices disagree on output width: {sorted(widths)}")
    if num_outputs is not None and widths and widths != {num_outputs}:
        raise InputError(f"constraints have {widths.pop()} columns, network has {num_outputs} outputs")


@dataclass(frozen=True, eq=False)
class PointSpec:
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        _check_outputs(items, None)
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


@dataclass(frozen=True, eq=False)
class PolytopeSpec:
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        _check_outputs(items, None)
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def polytopes(self) -> list:
        return [item.polytope for item in self.items]


@dataclass(frozen=True)
class SatisfactionReport:
    ok: bool
    worst: tuple  # per constraint item: max over rows of (a y - b)

    def __bool__(self):
        return self.ok


def satisfies_points(net, spec: PointSpec, slack: float = 1e-9) -> SatisfactionReport:
    worst = []
    for item in spec:
        y = evaluate(net, item.x)
        if item.a.shape[1] != y.shape[0]:
            raise InputError(f"constraint has {item.a.shape[1]} columns, network has {y.shape[0]} outputs")
        worst.append(float(np.max(item.a @ y - item.b)) if item.b.size else -np.inf)
    return SatisfactionReport(all(w <= slack for w in worst), tuple(worst))


# --------------------------------------------------------------------------
# masks

_NAME = re.compile(r"^L(\d+)\.(w\[(\d+)\]\[(\d+)\]|b\[(\d+)\])$")


def param_names(net, layer: int) -> list:
    """Names of a layer's parameters in Jacobian column order."""
    layers = net.val_layers if isinstance(net, Ddnn) else net.layers
    lay = layers[_layer_index(Ddnn(layers, layers), layer)]
    names = [f"L{layer}.w[{r}][{c}]" for r in range(lay.out_dim) for c in range(lay.in_dim)]
    return names + [f"L{layer}.b[{r}]" for r in range(lay.out_dim)]


def parse_mask(net, layer: int, spec: Union[str, Sequence[str]]) -> np.ndarray:
    """Boolean vector of repairable parameters for ``layer``.

    ``spec`` is a comma-separated string or a list of names such as
    ``"L1.w[0][2]"`` and ``"L1.b[2]"``. The alias ``"paper4"`` selects the
    first column of weights for three neurons plus the third bias, the four
    parameters drawn in the textbook 1-3-1 example.
    """
    names = [s.strip() for s in (spec.split(",") if isinstance(spec, str) else spec) if s.strip()]
    all_names = param_names(net, layer)
    index = {n: i for i, n in enumerate(all_names)}
    mask = np.zeros(len(all_names), dtype=bool)
    for name in names:
        if name == "paper4":
            wanted = [f"L{layer}.w[{r}][0]" for r in range(3)] + [f"L{layer}.b[2]"]
            missing = [w for w in wanted if w not in index]
            if missing:
                raise InputError(f"paper4 mask needs parameters {missing} which layer {layer} lacks")
            for w in wanted:
                mask[index[w]] = True
            continue
        if not _NAME.match(name):
            raise InputError(f"bad parameter name {name!r} (expected e.g. L1.w[0][2] or L1.b[2])")
        if name not in index:
            raise InputError(f"parameter {name!r} does not belong to layer {layer}")
        mask[index[name]] = True
    return mask


# --------------------------------------------------------------------------
# repair


class RepairStatus(enum.Enum):
    REPAIRED = "repaired"
    INFEASIBLE = "infeasible"


@dataclass(eq=False)
class RepairResult:
    status: RepairStatus
    layer: int
    norm: NormObjective
    repaired: Optional[Ddnn] = None
    delta: Optional[np.ndarray] = None
    norm_value: Optional[float] = None
    key_point_count: int = 0
    timings: dict = field(default_factory=dict)
    program: Optional[MinNormProgram] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is RepairStatus.REPAIRED

    def report(self) -> dict:
        """Machine-readable summary; only ``timings`` varies between identical runs."""
        out = {
            "status": self.status.value,
            "layer": self.layer,
            "norm": self.norm.value,
            "norm_value": self.norm_value,
            "key_point_count": self.key_point_count,
        }
        if self.delta is not None:
            d = self.delta
            out["delta"] = {
                "size": int(d.size),
                "nonzero": int(np.count_nonzero(d)),
                "l1": float(np.sum(np.abs(d))),
                "linf": float(np.max(np.abs(d))) if d.size else 0.0,
                "values": [float(v) for v in d],
            }
        out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out


def _check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise RepairTimeoutError("repair exceeded the time budget")


def _solve(program: MinNormProgram, solver, deadline):
    if solver in (None, "builtin"):
        return solve(program.lp, deadline=deadline)
    return solve_external(program.lp, solver)


def point_repair(
    net: Union[Dnn, Ddnn],
    layer: int,
    spec: PointSpec,
    norm: Union[NormObjective, str] = NormObjective.L1,
    mask=None,
    patterns: Optional[Sequence[Optional[ActivationPattern]]] = None,
    solver="builtin",
    deadline: Optional[float] = None,
) -> RepairResult:
    """Minimum-norm repair of value layer ``layer`` (1-based) for a point spec.

    An Infeasible result certifies, up to solver tolerance, that no change to
    this layer alone satisfies the spec. ``patterns`` optionally pins the
    activation pattern used at each point; polytope repair uses this for
    points on region boundaries.
    """
    norm = NormObjective.parse(norm)
    ddnn = net if isinstance(net, Ddnn) else decouple(net)
    k = _layer_index(ddnn, layer)
    if patterns is not None:
        require_pwl(ddnn)
        if len(patterns) != len(spec):
            raise InputError(f"got {len(patterns)} patterns for {len(spec)} spec points")
    if isinstance(mask, (str, list, tuple)):
        mask = parse_mask(ddnn, layer, mask)
    num = ddnn.val_layers[k].num_params

    t0 = time.perf_counter()
    rows = []
    for idx, item in enumerate(spec):
        x = as_input(item.x, ddnn.in_dim)
        if item.a.shape[1] != ddnn.out_dim:
            raise InputError(
                f"spec item {idx} constrains {item.a.shape[1]} outputs, network has {ddnn.out_dim}"
            )
        pat = patterns[idx] if patterns is not None else None
        jac = param_jacobian(ddnn, layer, x, pattern_override=pat)
        coeff = item.a @ jac.matrix
        rhs = item.b - item.a @ jac.base
        rows.extend(zip(coeff, rhs))
        _check_deadline(deadline)
    t1 = time.perf_counter()
    program = encode_min_norm(rows, num, norm, mask)
    outcome = _solve(program, solver, deadline)
    t2 = time.perf_counter()
    timings = {"jacobian": t1 - t0, "lp": t2 - t1}

    if outcome.status is not LpStatus.OPTIMAL:
        return RepairResult(RepairStatus.INFEASIBLE, layer, norm, timings=timings, program=program)
    delta = program.delta(outcome.x)
    repaired = apply_delta(ddnn, layer, delta)
    return RepairResult(
        RepairStatus.REPAIRED,
        layer,
        norm,
        repaired=repaired,
        delta=delta,
        norm_value=norm.of(delta),
        timings=timings,
        program=program,
    )


def polytope_repair(
    net: Union[Dnn, Ddnn],
    layer: int,
    spec: PolytopeSpec,
    norm: Union[NormObjective, str] = NormObjective.L1,
    mask=None,
    solver="builtin",
    deadline: Optional[float] = None,
) -> RepairResult:
    """Minimum-norm single-layer repair so every point of every polytope meets its constraints."""
    require_pwl(net)
    t0 = time.perf_counter()
    items, patterns = [], []
    for kp in key_points(net, spec.polytopes):
        src = spec.items[kp.source]
        items.append(PointConstraint(kp.point, src.a, src.b))
        patterns.append(kp.pattern)
        _check_deadline(deadline)
    t1 = time.perf_counter()
    result = point_repair(
        net, layer, PointSpec(items), norm, mask, patterns=patterns, solver=solver, deadline=deadline
    )
    result.key_point_count = len(items)
    result.timings = {"regions": t1 - t0, **result.timings}
    return result


def repair_all_layers(
    net: Union[Dnn, Ddnn],
    spec: Union[PointSpec, PolytopeSpec],
    norm: Union[NormObjective, str] = NormObjective.L1,
    masks: Optional[dict] = None,
    solver="builtin",
) -> list:
    """Repair each layer independently.

    Entry ``i`` is the RepairResult for layer ``i + 1`` or the RepairError
    raised while repairing it; one layer failing never stops the sweep.
    ``masks`` optionally maps a layer number to its mask.
    """
    masks = masks or {}
    fn = polytope_repair if isinstance(spec, PolytopeSpec) else point_repair
    out = []
    for layer in range(1, len(net) + 1):
        try:
            out.append(fn(net, layer, spec, norm, masks.get(layer), solver=solver))
        except RepairError as exc:
            out.append(exc)
    return out
