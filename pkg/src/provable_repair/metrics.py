"""Efficacy, drawdown, generalization, and sampled polytope-spec checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .repair import PolytopeSpec, evaluate


@dataclass(frozen=True, eq=False)
class LabeledSet:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        lab = np.asarray(self.labels)
        if lab.ndim != 1 or lab.shape[0] != pts.shape[0]:
            raise InputError(f"{pts.shape[0]} points but {lab.shape[0]} labels")
        if lab.size and (not np.issubdtype(lab.dtype, np.integer) and not np.all(lab == np.round(lab))):
            raise InputError("labels must be integers")
        lab = lab.astype(np.int64)
        if lab.size and lab.min() < 0:
            raise InputError("labels must be non-negative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.labels.shape[0]


def predict(net, x) -> int:
    # argmax breaks ties toward the lowest index
    return int(np.argmax(evaluate(net, x)))


def accuracy(net, dataset: LabeledSet) -> float:
    if len(dataset) == 0:
        raise InputError("accuracy of an empty set is undefined")
    hits = 0
    for x, label in zip(dataset.points, dataset.labels):
        y = evaluate(net, x)
        if label >= y.shape[0]:
            raise InputError(f"label {label} out of range for {y.shape[0]} outputs")
        hits += int(np.argmax(y) == label)
    return hits / len(dataset)


def drawdown(buggy, repaired, dataset: LabeledSet) -> float:
    """Accuracy lost on the drawdown set; lower is better."""
    return accuracy(buggy, dataset) - accuracy(repaired, dataset)


def generalization(buggy, repaired, dataset: LabeledSet) -> float:
    """Accuracy gained on the generalization set; higher is better."""
    return accuracy(repaired, dataset) - accuracy(buggy, dataset)


@dataclass(frozen=True)
class MetricsReport:
    efficacy: float | None
    drawdown: float | None
    generalization: float | None
    counts: dict

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(buggy, repaired, repair_set=None, drawdown_set=None, generalization_set=None) -> MetricsReport:
    counts = {}
    eff = dd = gen = None
    if repair_set is not None:
        eff = accuracy(repaired, repair_set)
        counts["repair"] = len(repair_set)
    if drawdown_set is not None:
        dd = drawdown(buggy, repaired, drawdown_set)
        counts["drawdown"] = len(drawdown_set)
    if generalization_set is not None:
        gen = generalization(buggy, repaired, generalization_set)
        counts["generalization"] = len(generalization_set)
    return MetricsReport(eff, dd, gen, counts)


@dataclass(frozen=True)
class SampledCheck:
    worst_residual: float
    passed: bool
    samples: int


def check_polytope_spec_sampled(
    net,
    spec: PolytopeSpec,
    samples_per_polytope: int = 1000,
    seed: int = 0,
    slack: float = 1e-7,
) -> SampledCheck:
    """Worst ``a y - b`` over seeded uniform samples of every polytope."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    total = 0
    for item in spec:
        for x in item.polytope.sample(samples_per_polytope, rng):
            y = evaluate(net, x)
            if item.b.size:
                worst = max(worst, float(np.max(item.a @ y - item.b)))
            total += 1
    return SampledCheck(worst, bool(worst <= slack), total)
