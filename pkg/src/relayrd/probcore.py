"""Finite-alphabet joint distributions and information measures (bits)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

#: pmf entries below this are treated as exact zeros inside logarithms
ZERO_FLOOR = 1e-15
#: numerical floor for mutual informations before clamping to zero
MI_FLOOR = -1e-10


class SourceError(ValueError):
    """Raised for malformed distributions, channels or label requests."""


def _labelset(labels: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True)
class JointSource:
    """Joint pmf over labelled finite alphabets.

    ``pmf`` has one axis per label, so ``pmf.ravel()`` is the row-major flat
    layout of the label sequence.
    """

    labels: tuple[str, ...]
    sizes: tuple[int, ...]
    pmf: np.ndarray
    norm_factor: float = 1.0

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise SourceError(f"duplicate labels in {self.labels}")
        if len(self.labels) != len(self.sizes):
            raise SourceError("one alphabet size per label is required")
        if any(int(n) < 1 for n in self.sizes):
            raise SourceError(f"alphabet sizes must be >= 1, got {self.sizes}")
        if tuple(self.pmf.shape) != tuple(self.sizes):
            raise SourceError(f"pmf shape {self.pmf.shape} does not match sizes {self.sizes}")
        self.pmf.setflags(write=False)

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SourceError(f"unknown label {label!r}; have {self.labels}") from None

    def size(self, labels: str | Iterable[str]) -> int:
        return int(np.prod([self.sizes[self.axis(a)] for a in _labelset(labels)], dtype=int))

    @property
    def flat(self) -> np.ndarray:
        return self.pmf.ravel()

    def table(self, labels: str | Iterable[str]) -> np.ndarray:
        """Marginal pmf over ``labels`` with axes in the requested order."""
        labels = _labelset(labels)
        m = marginal(self, labels)
        order = [m.labels.index(a) for a in labels]
        return np.transpose(m.pmf, order)


@dataclass(frozen=True)
class ConditionalChannel:
    """Stochastic matrix p(outputs | parents).

    One row per joint parent symbol (row-major over ``parents``), one column
    per joint output symbol (row-major over ``outputs``).  A single output
    label is the common case; several outputs describe one joint channel such
    as p(v1, v2 | ...).
    """

    outputs: tuple[str, ...]
    output_sizes: tuple[int, ...]
    parents: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] != int(np.prod(self.output_sizes, dtype=int)):
            raise SourceError(f"channel matrix shape {m.shape} inconsistent with outputs {self.output_sizes}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise SourceError("channel entries must be finite and nonnegative")
        if not np.allclose(m.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise SourceError("channel rows must sum to 1")
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)

    @classmethod
    def new(cls, output: str | Sequence[str], output_size: int | Sequence[int],
            parents: Sequence[str], matrix) -> "ConditionalChannel":
        outs = _labelset(output)
        sizes = (int(output_size),) if np.isscalar(output_size) else tuple(int(s) for s in output_size)
        return cls(outs, sizes, tuple(parents), np.asarray(matrix, dtype=float))


def validate_source(values, labels: Sequence[str], sizes: Sequence[int]) -> JointSource:
    """Build a JointSource from raw (possibly unnormalised) values."""
    labels = tuple(labels)
    sizes = tuple(int(s) for s in sizes)
    arr = np.asarray(values, dtype=float).ravel()
    expected = int(np.prod(sizes, dtype=int)) if sizes else 1
    if arr.size != expected:
        raise SourceError(f"dimension mismatch: {arr.size} values for alphabet sizes {sizes} (need {expected})")
    if not np.all(np.isfinite(arr)):
        raise SourceError("pmf values must be finite")
    if np.any(arr < 0):
        raise SourceError(f"negative entry in pmf: {arr[arr < 0][0]}")
    total = float(arr.sum())
    if total <= 0:
        raise SourceError("pmf has no mass")
    return JointSource(labels, sizes, (arr / total).reshape(sizes), norm_factor=1.0 / total)


def marginal(js: JointSource, keep: str | Iterable[str]) -> JointSource:
    keep = set(_labelset(keep))
    if not keep:
        raise SourceError("marginal needs at least one label")
    for a in keep:
        js.axis(a)
    drop = tuple(i for i, a in enumerate(js.labels) if a not in keep)
    kept = [i for i, a in enumerate(js.labels) if a in keep]
    pmf = js.pmf.sum(axis=drop) if drop else js.pmf.copy()
    return JointSource(tuple(js.labels[i] for i in kept), tuple(js.sizes[i] for i in kept), np.array(pmf))


def _set_entropy(js: JointSource, labels: set[str]) -> float:
    if not labels:
        return 0.0
    p = marginal(js, labels).flat
    p = p[p > ZERO_FLOOR]
    return float(-(p * np.log2(p)).sum())


def _check_disjoint(*groups: tuple[str, ...]) -> list[set[str]]:
    sets = [set(g) for g in groups]
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if sets[i] & sets[j]:
                raise SourceError(f"label sets overlap: {sorted(sets[i] & sets[j])}")
    return sets


def entropy(js: JointSource, target, given=()) -> float:
    """H(target | given) in bits."""
    t, g = _check_disjoint(_labelset(target), _labelset(given))
    return max(_set_entropy(js, t | g) - _set_entropy(js, g), 0.0)


def mutual_information(js: JointSource, a, b, given=()) -> float:
    """I(a; b | given) in bits, clamped at zero below the numerical floor.

    ``a`` and ``b`` may share labels (so I(X; X) = H(X)); neither may
    overlap ``given``.
    """
    a, g = _check_disjoint(_labelset(a), _labelset(given))
    b, _ = _check_disjoint(_labelset(b), _labelset(given))
    value = (_set_entropy(js, a | g) + _set_entropy(js, b | g)
             - _set_entropy(js, a | b | g) - _set_entropy(js, g))
    if value < MI_FLOOR:
        raise ArithmeticError(f"mutual information {value} below numerical floor")
    return max(value, 0.0)


def markov_slack(js: JointSource, a, b, c) -> float:
    """I(a; c | b); zero (to tolerance) certifies the chain a - b - c."""
    return mutual_information(js, a, c, given=b)


def extend(js: JointSource, ch: ConditionalChannel) -> JointSource:
    """Adjoin the outputs of ``ch``: p(all, u) = p(all) ch(u | parents)."""
    for o in ch.outputs:
        if o in js.labels:
            raise SourceError(f"label collision: {o!r} already present")
    parent_sizes = [js.sizes[js.axis(p)] for p in ch.parents]
    if ch.matrix.shape[0] != int(np.prod(parent_sizes, dtype=int)):
        raise SourceError(f"channel has {ch.matrix.shape[0]} rows, parents {ch.parents} need {int(np.prod(parent_sizes))}")
    n = len(js.labels)
    k = len(ch.outputs)
    # channel laid out on the parent axes and the new output axes
    shape = [1] * (n + k)
    for p, s in zip(ch.parents, parent_sizes):
        shape[js.axis(p)] = s
    tensor = ch.matrix.reshape(tuple(parent_sizes) + ch.output_sizes)
    order = sorted(range(len(ch.parents)), key=lambda i: js.axis(ch.parents[i]))
    tensor = np.transpose(tensor, order + list(range(len(ch.parents), len(ch.parents) + k)))
    shape[n:] = ch.output_sizes
    joint = js.pmf.reshape(js.sizes + (1,) * k) * tensor.reshape(shape)
    return JointSource(js.labels + ch.outputs, js.sizes + ch.output_sizes, joint)


def deterministic_channel(output: str, output_size: int, parents: Sequence[str],
                          parent_sizes: Sequence[int], fn) -> ConditionalChannel:
    """Channel putting all mass on ``fn(*parent_symbols)``."""
    rows = int(np.prod(parent_sizes, dtype=int))
    m = np.zeros((rows, output_size))
    for r, idx in enumerate(np.ndindex(*parent_sizes) if parent_sizes else [()]):
        m[r, fn(*idx)] = 1.0
    return ConditionalChannel.new(output, output_size, parents, m)


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def doubly_symmetric_binary(crossover: float, z_size: int = 1, z_of=None) -> JointSource:
    """X ~ Bern(1/2), Y = X xor N with N ~ Bern(crossover), Z = z_of(x, y).

    With the default ``z_of`` Z is constant (relay has no side information).
    """
    z_of = z_of or (lambda x, y: 0)
    pmf = np.zeros((2, 2, z_size))
    for x in range(2):
        for y in range(2):
            pmf[x, y, z_of(x, y)] += 0.5 * (crossover if x != y else 1 - crossover)
    return validate_source(pmf, ("X", "Y", "Z"), (2, 2, z_size))
