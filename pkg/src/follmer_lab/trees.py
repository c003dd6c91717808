"""Finite filtered probability spaces with exact rational arithmetic.

A :class:`FilteredTree` is a finite-horizon tree whose nodes at depth t are
the atoms of F_t.  Transition probabilities are exact ``fractions.Fraction``
values, strictly positive, summing to one over each sibling block; null
branches are modeled by omitting them.  F_0 is trivial: there is a single
root.  All processes, stopping times and conditional expectations on such a
tree are exact, so identities can be tested as equalities rather than up to
tolerances.

Stopping times are represented extensionally: an antichain of nodes plus the
paths that never stop.  A stopping time is *finite* when every leaf passes
through a stop node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .errors import EnumerationCapError, TreeValidationError

Rational = Fraction

DEFAULT_ENUMERATION_CAP = 10**6


def frac(x) -> Fraction:
    """Parse a rational from an int, Fraction, or 'num/den' string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


def frac_str(x: Fraction) -> str:
    """Serialize a rational as a decimal-free 'num/den' string (bit-exact)."""
    return f"{x.numerator}/{x.denominator}"


class FilteredTree:
    """Finite filtered tree: nodes, parent links, exact edge probabilities.

    Node ids are strings.  The root has depth 0 and no parent; every leaf
    has depth ``horizon``; every internal node has at least one child whose
    edge probabilities are > 0 and sum to exactly 1.  Nodes may carry a
    state label from a finite alphabet (used by freeze-state constructions).
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, horizon: int, nodes: Sequence[dict]):
        if horizon < 0:
            raise TreeValidationError(f"horizon must be >= 0, got {horizon}")
        self.horizon = int(horizon)
        self.parent: Dict[str, Optional[str]] = {}
        self.prob: Dict[str, Fraction] = {}
        self.state: Dict[str, Optional[str]] = {}
        self.children: Dict[str, List[str]] = {}
        order: List[str] = []
        for spec in nodes:
            nid = str(spec["id"])
            if nid in self.parent:
                raise TreeValidationError(f"duplicate node id {nid!r}", node=nid)
            par = spec.get("parent")
            par = None if par is None else str(par)
            self.parent[nid] = par
            self.state[nid] = spec.get("state")
            self.children[nid] = []
            if par is None:
                self.prob[nid] = Fraction(1)
            else:
                if "prob" not in spec or spec["prob"] is None:
                    raise TreeValidationError(
                        f"non-root node {nid!r} needs an edge probability", node=nid
                    )
                self.prob[nid] = frac(spec["prob"])
            order.append(nid)
        roots = [n for n in order if self.parent[n] is None]
        if len(roots) != 1:
            raise TreeValidationError(f"need exactly one root, got {len(roots)}")
        self.root = roots[0]
        for nid in order:
            par = self.parent[nid]
            if par is not None:
                if par not in self.children:
                    raise TreeValidationError(
                        f"node {nid!r} references unknown parent {par!r}", node=nid
                    )
                self.children[par].append(nid)

        # depths via BFS from the root; detects orphan cycles
        self.depth: Dict[str, int] = {self.root: 0}
        frontier = [self.root]
        while frontier:
            nxt: List[str] = []
            for n in frontier:
                for c in self.children[n]:
                    self.depth[c] = self.depth[n] + 1
                    nxt.append(c)
            frontier = nxt
        if len(self.depth) != len(order):
            missing = sorted(set(order) - set(self.depth))
            raise TreeValidationError(
                f"nodes unreachable from root: {missing}", node=missing[0]
            )

        self._validate()

        # path probability of the atom at each node
        self.path_prob: Dict[str, Fraction] = {}
        for n in self.iter_nodes():
            par = self.parent[n]
            self.path_prob[n] = (
                Fraction(1) if par is None else self.path_prob[par] * self.prob[n]
            )
        self.leaves: List[str] = [n for n in self.iter_nodes() if not self.children[n]]

    def _validate(self) -> None:
        for n, kids in self.children.items():
            if kids:
                total = Fraction(0)
                for c in kids:
                    if self.prob[c] <= 0:
                        raise TreeValidationError(
                            f"edge probability into {c!r} must be > 0, "
                            f"got {self.prob[c]}",
                            node=c,
                        )
                    total += self.prob[c]
                if total != 1:
                    raise TreeValidationError(
                        f"child probabilities at {n!r} sum to {total}, not 1", node=n
                    )
            else:
                if self.depth[n] != self.horizon:
                    raise TreeValidationError(
                        f"leaf {n!r} has depth {self.depth[n]}, horizon is "
                        f"{self.horizon}",
                        node=n,
                    )

    # -- structure helpers -------------------------------------------------

    def iter_nodes(self) -> Iterator[str]:
        """Nodes in breadth-first (nondecreasing depth) order."""
        frontier = [self.root]
        while frontier:
            nxt: List[str] = []
            for n in frontier:
                yield n
                nxt.extend(self.children[n])
            frontier = nxt

    def nodes_at_depth(self, t: int) -> List[str]:
        return [n for n in self.iter_nodes() if self.depth[n] == t]

    def is_leaf(self, n: str) -> bool:
        return not self.children[n]

    def is_chain(self) -> bool:
        """True when every node has at most one child (a single path)."""
        return all(len(kids) <= 1 for kids in self.children.values())

    def path_to(self, n: str) -> List[str]:
        """Node ids from the root down to ``n`` inclusive."""
        path = [n]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        path.reverse()
        return path

    def ancestor_at(self, n: str, t: int) -> str:
        """The depth-t node on the path of ``n`` (t <= depth(n))."""
        if t > self.depth[n]:
            raise ValueError(f"node {n!r} has depth {self.depth[n]} < {t}")
        while self.depth[n] > t:
            n = self.parent[n]
        return n

    def leaves_under(self, n: str) -> List[str]:
        out = []
        stack = [n]
        while stack:
            m = stack.pop()
            if self.is_leaf(m):
                out.append(m)
            else:
                stack.extend(self.children[m])
        return out

    def state_alphabet(self) -> Set[str]:
        return {s for s in self.state.values() if s is not None}

    def effective_state_count(self) -> int:
        """Distinct labels if any are present, else 1 for chains, 2 otherwise.

        An unlabeled branching tree needs at least two distinguishable states
        to realize its paths; an unlabeled chain is the single-state case.
        """
        labels = self.state_alphabet()
        if labels:
            return len(labels)
        return 1 if self.is_chain() else 2

    # -- serialization -----------------------------------------------------

    def to_dict(self, z: Optional["AdaptedProcess"] = None) -> dict:
        nodes = []
        for n in self.iter_nodes():
            entry: dict = {"id": n, "parent": self.parent[n]}
            if self.parent[n] is not None:
                entry["prob"] = frac_str(self.prob[n])
            if self.state[n] is not None:
                entry["state"] = self.state[n]
            if z is not None:
                entry["z"] = frac_str(z[n])
            nodes.append(entry)
        return {"horizon": self.horizon, "nodes": nodes}

    @classmethod
    def from_dict(cls, data: dict) -> Tuple["FilteredTree", Optional["AdaptedProcess"]]:
        tree = cls(data["horizon"], data["nodes"])
        zvals = {
            str(spec["id"]): frac(spec["z"])
            for spec in data["nodes"]
            if spec.get("z") is not None
        }
        if not zvals:
            return tree, None
        missing = [n for n in tree.iter_nodes() if n not in zvals]
        if missing:
            raise TreeValidationError(
                f"process values missing at nodes {sorted(missing)}",
                node=missing[0],
            )
        return tree, AdaptedProcess(zvals)

    @classmethod
    def from_json(cls, path: str) -> Tuple["FilteredTree", Optional["AdaptedProcess"]]:
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str, z: Optional["AdaptedProcess"] = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(z), fh, indent=1, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class AdaptedProcess:
    """One exact rational per node; adaptedness is structural."""

    values: Dict[str, Fraction]

    def __getitem__(self, node: str) -> Fraction:
        return self.values[node]

    @classmethod
    def constant(cls, tree: FilteredTree, c) -> "AdaptedProcess":
        c = frac(c)
        return cls({n: c for n in tree.iter_nodes()})

    @classmethod
    def from_leaf_values(
        cls, tree: FilteredTree, leaf_values: Dict[str, Fraction]
    ) -> "AdaptedProcess":
        """Martingale closure of a terminal variable: E[X_T | F_t] at each node."""
        vals: Dict[str, Fraction] = {}
        for n in reversed(list(tree.iter_nodes())):
            if tree.is_leaf(n):
                vals[n] = frac(leaf_values[n])
            else:
                vals[n] = sum(
                    (tree.prob[c] * vals[c] for c in tree.children[n]), Fraction(0)
                )
        return cls(vals)

    def to_dict(self) -> Dict[str, str]:
        return {n: frac_str(v) for n, v in self.values.items()}


@dataclass(frozen=True)
class PredictableProcess:
    """Values attach one step early: the time-(t+1) value lives on the depth-t node.

    ``initial`` is the time-0 value (root); ``steps[n]`` is the process value
    at time depth(n)+1, shared by all children of ``n`` — predictability is
    structural in this encoding.
    """

    initial: Fraction
    steps: Dict[str, Fraction]

    def value_on(self, tree: FilteredTree, node: str) -> Fraction:
        """Process value at time depth(node) along the path through ``node``."""
        par = tree.parent[node]
        return self.initial if par is None else self.steps[par]

    def value_after(self, node: str) -> Fraction:
        """Process value at time depth(node)+1 for the children of ``node``."""
        return self.steps[node]

    def as_adapted(self, tree: FilteredTree) -> AdaptedProcess:
        return AdaptedProcess({n: self.value_on(tree, n) for n in tree.iter_nodes()})

    def to_dict(self) -> dict:
        return {
            "initial": frac_str(self.initial),
            "steps": {n: frac_str(v) for n, v in self.steps.items()},
        }


@dataclass(frozen=True)
class StoppingTime:
    """An antichain of stop nodes; paths missing the antichain never stop."""

    nodes: frozenset

    @classmethod
    def never(cls) -> "StoppingTime":
        return cls(frozenset())

    @classmethod
    def constant(cls, tree: FilteredTree, t: int) -> "StoppingTime":
        if not 0 <= t <= tree.horizon:
            raise ValueError(f"time {t} outside [0, {tree.horizon}]")
        return cls(frozenset(tree.nodes_at_depth(t)))

    def validate(self, tree: FilteredTree) -> None:
        for n in self.nodes:
            anc = tree.parent[n]
            while anc is not None:
                if anc in self.nodes:
                    raise ValueError(
                        f"stop nodes {anc!r} and {n!r} violate the antichain property"
                    )
                anc = tree.parent[anc]

    def stop_node_on_path(self, tree: FilteredTree, leaf: str) -> Optional[str]:
        for n in tree.path_to(leaf):
            if n in self.nodes:
                return n
        return None

    def time_at(self, tree: FilteredTree, leaf: str) -> Optional[int]:
        """Stopping time of the path through ``leaf``; None means never."""
        n = self.stop_node_on_path(tree, leaf)
        return None if n is None else tree.depth[n]

    def allows_never(self, tree: FilteredTree) -> bool:
        return any(self.stop_node_on_path(tree, l) is None for l in tree.leaves)

    def is_finite(self, tree: FilteredTree) -> bool:
        return not self.allows_never(tree)


@dataclass(frozen=True)
class ExtendedOutcome:
    """A point of the cemetery/freeze-extended outcome space.

    ``base_node`` is the last alive node; ``kill_time`` is in 1..T or None for
    paths that are never killed (then ``base_node`` is a leaf).  ``target`` is
    'cemetery' or a freeze-state label and is None for alive outcomes.
    """

    base_node: str
    kill_time: Optional[int]
    target: Optional[str]

    @property
    def alive(self) -> bool:
        return self.kill_time is None


# -- operations -------------------------------------------------------------


def one_step_expectation(tree: FilteredTree, x: AdaptedProcess, node: str) -> Fraction:
    """E[X_{t+1} | F_t] at an internal node: probability-weighted child average."""
    return sum((tree.prob[c] * x[c] for c in tree.children[node]), Fraction(0))


def conditional_expectation(
    tree: FilteredTree, x: AdaptedProcess, t: int
) -> AdaptedProcess:
    """Project the terminal values of ``x`` onto F_t.

    Returns the process that keeps x's own values strictly before time t and,
    from time t on, is constant on each depth-t subtree, equal to the
    P-weighted average of x over that subtree's leaves.  At t = horizon this
    is x itself; at t = 0 it is the constant E[x_T].
    """
    if not 0 <= t <= tree.horizon:
        raise ValueError(f"time {t} outside [0, {tree.horizon}]")
    avg: Dict[str, Fraction] = {}
    for n in reversed(list(tree.iter_nodes())):
        if tree.is_leaf(n):
            avg[n] = x[n]
        else:
            avg[n] = sum((tree.prob[c] * avg[c] for c in tree.children[n]), Fraction(0))
    vals: Dict[str, Fraction] = {}
    for n in tree.iter_nodes():
        if tree.depth[n] < t:
            vals[n] = x[n]
        else:
            vals[n] = avg[tree.ancestor_at(n, t)]
    return AdaptedProcess(vals)


@dataclass(frozen=True)
class SupermartingaleReport:
    ok: bool
    is_martingale: bool
    first_violation_node: Optional[str] = None
    reason: Optional[str] = None


def is_supermartingale(tree: FilteredTree, z: AdaptedProcess) -> SupermartingaleReport:
    """Check Z >= 0, Z_0 = 1 and E[Z_{t+1}|F_t] <= Z_t at every internal node.

    Exact comparisons throughout; ``is_martingale`` reports equality at every
    internal node.
    """
    for n in tree.iter_nodes():
        if z[n] < 0:
            return SupermartingaleReport(
                False, False, first_violation_node=n, reason="negative value"
            )
    if z[tree.root] != 1:
        return SupermartingaleReport(
            False,
            False,
            first_violation_node=tree.root,
            reason=f"initial value {z[tree.root]} != 1",
        )
    martingale = True
    for n in tree.iter_nodes():
        if tree.is_leaf(n):
            continue
        e = one_step_expectation(tree, z, n)
        if e > z[n]:
            return SupermartingaleReport(
                False,
                False,
                first_violation_node=n,
                reason=f"one-step mean {e} exceeds {z[n]}",
            )
        if e != z[n]:
            martingale = False
    return SupermartingaleReport(True, martingale)


def count_stopping_times(tree: FilteredTree) -> int:
    """Number of antichain stopping times, by the product recursion.

    Independent of the enumeration: a node's count is 1 (stop here) plus the
    product of its children's counts; a leaf contributes 2.
    """
    counts: Dict[str, int] = {}
    for n in reversed(list(tree.iter_nodes())):
        if tree.is_leaf(n):
            counts[n] = 2
        else:
            prod = 1
            for c in tree.children[n]:
                prod *= counts[c]
            counts[n] = 1 + prod
    return counts[tree.root]


def enumerate_stopping_times(
    tree: FilteredTree, cap: int = DEFAULT_ENUMERATION_CAP
) -> List[StoppingTime]:
    """All antichain stopping times, duplicate-free, including constants and never.

    Refuses with :class:`EnumerationCapError` when the exact count exceeds
    ``cap`` (computed up front, without enumerating).
    """
    count = count_stopping_times(tree)
    if count > cap:
        raise EnumerationCapError(count, cap)

    def antichains(n: str) -> List[frozenset]:
        if tree.is_leaf(n):
            return [frozenset(), frozenset([n])]
        partial: List[frozenset] = [frozenset()]
        for c in tree.children[n]:
            child_choices = antichains(c)
            partial = [p | q for p in partial for q in child_choices]
        partial.append(frozenset([n]))
        return partial

    return [StoppingTime(s) for s in antichains(tree.root)]


@dataclass(frozen=True)
class StopValue:
    """X_rho per stopped leaf plus the exact expectation E[X_rho 1_{rho<inf}]."""

    leaf_values: Dict[str, Fraction]
    expectation: Fraction


def stop_value(
    tree: FilteredTree, x: AdaptedProcess, rho: StoppingTime
) -> StopValue:
    """Value of x at the stopping time; leaves below a stop node inherit its value."""
    leaf_values: Dict[str, Fraction] = {}
    expectation = Fraction(0)
    for leaf in tree.leaves:
        s = rho.stop_node_on_path(tree, leaf)
        if s is not None:
            leaf_values[leaf] = x[s]
    for s in rho.nodes:
        expectation += tree.path_prob[s] * x[s]
    return StopValue(leaf_values, expectation)
