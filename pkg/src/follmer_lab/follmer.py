"""Exact Föllmer pairs on the cemetery-extended tree, and their diagnostics.

The construction integrates out the uniform quantile randomization of the
killing time in closed form: with the multiplicative split Z = M * D, the
outcome "history ends at node n, killed at time depth(n)+1" gets mass
P[n] * M[n] * (D at n - D after n), and each surviving leaf keeps mass
P[leaf] * Z[leaf].  Kill targets are either the cemetery state or a freeze
state x*; the two choices produce the non-uniqueness witness.

Verification checks the Kunita-Yoeurp identity Q[A and {rho < tau}] =
E_P[Z_rho 1_A] atom by atom, for one stopping time or for every enumerated
one, always by exact rational comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

from .decompositions import multiplicative
from .errors import FreezeTargetError, MartingaleWitnessError, NotSupermartingaleError
from .trees import (
    AdaptedProcess,
    ExtendedOutcome,
    FilteredTree,
    StoppingTime,
    enumerate_stopping_times,
    frac,
    frac_str,
    is_supermartingale,
)

CEMETERY = "cemetery"


@dataclass(frozen=True)
class FollmerPair:
    """An outcome measure on the extended tree together with its kill time.

    ``outcomes`` maps :class:`ExtendedOutcome` to exact mass.  The kill-time
    coordinate of each outcome is the stopping time of the pair; no original
    (surviving) path carries a kill time, so the reference measure sees the
    kill time as infinite.
    """

    outcomes: Dict[ExtendedOutcome, Fraction]
    target: str  # CEMETERY or the freeze-state label

    def total_mass(self) -> Fraction:
        return sum(self.outcomes.values(), Fraction(0))

    def killed_mass(self) -> Fraction:
        return sum(
            (m for o, m in self.outcomes.items() if not o.alive), Fraction(0)
        )

    def kill_time_distribution(self) -> Dict[Optional[int], Fraction]:
        dist: Dict[Optional[int], Fraction] = {}
        for o, m in self.outcomes.items():
            dist[o.kill_time] = dist.get(o.kill_time, Fraction(0)) + m
        return dist

    def to_dict(self) -> dict:
        rows = []
        for o in sorted(
            self.outcomes, key=lambda o: (o.kill_time is None, o.kill_time or 0, o.base_node)
        ):
            rows.append(
                {
                    "history_node": o.base_node,
                    "kill_time": "never" if o.alive else o.kill_time,
                    "target": o.target,
                    "mass": frac_str(self.outcomes[o]),
                }
            )
        return {"target": self.target, "outcomes": rows}

    @classmethod
    def from_dict(cls, data: dict) -> "FollmerPair":
        outcomes: Dict[ExtendedOutcome, Fraction] = {}
        for row in data["outcomes"]:
            kt = row["kill_time"]
            kt = None if kt in (None, "never") else int(kt)
            o = ExtendedOutcome(str(row["history_node"]), kt, row.get("target"))
            outcomes[o] = frac(row["mass"])
        return cls(outcomes, data["target"])

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "FollmerPair":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_freeze_admissible(tree: FilteredTree, x_star: str) -> None:
    """No charged path may sit at x* for a positive duration through the horizon.

    The discrete surrogate of "the path is constant at x* on some interval":
    states equal to x* at every time in {t, ..., T} for some t <= T-1.  A
    single visit at the final instant does not witness freezing, so fresh
    symbols and states visited only momentarily are admissible.
    """
    for leaf in tree.leaves:
        if tree.state[leaf] != x_star:
            continue
        path_nodes = tree.path_to(leaf)
        run = 0
        for n in reversed(path_nodes):
            if tree.state[n] == x_star:
                run += 1
            else:
                break
        if run >= 2:
            path = "/".join(path_nodes)
            raise FreezeTargetError(
                f"freeze state {x_star!r} collides with charged path {path}: "
                f"it sits at {x_star!r} for {run} consecutive times through "
                f"the horizon",
                path=path,
            )


def construct_follmer(
    tree: FilteredTree,
    z: AdaptedProcess,
    target: str = CEMETERY,
) -> FollmerPair:
    """Quantile-killing construction of a Föllmer pair for Z.

    ``target`` is :data:`CEMETERY` or a freeze-state label x* (then no charged
    path may end in x*).  The uniform randomization is integrated out exactly:
    the killing factor D is a step function along each path, so kill-time
    masses are its successive decrements weighted by the martingale part.
    """
    rep = is_supermartingale(tree, z)
    if not rep.ok:
        raise NotSupermartingaleError(
            f"not a supermartingale: {rep.reason} at node {rep.first_violation_node!r}",
            node=rep.first_violation_node,
        )
    if target != CEMETERY:
        _check_freeze_admissible(tree, target)
    dec = multiplicative(tree, z)
    m, d = dec.martingale, dec.factor
    outcomes: Dict[ExtendedOutcome, Fraction] = {}
    for n in tree.iter_nodes():
        if not tree.is_leaf(n):
            drop = d.value_on(tree, n) - d.value_after(n)
            if drop != 0:
                mass = tree.path_prob[n] * m[n] * drop
                if mass != 0:
                    o = ExtendedOutcome(n, tree.depth[n] + 1, target)
                    outcomes[o] = outcomes.get(o, Fraction(0)) + mass
        else:
            alive = tree.path_prob[n] * z[n]
            if alive != 0:
                outcomes[ExtendedOutcome(n, None, None)] = alive
    return FollmerPair(outcomes, target)


# -- Kunita-Yoeurp verification ----------------------------------------------


@dataclass
class KYAtomRow:
    rho_id: str
    atom_node: str
    lhs: Fraction
    rhs: Fraction

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs


@dataclass
class KYReport:
    ok: bool
    rows: List[KYAtomRow] = field(default_factory=list)
    n_stopping_times: int = 1
    first_failure: Optional[KYAtomRow] = None


def _survivor_mass_by_node(
    tree: FilteredTree, pair: FollmerPair
) -> Dict[str, Fraction]:
    """For each node s: Q-mass of outcomes alive strictly past depth(s) within cyl(s).

    An outcome killed at time u with history n lies in the cylinder of s and
    survives past depth(s) exactly when s is an ancestor-or-equal of n; alive
    outcomes contribute through their leaf.  Aggregated bottom-up in O(nodes).
    """
    agg: Dict[str, Fraction] = {n: Fraction(0) for n in tree.iter_nodes()}
    for o, mass in pair.outcomes.items():
        agg[o.base_node] += mass
    for n in reversed(list(tree.iter_nodes())):
        for c in tree.children[n]:
            agg[n] += agg[c]
    return agg


def verify_ky(
    pair: FollmerPair,
    tree: FilteredTree,
    z: AdaptedProcess,
    rho: StoppingTime,
    rho_id: str = "rho",
    survivor_mass: Optional[Dict[str, Fraction]] = None,
    collect_rows: bool = True,
) -> KYReport:
    """Exact per-atom comparison of Q[A and {rho < tau}] with E_P[Z_rho 1_A].

    One atom per stop node; paths the stopping time never reaches contribute
    atoms with both sides zero (the indicator vanishes there).
    """
    if survivor_mass is None:
        survivor_mass = _survivor_mass_by_node(tree, pair)
    ok = True
    rows: List[KYAtomRow] = []
    first_failure = None
    for s in sorted(rho.nodes):
        lhs = survivor_mass[s]
        rhs = tree.path_prob[s] * z[s]
        row = KYAtomRow(rho_id, s, lhs, rhs)
        if lhs != rhs:
            ok = False
            if first_failure is None:
                first_failure = row
        if collect_rows:
            rows.append(row)
    if collect_rows and rho.allows_never(tree):
        for leaf in tree.leaves:
            if rho.stop_node_on_path(tree, leaf) is None:
                rows.append(KYAtomRow(rho_id, leaf, Fraction(0), Fraction(0)))
    return KYReport(ok, rows, 1, first_failure)


def verify_ky_all(
    pair: FollmerPair,
    tree: FilteredTree,
    z: AdaptedProcess,
    cap: int = 10**6,
    collect_rows: bool = False,
) -> KYReport:
    """Run :func:`verify_ky` over every enumerated stopping time."""
    survivor_mass = _survivor_mass_by_node(tree, pair)
    ok = True
    rows: List[KYAtomRow] = []
    first_failure = None
    count = 0
    for idx, rho in enumerate(enumerate_stopping_times(tree, cap=cap)):
        rep = verify_ky(
            pair,
            tree,
            z,
            rho,
            rho_id=f"rho{idx:05d}",
            survivor_mass=survivor_mass,
            collect_rows=collect_rows,
        )
        count += 1
        if not rep.ok:
            ok = False
            if first_failure is None:
                first_failure = rep.first_failure
        rows.extend(rep.rows)
    return KYReport(ok, rows, count, first_failure)


def write_ky_ledger(report: KYReport, path: str) -> None:
    """Per-atom CSV ledger: rho_id, atom_node, lhs, rhs, equal."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rho_id,atom_node,lhs,rhs,equal\n")
        for row in report.rows:
            fh.write(
                f"{row.rho_id},{row.atom_node},{frac_str(row.lhs)},"
                f"{frac_str(row.rhs)},{str(row.equal).lower()}\n"
            )


# -- level-crossing localization times ----------------------------------------


def tau_hat(tree: FilteredTree, z: AdaptedProcess, n: int) -> StoppingTime:
    """Stop at the first node with Z >= n, no later than time min(n, horizon).

    On a finite tree the n-limit of these times is the never-stopping time:
    once n exceeds both the maximum of Z and the horizon, the threshold is
    unreachable and the cap time n runs past the horizon.
    """
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    cap_time = min(n, tree.horizon)
    stops: List[str] = []

    def walk(node: str) -> None:
        if z[node] >= n or tree.depth[node] == cap_time:
            stops.append(node)
            return
        for c in tree.children[node]:
            walk(c)

    walk(tree.root)
    return StoppingTime(frozenset(stops))


def tau_hat_limit(tree: FilteredTree, z: AdaptedProcess) -> StoppingTime:
    """The n-limit of the capped crossing times: never, on any finite tree."""
    return StoppingTime.never()


# -- uniqueness diagnostics ----------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    is_martingale: bool
    mass_lost: Fraction
    tau_lt_zeta_negligible: bool
    unique_measure_for_tau: bool
    unique_pair: Optional[bool]
    witness_available: bool
    reason: str

    def to_dict(self) -> dict:
        return {
            "is_martingale": self.is_martingale,
            "mass_lost": frac_str(self.mass_lost),
            "tau_lt_zeta_negligible": self.tau_lt_zeta_negligible,
            "unique_measure_for_tau": self.unique_measure_for_tau,
            "unique_pair": self.unique_pair,
            "witness_available": self.witness_available,
            "reason": self.reason,
        }


def uniqueness_report(
    tree: FilteredTree, z: AdaptedProcess, pair: FollmerPair
) -> UniquenessReport:
    """Uniqueness verdicts for the measure given tau, and for the pair.

    The measure for the given kill time is unique exactly when {tau < zeta}
    is negligible under the pair: immediate for cemetery targets (killed
    outcomes hit the cemetery at their kill time), false for freeze targets
    whenever mass is lost (frozen outcomes never reach the cemetery).  At the
    pair level, martingales pin the pair down; a strict supermartingale on a
    tree with at least two effective states admits the freeze-state witness,
    while an unlabeled single-path tree does not.
    """
    rep = is_supermartingale(tree, z)
    mass_lost = pair.killed_mass()
    if pair.target == CEMETERY:
        negligible = True  # every killed outcome satisfies tau = zeta
    else:
        negligible = mass_lost == 0  # frozen outcomes have zeta = never > tau
    if rep.is_martingale:
        return UniquenessReport(
            True,
            mass_lost,
            negligible,
            negligible,
            True,
            False,
            "martingale: no mass lost, the capped crossing times never fire "
            "and the pair is pinned down",
        )
    if tree.effective_state_count() >= 2:
        return UniquenessReport(
            False,
            mass_lost,
            negligible,
            negligible,
            False,
            True,
            "strict supermartingale with >= 2 states: cemetery and "
            "freeze-state pairs disagree on the killed outcomes",
        )
    return UniquenessReport(
        False,
        mass_lost,
        negligible,
        negligible,
        True,
        False,
        "single-state chain: the outcome space {original path, killed "
        "truncations} pins the measure down",
    )


def total_variation(p1: FollmerPair, p2: FollmerPair) -> Fraction:
    """Half the L1 distance between two outcome measures, exactly."""
    keys = set(p1.outcomes) | set(p2.outcomes)
    l1 = sum(
        (
            abs(p1.outcomes.get(k, Fraction(0)) - p2.outcomes.get(k, Fraction(0)))
            for k in keys
        ),
        Fraction(0),
    )
    return l1 / 2


def nonuniqueness_witness(
    tree: FilteredTree, z: AdaptedProcess, x_star: str
) -> Tuple[FollmerPair, FollmerPair, Fraction]:
    """Two distinct Föllmer pairs for a strict supermartingale: cemetery vs freeze.

    Both pairs satisfy the Kunita-Yoeurp identity for every stopping time;
    they disagree exactly on where the killed outcomes sit, so their total
    variation distance equals the lost mass.
    """
    pair_cemetery = construct_follmer(tree, z, CEMETERY)
    if pair_cemetery.killed_mass() == 0:
        raise MartingaleWitnessError(
            "witness requires a non-martingale: no mass is lost"
        )
    pair_freeze = construct_follmer(tree, z, x_star)
    return pair_cemetery, pair_freeze, total_variation(pair_cemetery, pair_freeze)


def chain_measure_from_constant_times(
    tree: FilteredTree, z: AdaptedProcess
) -> Dict[Optional[int], Fraction]:
    """Unique kill-time law on a single-path tree, solved from constant times.

    On a chain the outcome space is {kill at 1..T} plus the surviving path,
    and the identities at the constant times t = 0..T form a triangular
    system: mass surviving past t must be E[Z_t], so the kill mass at t is
    the decrement E[Z_{t-1}] - E[Z_t] and the surviving mass is E[Z_T].
    Solving it is the independent uniqueness oracle for chains.
    """
    if not tree.is_chain():
        raise ValueError("constant-time solve applies to single-path trees only")
    path = tree.path_to(tree.leaves[0])
    law: Dict[Optional[int], Fraction] = {}
    for t in range(1, tree.horizon + 1):
        law[t] = z[path[t - 1]] - z[path[t]]
    law[None] = z[path[tree.horizon]]
    return {k: v for k, v in law.items() if v != 0}
