"""Seven-way communication-structure classes over inbound behavior.

A user is classified by which of three predicates hold on the cumulative
directed graph:

  converging: some other user links to them without a link back,
  self-looping: they link to themselves,
  reciprocal: some other user links both ways with them.

The seven non-empty predicate combinations get fixed labels; users with no
inbound edge and no self-loop stay unclassified. Converging is the one
predicate that can be revoked on a later day (the reverse edge may appear),
while self-looping and reciprocal only ever switch on.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import UnknownUserError
from .graph import NetworkSnapshot


class StructureClass(str, Enum):
    CON = "Con"    # converging only
    C_S = "C_S"    # converging + self-loop
    SEL = "Sel"    # self-loop only
    S_R = "S_R"    # self-loop + reciprocal
    REC = "Rec"    # reciprocal only
    R_C = "R_C"    # reciprocal + converging
    CSR = "CSR"    # all three


# Keyed by (converging, self_loop, reciprocal).
_LABELS: dict[tuple[bool, bool, bool], StructureClass] = {
    (True, False, False): StructureClass.CON,
    (True, True, False): StructureClass.C_S,
    (False, True, False): StructureClass.SEL,
    (False, True, True): StructureClass.S_R,
    (False, False, True): StructureClass.REC,
    (True, False, True): StructureClass.R_C,
    (True, True, True): StructureClass.CSR,
}


@dataclass(slots=True)
class StructureBreakdown:
    proportions: dict[StructureClass, float]
    classified_users: int


def _label(converging: bool, self_loop: bool, reciprocal: bool) -> StructureClass | None:
    if not (converging or self_loop or reciprocal):
        return None
    return _LABELS[(converging, self_loop, reciprocal)]


def _adjacency(snapshot: NetworkSnapshot) -> tuple[dict[str, set[str]], dict[str, set[str]]]:
    in_sets: dict[str, set[str]] = {}
    out_sets: dict[str, set[str]] = {}
    for (src, dst) in snapshot.edges:
        out_sets.setdefault(src, set()).add(dst)
        in_sets.setdefault(dst, set()).add(src)
    return in_sets, out_sets


def classify_user(user_id: str, snapshot: NetworkSnapshot) -> StructureClass | None:
    """Label one user, or None when they have no inbound edge or self-loop."""
    if user_id not in snapshot.nodes:
        raise UnknownUserError(user_id)
    in_sets, out_sets = _adjacency(snapshot)
    return _classify_from_sets(user_id, in_sets, out_sets)


def _classify_from_sets(
    user_id: str,
    in_sets: dict[str, set[str]],
    out_sets: dict[str, set[str]],
) -> StructureClass | None:
    inbound = in_sets.get(user_id, set())
    outbound = out_sets.get(user_id, set())
    self_loop = user_id in outbound
    others_in = inbound - {user_id}
    reciprocal = bool(others_in & outbound)
    converging = bool(others_in - outbound)
    return _label(converging, self_loop, reciprocal)


def structure_proportions(snapshot: NetworkSnapshot) -> StructureBreakdown:
    """Share of each structure class among all classified users.

    Proportions sum to 1 whenever anyone is classified; an empty graph gives
    an explicit empty breakdown.
    """
    in_sets, out_sets = _adjacency(snapshot)
    tally = {cls: 0 for cls in StructureClass}
    classified = 0
    for user in snapshot.nodes:
        label = _classify_from_sets(user, in_sets, out_sets)
        if label is not None:
            tally[label] += 1
            classified += 1
    if classified == 0:
        return StructureBreakdown(proportions={}, classified_users=0)
    return StructureBreakdown(
        proportions={cls: tally[cls] / classified for cls in StructureClass},
        classified_users=classified,
    )


class StructureTracker:
    """Incremental classifier fed one new distinct edge at a time.

    Keeps per-user counts of one-way inbound and mutual neighbors so each
    edge insertion is O(1) and daily breakdowns need no graph rescan. Weight
    growth on an existing edge never changes a class, so callers only feed
    first appearances.
    """

    def __init__(self) -> None:
        self._out: dict[str, set[str]] = {}
        self._one_way_in: dict[str, int] = {}
        self._mutual: dict[str, int] = {}
        self._self_loop: set[str] = set()

    def add_edge(self, src: str, dst: str) -> None:
        if src == dst:
            self._self_loop.add(src)
            return
        out_src = self._out.setdefault(src, set())
        if dst in out_src:
            return
        out_src.add(dst)
        if src in self._out.get(dst, ()):  # reverse already present
            # dst was a one-way inbound neighbor of src; now mutual for both.
            self._one_way_in[src] = self._one_way_in.get(src, 0) - 1
            self._mutual[src] = self._mutual.get(src, 0) + 1
            self._mutual[dst] = self._mutual.get(dst, 0) + 1
        else:
            self._one_way_in[dst] = self._one_way_in.get(dst, 0) + 1

    def classify(self, user_id: str) -> StructureClass | None:
        return _label(
            self._one_way_in.get(user_id, 0) > 0,
            user_id in self._self_loop,
            self._mutual.get(user_id, 0) > 0,
        )

    def breakdown(self) -> StructureBreakdown:
        tally = {cls: 0 for cls in StructureClass}
        candidates = set(self._self_loop)
        candidates.update(u for u, c in self._one_way_in.items() if c > 0)
        candidates.update(u for u, c in self._mutual.items() if c > 0)
        for user in candidates:
            label = self.classify(user)
            if label is not None:
                tally[label] += 1
        classified = sum(tally.values())
        if classified == 0:
            return StructureBreakdown(proportions={}, classified_users=0)
        return StructureBreakdown(
            proportions={cls: tally[cls] / classified for cls in StructureClass},
            classified_users=classified,
        )
