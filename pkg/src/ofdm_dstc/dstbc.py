"""Conjugate-linear distributed STBCs and relay schedule derivation.

A code ``X(s)`` with T rows (relay-phase slots), R columns (relays) and K
complex symbols is stored as one T x K matrix ``A_j`` per relay plus a flag
saying whether that relay's column uses ``s`` or ``conj(s)``::

    X(s)[:, j] = A_j @ s          (plain relay)
    X(s)[:, j] = A_j @ conj(s)    (conjugating relay)

Every row of every ``A_j`` holds at most one nonzero entry, which is +1 or
-1, so in each slot a relay forwards at most one source block, possibly
negated.

Indices are 0-based in code; the rendered tables use the 1-based labels
found in the literature.
"""

import json
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .constellation import to_real

__all__ = [
    "ConjugateLinearCode",
    "RowPartition",
    "RowConditionReport",
    "Action",
    "RelaySchedule",
    "ScheduleError",
    "RankReport",
    "IDFT",
    "DFT",
    "validate_code",
    "row_partitions",
    "check_row_conditions",
    "derive_relay_schedule",
    "is_legal_action",
    "check_full_rank",
    "builtin_alamouti",
    "builtin_example1_r5",
    "builtin_fourgroup_r4",
    "builtin_clustered_alamouti",
    "builtin_code",
    "BUILTIN_CODES",
]

IDFT = "IDFT"
DFT = "DFT"


class ScheduleError(ValueError):
    """No legal relay schedule exists, or a schedule breaks the relay rules."""


@dataclass(frozen=True, eq=False)
class ConjugateLinearCode:
    """Per-relay dispersion matrices of a conjugate-linear STBC.

    Parameters
    ----------
    A : array_like, shape (R, T, K)
        ``A[j]`` maps the symbol vector (or its conjugate) to column j.
    conj : sequence of bool, length R
        True where relay j uses the conjugated symbols.
    groups : tuple of tuple of int, optional
        Real-symbol decoding groups, indices as in
        :mod:`ofdm_dstc.constellation`.
    """

    A: np.ndarray
    conj: tuple
    groups: tuple = None
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.A)
        if A.ndim != 3:
            raise ValueError(f"A must have shape (R, T, K), got {A.shape}")
        conj = tuple(bool(c) for c in self.conj)
        if len(conj) != A.shape[0]:
            raise ValueError(f"{len(conj)} conjugation flags for {A.shape[0]} relays")
        A = A.astype(float)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "conj", conj)
        if self.groups is not None:
            object.__setattr__(
                self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))

    @property
    def R(self):
        return self.A.shape[0]

    @property
    def T(self):
        return self.A.shape[1]

    @property
    def K(self):
        return self.A.shape[2]

    @property
    def M(self):
        """Number of plain (non-conjugating) relays."""
        return self.conj.count(False)

    def codeword(self, s):
        """``X(s)`` for symbol vectors ``s`` of shape ``(..., K)`` -> ``(..., T, R)``."""
        s = np.asarray(s, dtype=complex)
        cols = [np.einsum("tk,...k->...t", a, np.conj(s) if c else s)
                for a, c in zip(self.A, self.conj)]
        return np.stack(cols, axis=-1)

    def dispersion(self):
        """Real-linear basis ``E`` with ``X(s) = sum_r r_r E[r]``, shape (2K, T, R).

        ``r`` is the real-symbol vector ``[Re s, Im s]``.
        """
        K = self.K
        E = np.zeros((2 * K, self.T, self.R), dtype=complex)
        for j, (a, c) in enumerate(zip(self.A, self.conj)):
            E[:K, :, j] = a.T
            E[K:, :, j] = (-1j if c else 1j) * a.T
        return E

    def real_codeword(self, r):
        return np.einsum("...r,rtj->...tj", np.asarray(r, dtype=float), self.dispersion())

    def to_dict(self):
        return {
            "name": self.name,
            "R": self.R,
            "T": self.T,
            "K": self.K,
            "columns": [
                {"conj": c, "A": [[int(v) if float(v).is_integer() else float(v)
                                   for v in row] for row in a]}
                for a, c in zip(self.A, self.conj)
            ],
            "groups": [list(g) for g in self.groups] if self.groups else None,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        cols = d["columns"]
        A = np.array([c["A"] for c in cols], dtype=float).reshape(
            len(cols), d["T"], d["K"])
        if "R" in d and d["R"] != len(cols):
            raise ValueError(f"R={d['R']} but {len(cols)} columns given")
        groups = d.get("groups")
        return cls(A, [c["conj"] for c in cols],
                   tuple(map(tuple, groups)) if groups else None,
                   name=d.get("name", ""))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def validate_code(code):
    """Structural violations of ``code`` as a list of messages (empty if valid)."""
    problems = []
    A = code.A
    for j in range(code.R):
        for m in range(code.T):
            nz = np.flatnonzero(A[j, m])
            if nz.size > 1:
                problems.append(
                    f"relay {j + 1}, row {m + 1}: {nz.size} nonzero entries "
                    "(at most one allowed)")
            for p in nz:
                if A[j, m, p] not in (1.0, -1.0):
                    problems.append(
                        f"relay {j + 1}, row {m + 1}: entry {A[j, m, p]:g} "
                        "is not +1 or -1")
    if code.groups is not None:
        flat = sorted(i for g in code.groups for i in g)
        if flat != list(range(2 * code.K)):
            problems.append(f"groups {code.groups} do not partition the "
                            f"{2 * code.K} real symbols")
    return problems


@dataclass(frozen=True)
class RowPartition:
    """Per row, the symbol indices seen plain and seen conjugated."""

    plain: tuple
    conjugated: tuple


def row_partitions(code):
    plain, conjd = [], []
    for m in range(code.T):
        P, Pc = set(), set()
        for j in range(code.R):
            for p in np.flatnonzero(code.A[j, m]):
                (Pc if code.conj[j] else P).add(int(p))
        plain.append(frozenset(P))
        conjd.append(frozenset(Pc))
    return RowPartition(tuple(plain), tuple(conjd))


@dataclass
class RowConditionReport:
    """Outcome of the three row conditions, each with its failure reasons.

    ``disjoint``: no symbol is both plain and conjugated within a row.
    ``balanced``: each row has as many plain as conjugated symbols.
    ``nested``: two rows' plain sets are disjoint or one contains the other.
    """

    disjoint: list = field(default_factory=list)
    balanced: list = field(default_factory=list)
    nested: list = field(default_factory=list)

    @property
    def passed(self):
        return not (self.disjoint or self.balanced or self.nested)

    @property
    def schedulable(self):
        """The two conditions treated as hard gates for schedule derivation."""
        return not (self.disjoint or self.nested)

    def failures(self):
        return self.disjoint + self.balanced + self.nested


def check_row_conditions(part):
    rep = RowConditionReport()
    rows = range(len(part.plain))
    for i in rows:
        P, Pc = part.plain[i], part.conjugated[i]
        if P & Pc:
            rep.disjoint.append(
                f"row {i + 1}: symbols {_fmt(P & Pc)} appear plain and conjugated")
        if len(P) != len(Pc):
            rep.balanced.append(
                f"row {i + 1}: |P|={len(P)} but |P^c|={len(Pc)}")
    for i, j in combinations(rows, 2):
        Pi, Pj = part.plain[i], part.plain[j]
        inter = Pi & Pj
        if inter and inter != Pi and inter != Pj:
            rep.nested.append(
                f"rows {i + 1},{j + 1}: plain sets {_fmt(Pi)} and {_fmt(Pj)} "
                "partially overlap")
    return rep


def _fmt(symbols):
    return "{" + ", ".join(f"s{p + 1}" for p in sorted(symbols)) + "}"


@dataclass(frozen=True)
class Action:
    """What one relay sends in one slot: ``sign * [zeta](r_block or conj(r_block))``."""

    block: int
    sign: int
    conj: bool
    reversed: bool

    def label(self, relay):
        body = f"r{relay + 1},{self.block + 1}" + ("*" if self.conj else "")
        if self.reversed:
            body = f"zeta({body})"
        return ("-" if self.sign < 0 else "") + body


def is_legal_action(action, modulation):
    """Whether forwarding a block with the given source modulation is allowed.

    The four permitted combinations are exactly those whose destination DFT
    output is the source symbol or its conjugate.
    """
    if modulation == IDFT:
        return action.conj == action.reversed
    if modulation == DFT:
        return action.conj != action.reversed
    raise ValueError(f"unknown modulation {modulation!r}")


@dataclass(frozen=True)
class RelaySchedule:
    """Relay-phase transmission plan derived from a code.

    Attributes
    ----------
    source_modulation : tuple of str
        ``IDFT`` or ``DFT`` for each of the K source blocks.
    reversed_slots : frozenset of int
        Slots (0-based) in which every active relay time-reverses.
    actions : tuple of tuple
        ``actions[i][m]`` is an :class:`Action` or None (silent).
    relay_conj : tuple of bool
        Conjugation flag of each relay.
    relay_order : tuple of int
        Relays listed plain-first, the column order used for display.
    """

    source_modulation: tuple
    reversed_slots: frozenset
    actions: tuple
    relay_conj: tuple
    relay_order: tuple

    @property
    def R(self):
        return len(self.actions)

    @property
    def T(self):
        return len(self.actions[0])

    @property
    def K(self):
        return len(self.source_modulation)

    @property
    def M_relays(self):
        return self.relay_conj.count(False)

    def active(self):
        """Boolean (R, T) mask of non-silent relay slots."""
        return np.array([[a is not None for a in row] for row in self.actions])

    def check(self):
        """Raise :class:`ScheduleError` on any action outside the allowed set."""
        for i, row in enumerate(self.actions):
            for m, a in enumerate(row):
                if a is None:
                    continue
                where = f"relay {i + 1}, slot {m + 1} ({a.label(i)})"
                if a.conj != self.relay_conj[i]:
                    raise ScheduleError(f"{where}: conjugation does not match relay type")
                if a.reversed != (m in self.reversed_slots):
                    raise ScheduleError(f"{where}: reversal does not match slot type")
                if not is_legal_action(a, self.source_modulation[a.block]):
                    raise ScheduleError(
                        f"{where}: forbidden for a {self.source_modulation[a.block]} block")

    def table(self):
        """Plain-text transmission table, relays in original order."""
        head = ["slot"] + [f"U{i + 1}" for i in range(self.R)]
        rows = [head]
        for m in range(self.T):
            rows.append([str(m + 1)] + [
                "0" if self.actions[i][m] is None else self.actions[i][m].label(i)
                for i in range(self.R)])
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        lines = ["  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip()
                 for r in rows]
        src = ", ".join(f"x{p + 1}:{mod}" for p, mod in enumerate(self.source_modulation))
        return "source " + src + "\n" + "\n".join(lines)

    def to_dict(self):
        return {
            "source_modulation": list(self.source_modulation),
            "reversed_slots": sorted(m + 1 for m in self.reversed_slots),
            "M_relays": self.M_relays,
            "relay_order": [i + 1 for i in self.relay_order],
            "actions": [[None if a is None else a.label(i) for a in row]
                        for i, row in enumerate(self.actions)],
        }


def derive_relay_schedule(code):
    """Assign IDFT/DFT per source block and reversal per slot, then relay actions.

    Each nonzero ``A_j[m, p]`` ties block p to slot m: for a plain relay the
    block is IDFT-modulated exactly when the slot is not reversed; for a
    conjugating relay it is DFT-modulated exactly when the slot is not
    reversed. These equal/opposite constraints are 2-coloured by BFS.

    Each connected component has two colourings. Components are visited in
    order of their lowest block index and oriented to keep the IDFT and DFT
    block counts as even as possible, preferring IDFT for the component's
    first block on ties.

    Raises
    ------
    ScheduleError
        If the code is structurally invalid, fails the disjoint or nested
        row condition, or the constraints conflict.
    """
    problems = validate_code(code)
    if problems:
        raise ScheduleError("invalid code: " + "; ".join(problems))
    rows = check_row_conditions(row_partitions(code))
    if not rows.schedulable:
        raise ScheduleError("row conditions fail: " + "; ".join(rows.disjoint + rows.nested))
    K, T = code.K, code.T
    # Node ids: blocks 0..K-1, slots K..K+T-1. Value 1 = IDFT / not reversed.
    adj = [[] for _ in range(K + T)]
    for j in range(code.R):
        for m in range(T):
            for p in np.flatnonzero(code.A[j, m]):
                parity = 1 if code.conj[j] else 0
                adj[p].append((K + m, parity))
                adj[K + m].append((p, parity))

    value = [None] * (K + T)
    n_idft = n_dft = 0
    for start in list(range(K)) + list(range(K, K + T)):
        if value[start] is not None:
            continue
        comp = {start: 1}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, parity in adj[u]:
                want = comp[u] ^ parity
                if v not in comp:
                    comp[v] = want
                    queue.append(v)
                elif comp[v] != want:
                    raise ScheduleError(
                        "code admits no zeta-slot assignment: conflicting "
                        f"constraints around {_node_name(v, K)}")
        blocks = [u for u in comp if u < K]
        ones = sum(comp[u] for u in blocks)
        zeros = len(blocks) - ones
        keep = abs((n_idft + ones) - (n_dft + zeros))
        flip = abs((n_idft + zeros) - (n_dft + ones))
        if flip < keep:
            comp = {u: 1 - b for u, b in comp.items()}
            ones, zeros = zeros, ones
        n_idft += ones
        n_dft += zeros
        for u, b in comp.items():
            value[u] = b

    modulation = tuple(IDFT if value[p] else DFT for p in range(K))
    reversed_slots = frozenset(m for m in range(T) if not value[K + m])
    actions = []
    for j in range(code.R):
        row = []
        for m in range(T):
            nz = np.flatnonzero(code.A[j, m])
            if nz.size == 0:
                row.append(None)
                continue
            p = int(nz[0])
            row.append(Action(block=p, sign=int(np.sign(code.A[j, m, p])),
                              conj=code.conj[j], reversed=m in reversed_slots))
        actions.append(tuple(row))
    order = tuple([j for j in range(code.R) if not code.conj[j]]
                  + [j for j in range(code.R) if code.conj[j]])
    sched = RelaySchedule(modulation, reversed_slots, tuple(actions),
                          code.conj, order)
    sched.check()
    return sched


def _node_name(u, K):
    return f"block {u + 1}" if u < K else f"slot {u - K + 1}"


@dataclass
class RankReport:
    min_rank: int
    R: int
    pairs_checked: int
    exhaustive: bool
    witness: tuple = None

    @property
    def passed(self):
        return self.min_rank == self.R


def check_full_rank(code, signal_set, max_codewords=4096, n_random_pairs=4096,
                    rng=None):
    """Minimum rank of ``X(s) - X(s')`` over distinct codeword pairs.

    All pairs are checked when the codebook has at most ``max_codewords``
    entries; otherwise ``n_random_pairs`` random pairs are drawn. Rank counts
    singular values above ``1e-9`` times the largest one. The witness is the
    pair of symbol vectors attaining the minimum.
    """
    book = signal_set.codebook
    n = len(book)
    exhaustive = n <= max_codewords
    if exhaustive:
        ia, ib = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(rng)
        ia = rng.integers(0, n, n_random_pairs)
        ib = (ia + rng.integers(1, n, n_random_pairs)) % n
    E = code.dispersion()
    real = to_real(book)
    min_rank, witness = code.R + 1, None
    for lo in range(0, ia.size, 8192):
        a, b = ia[lo:lo + 8192], ib[lo:lo + 8192]
        diff = np.einsum("pr,rtj->ptj", real[a] - real[b], E)
        sv = np.linalg.svd(diff, compute_uv=False)
        ranks = np.sum(sv > 1e-9 * sv[:, :1], axis=-1)
        k = int(np.argmin(ranks))
        if ranks[k] < min_rank:
            min_rank = int(ranks[k])
            witness = (book[a[k]], book[b[k]])
    return RankReport(min_rank, code.R, int(ia.size), exhaustive, witness)


def builtin_alamouti():
    """``[[s1, -s2*], [s2, s1*]]``."""
    A = np.array([
        [[1, 0], [0, 1]],
        [[0, -1], [1, 0]],
    ])
    return ConjugateLinearCode(A, (False, True), groups=((0, 2), (1, 3)),
                               name="alamouti")


def builtin_example1_r5():
    """Five-relay code: two Alamouti blocks plus one relay sending s5, s6.

    ::

        [ s1  -s2*  0    0    0  ]
        [ s2   s1*  0    0    0  ]
        [ 0    0    s3  -s4*  0  ]
        [ 0    0    s4   s3*  0  ]
        [ 0    0    0    0    s5 ]
        [ 0    0    0    0    s6 ]
    """
    A = np.zeros((5, 6, 6))
    A[0, 0, 0] = A[0, 1, 1] = 1
    A[1, 0, 1] = -1
    A[1, 1, 0] = 1
    A[2, 2, 2] = A[2, 3, 3] = 1
    A[3, 2, 3] = -1
    A[3, 3, 2] = 1
    A[4, 4, 4] = A[4, 5, 5] = 1
    return ConjugateLinearCode(A, (False, True, False, True, False),
                               name="example1_r5")


FOURGROUP_A = np.array([
    np.eye(4),
    [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]],
    [[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],
])


def builtin_fourgroup_r4():
    """Four-group decodable R=4 code; relays 3 and 4 conjugate.

    Rows: ``[s1 s2 -s3* -s4*], [s2 s1 -s4* -s3*], [s3 s4 s1* s2*],
    [s4 s3 s2* s1*]``.
    """
    return ConjugateLinearCode(FOURGROUP_A, (False, False, True, True),
                               groups=((0, 1), (4, 5), (2, 3), (6, 7)),
                               name="fourgroup_r4")


def builtin_clustered_alamouti(R=4):
    """Alamouti repeated over R/2 relay pairs; diversity two for any R."""
    if R < 2 or R % 2:
        raise ValueError(f"clustered Alamouti needs an even R >= 2, got {R}")
    base = builtin_alamouti()
    A = np.concatenate([base.A] * (R // 2))
    return ConjugateLinearCode(A, base.conj * (R // 2), groups=base.groups,
                               name=f"clustered_alamouti_r{R}")


BUILTIN_CODES = {
    "alamouti": builtin_alamouti,
    "example1_r5": builtin_example1_r5,
    "fourgroup_r4": builtin_fourgroup_r4,
    "clustered_alamouti_r4": lambda: builtin_clustered_alamouti(4),
}


def builtin_code(name):
    """Look up a builtin code by id, or ``clustered_alamouti_r<R>``."""
    if name in BUILTIN_CODES:
        return BUILTIN_CODES[name]()
    if name.startswith("clustered_alamouti_r"):
        return builtin_clustered_alamouti(int(name.rsplit("r", 1)[1]))
    raise KeyError(f"unknown code {name!r}; known: {sorted(BUILTIN_CODES)}")
