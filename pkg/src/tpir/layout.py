"""Block structure of the retrieval scheme.

Every non-empty subset of message indices gets one block of downloaded
equations: the block for subset B mixes exactly the messages in B. Blocks are
enumerated canonically (by size, then lexicographically) and each block's
coordinates are split into contiguous per-database chunks in database order.
Message indices and database ids are 0-based throughout.

With K messages, N required responders, T colluding databases and M >= N
total databases, a size-j block has alpha = N * (N-T)^(j-1) * T^(K-j) "core"
coordinates; the materialized block vector has (M/N) * alpha entries so that
any N responders hold exactly alpha of them.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb

from .field import is_prime, smallest_prime_geq

__all__ = [
    "SchemeParams",
    "Block",
    "BlockLayout",
    "build_layout",
    "per_layer_counts",
    "per_db_download",
    "total_download",
    "max_code_length",
]


def _alpha(K: int, N: int, T: int, j: int) -> int:
    # 0^0 == 1 covers the T == N degenerate case (only layer 1 survives)
    return N * (N - T) ** (j - 1) * T ** (K - j)


def max_code_length(K: int, N: int, T: int, M: int) -> int:
    """Longest MDS codeword any (K, N, T, M) instance needs; q must be >= this."""
    longest = M * N ** (K - 1)  # the desired-message code, (M/N) * N^K
    for j in range(1, K):
        alpha = _alpha(K, N, T, j)
        if alpha:
            longest = max(longest, M * alpha // T)
    return longest


@dataclass(frozen=True)
class SchemeParams:
    """Scheme parameters (K messages, N responders, T colluders, M databases).

    q is the field modulus; when omitted it is chosen as the smallest prime
    that fits the longest MDS code the layout needs. Each message has
    L = N^K symbols. The seed makes every run replayable.
    """

    K: int
    N: int
    T: int
    M: int
    q: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if not 1 <= self.T <= self.N <= self.M:
            raise ValueError(
                f"need 1 <= T <= N <= M, got T={self.T} N={self.N} M={self.M}"
            )
        needed = max_code_length(self.K, self.N, self.T, self.M)
        if self.q is None:
            object.__setattr__(self, "q", smallest_prime_geq(max(needed, 2)).q)
        else:
            if not is_prime(self.q):
                raise ValueError(f"q={self.q} is not prime")
            if self.q < needed:
                raise ValueError(
                    f"q={self.q} too small: longest MDS code has length {needed}"
                )

    @property
    def L(self) -> int:
        """Message length in field symbols."""
        return self.N**self.K


@dataclass(frozen=True)
class Block:
    """One block of the layout: the equations mixing exactly ``subset``."""

    subset: tuple[int, ...]  # sorted message indices, 0-based
    alpha: int  # core coordinate count (what N responders deliver)
    block_len: int  # materialized length, (M/N) * alpha
    per_db_len: int  # contiguous chunk each database serves
    contains_desired: bool
    # pair blocks (desired not in subset): MDS code length and secret rows
    code_len: int | None = None  # (M/T) * alpha
    secret_rows: dict[int, tuple[int, int]] = field(default_factory=dict)
    # blocks containing the desired index: offset into the desired codeword
    desired_offset: int | None = None

    @property
    def size(self) -> int:
        return len(self.subset)

    def db_slice(self, m: int) -> slice:
        return slice(m * self.per_db_len, (m + 1) * self.per_db_len)

    @property
    def parity_len(self) -> int:
        return self.code_len - self.block_len if self.code_len is not None else 0


@dataclass(frozen=True)
class BlockLayout:
    """Complete coordinate bookkeeping for one (params, desired) pair."""

    params: SchemeParams
    desired: int
    blocks: tuple[Block, ...]

    @cached_property
    def by_subset(self) -> dict[tuple[int, ...], Block]:
        return {b.subset: b for b in self.blocks}

    @property
    def per_db(self) -> int:
        return sum(b.per_db_len for b in self.blocks)

    @property
    def desired_code_len(self) -> int:
        """Length of the desired-message codeword, (M/N) * N^K."""
        p = self.params
        return p.M * p.N ** (p.K - 1)

    def dump_text(self) -> str:
        p = self.params
        lines = [
            f"layout for K={p.K} N={p.N} T={p.T} M={p.M} q={p.q} desired={self.desired}",
            f"{'block':<16}{'alpha':>6}{'len':>6}{'per-db':>7}  role",
        ]
        for b in self.blocks:
            name = "{" + ",".join(map(str, b.subset)) + "}"
            if b.contains_desired:
                role = f"desired codeword [{b.desired_offset}:{b.desired_offset + b.block_len})"
            else:
                role = f"info segment of ({b.code_len},{b.alpha}) code; rows " + ", ".join(
                    f"S{k}[{lo}:{hi}]" for k, (lo, hi) in sorted(b.secret_rows.items())
                )
            lines.append(f"{name:<16}{b.alpha:>6}{b.block_len:>6}{b.per_db_len:>7}  {role}")
        lines.append(f"per-database total: {self.per_db} of {total_download(p)} overall")
        return "\n".join(lines)

    def dump_json(self) -> str:
        def block_row(b: Block):
            return {
                "subset": list(b.subset),
                "alpha": b.alpha,
                "block_len": b.block_len,
                "per_db_len": b.per_db_len,
                "contains_desired": b.contains_desired,
                "code_len": b.code_len,
                "desired_offset": b.desired_offset,
                "secret_rows": {str(k): list(v) for k, v in sorted(b.secret_rows.items())},
            }

        p = self.params
        return json.dumps(
            {
                "params": {"K": p.K, "N": p.N, "T": p.T, "M": p.M, "q": p.q},
                "desired": self.desired,
                "per_db": self.per_db,
                "blocks": [block_row(b) for b in self.blocks],
            },
            indent=2,
        )


def canonical_subsets(K: int) -> list[tuple[int, ...]]:
    """All non-empty subsets of range(K), by size then lexicographic order."""
    return [
        s for j in range(1, K + 1) for s in itertools.combinations(range(K), j)
    ]


def build_layout(params: SchemeParams, desired: int) -> BlockLayout:
    """Assemble the full block layout for retrieving message ``desired``."""
    K, N, T, M = params.K, params.N, params.T, params.M
    if not 0 <= desired < K:
        raise ValueError(f"desired index {desired} out of range [0, {K})")
    blocks = []
    secret_cursor = {k: 0 for k in range(K) if k != desired}
    desired_cursor = 0
    for subset in canonical_subsets(K):
        j = len(subset)
        alpha = _alpha(K, N, T, j)
        block_len = M * (N - T) ** (j - 1) * T ** (K - j)  # (M/N) * alpha
        per_db = block_len // M
        if desired in subset:
            blocks.append(
                Block(
                    subset=subset,
                    alpha=alpha,
                    block_len=block_len,
                    per_db_len=per_db,
                    contains_desired=True,
                    desired_offset=desired_cursor,
                )
            )
            desired_cursor += block_len
        else:
            code_len = M * alpha // T if alpha else 0
            if code_len > params.q:
                raise ValueError(
                    f"q={params.q} too small for block {subset}: code length {code_len}"
                )
            rows = {}
            for k in subset:
                rows[k] = (secret_cursor[k], secret_cursor[k] + alpha)
                secret_cursor[k] += alpha
            blocks.append(
                Block(
                    subset=subset,
                    alpha=alpha,
                    block_len=block_len,
                    per_db_len=per_db,
                    contains_desired=False,
                    code_len=code_len,
                    secret_rows=rows,
                )
            )
    layout = BlockLayout(params=params, desired=desired, blocks=tuple(blocks))
    assert desired_cursor == layout.desired_code_len
    assert all(c == T * N ** (K - 1) for c in secret_cursor.values())
    return layout


def per_layer_counts(params: SchemeParams) -> list[dict]:
    """Per-database equation counts by layer j (blocks of size j)."""
    K, N, T = params.K, params.N, params.T
    table = []
    for j in range(1, K + 1):
        unit = (N - T) ** (j - 1) * T ** (K - j)
        table.append(
            {
                "layer": j,
                "total": unit * comb(K, j),
                "desired_touching": unit * comb(K - 1, j - 1),
            }
        )
    return table


def per_db_download(params: SchemeParams) -> int:
    """Symbols each database serves: (N^K - T^K) / (N - T), or K*N^(K-1) at T=N."""
    return sum(row["total"] for row in per_layer_counts(params))


def total_download(params: SchemeParams) -> int:
    """Symbols downloaded from the N responding databases."""
    return params.N * per_db_download(params)


def achievable_rate(params: SchemeParams) -> Fraction:
    """Exact rate L / total_download; equals the capacity formula."""
    return Fraction(params.L, total_download(params))
