"""Protocol core: secrets, query coefficient matrices, answering, decoding.

Queries are materialized as explicit D x (K*L) coefficient matrices over the
stacked message vector (W_0; ...; W_{K-1}), one per database. Answering is a
single matrix-vector product. Decoding processes blocks in increasing subset
size: every block that mixes the desired message has its interference
reconstructed from the matching undesired-only block (any alpha coordinates
of an MDS codeword determine the rest), subtracted off, and the surviving
desired-codeword coordinates are inverted through the desired code and the
secret matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import layout as layout_mod
from . import linalg, mds
from .layout import BlockLayout, SchemeParams, build_layout, total_download

__all__ = [
    "MessageStore",
    "SchemeSecrets",
    "QueryPlan",
    "Answer",
    "sample_secrets",
    "build_queries",
    "answer_query",
    "Decoder",
    "decode",
    "achieved_rate",
]


@dataclass(frozen=True)
class MessageStore:
    """K messages of L symbols each, as a (K, L) array over GF(q)."""

    data: np.ndarray
    q: int

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.int64)
        if d.ndim != 2:
            raise ValueError(f"store must be 2-d (K, L), got shape {d.shape}")
        if d.size and (d.min() < 0 or d.max() >= self.q):
            raise ValueError("message symbols outside [0, q)")
        object.__setattr__(self, "data", d)

    @classmethod
    def random(cls, params: SchemeParams, rng: np.random.Generator) -> "MessageStore":
        return cls(rng.integers(0, params.q, size=(params.K, params.L)), params.q)

    @property
    def stacked(self) -> np.ndarray:
        """The K*L column the query matrices act on."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class SchemeSecrets:
    """K independent uniform draws from GL(N^K, q), private to the user."""

    matrices: tuple[np.ndarray, ...]
    seed: int | None = None


@dataclass(frozen=True)
class Answer:
    db_id: int
    values: np.ndarray


@dataclass(frozen=True)
class QueryPlan:
    """Per-database coefficient matrices; a function of secrets and layout only.

    The desired index is retained for the user's own bookkeeping and is never
    serialized toward the databases.
    """

    desired: int
    layout: BlockLayout
    matrices: tuple[np.ndarray, ...]  # one (D, K*L) matrix per database


def sample_secrets(
    params: SchemeParams, rng: np.random.Generator | None = None
) -> SchemeSecrets:
    """Sample the K secret matrices, deterministically given the rng."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    mats = tuple(
        linalg.sample_uniform_full_rank(params.L, params.q, rng)
        for _ in range(params.K)
    )
    return SchemeSecrets(matrices=mats)


def _desired_spec(layout: BlockLayout) -> mds.MdsSpec:
    p = layout.params
    return mds.MdsSpec(layout.desired_code_len, p.L, p.q)


def _pair_spec(layout: BlockLayout, block) -> mds.MdsSpec:
    return mds.MdsSpec(block.code_len, block.alpha, layout.params.q)


def build_queries(
    params: SchemeParams,
    desired: int,
    secrets: SchemeSecrets,
    layout: BlockLayout | None = None,
    break_alignment: bool = False,
) -> QueryPlan:
    """Materialize the M coefficient matrices for retrieving ``desired``.

    ``break_alignment`` zeroes the MDS parity coding of the undesired-message
    side information; the result is a deliberately non-private plan used as a
    negative control by the auditors.
    """
    if layout is None or layout.desired != desired or layout.params != params:
        layout = build_layout(params, desired)
    q, L, K, M = params.q, params.L, params.K, params.M
    if len(secrets.matrices) != K or any(
        s.shape != (L, L) for s in secrets.matrices
    ):
        raise ValueError("secrets do not match params (need K matrices of N^K x N^K)")

    # coefficient rows of the desired codeword over W_desired
    x_des = linalg.mat_mul(
        mds.generator(_desired_spec(layout)), secrets.matrices[desired], q
    )
    # coefficient rows of each pair codeword over its message
    pair_rows: dict[tuple[int, ...], dict[int, np.ndarray]] = {}
    for b in layout.blocks:
        if b.contains_desired or b.alpha == 0:
            continue
        gen = mds.generator(_pair_spec(layout, b))
        per_msg = {}
        for k in b.subset:
            lo, hi = b.secret_rows[k]
            rows = linalg.mat_mul(gen, secrets.matrices[k][lo:hi], q)
            if break_alignment:
                rows[b.block_len :] = 0
            per_msg[k] = rows
        pair_rows[b.subset] = per_msg

    D = layout.per_db
    matrices = [np.zeros((D, K * L), dtype=np.int64) for _ in range(M)]
    row = 0
    for b in layout.blocks:
        pdl = b.per_db_len
        if pdl == 0:
            continue
        parent = tuple(k for k in b.subset if k != desired)
        for m in range(M):
            sl = b.db_slice(m)
            for k in b.subset:
                if k == desired:
                    seg = x_des[b.desired_offset + sl.start : b.desired_offset + sl.stop]
                elif b.contains_desired:
                    pblock = layout.by_subset[parent]
                    off = pblock.block_len  # parity segment of the parent codeword
                    seg = pair_rows[parent][k][off + sl.start : off + sl.stop]
                else:
                    seg = pair_rows[b.subset][k][sl]
                matrices[m][row : row + pdl, k * L : (k + 1) * L] = seg
        row += pdl
    return QueryPlan(desired=desired, layout=layout, matrices=tuple(matrices))


def answer_query(db_id: int, q_matrix: np.ndarray, store: MessageStore) -> Answer:
    """A database's deterministic response: Q_m times the stacked store."""
    if q_matrix.shape[1] != store.stacked.size:
        raise ValueError(
            f"query has {q_matrix.shape[1]} columns, store has {store.stacked.size} symbols"
        )
    values = linalg.mat_mul(q_matrix, store.stacked.reshape(-1, 1), store.q).ravel()
    return Answer(db_id=db_id, values=values)


class Decoder:
    """Interference-cancelling decoder for one (params, desired, secrets) session.

    Inverse matrices are cached per responder subset, so sweeping many
    responder subsets or stores against one plan stays cheap.
    """

    def __init__(
        self,
        params: SchemeParams,
        desired: int,
        secrets: SchemeSecrets,
        layout: BlockLayout | None = None,
    ):
        if layout is None or layout.desired != desired or layout.params != params:
            layout = build_layout(params, desired)
        self.params = params
        self.desired = desired
        self.secrets = secrets
        self.layout = layout
        self._secret_inv: np.ndarray | None = None
        self._per_subset: dict[tuple[int, ...], dict] = {}
        # row offset of each block within a database's answer
        self._row_offset = {}
        off = 0
        for b in layout.blocks:
            self._row_offset[b.subset] = off
            off += b.per_db_len

    def _subset_tables(self, responders: tuple[int, ...]) -> dict:
        cached = self._per_subset.get(responders)
        if cached is not None:
            return cached
        q = self.params.q
        coords = {
            b.subset: np.concatenate(
                [np.arange(m * b.per_db_len, (m + 1) * b.per_db_len) for m in responders]
            )
            if b.per_db_len
            else np.empty(0, dtype=np.int64)
            for b in self.layout.blocks
        }
        tables: dict = {"coords": coords, "pair_inv": {}}
        nodes = []
        for b in self.layout.blocks:
            if b.contains_desired:
                if b.per_db_len:
                    nodes.append(b.desired_offset + coords[b.subset])
                continue
            if b.alpha == 0 or b.parity_len == 0:
                continue
            spec = _pair_spec(self.layout, b)
            tables["pair_inv"][b.subset] = mds.submatrix_inverse(spec, coords[b.subset])
        nodes = np.concatenate(nodes)
        tables["nodes"] = nodes
        tables["desired_inv"] = mds.vandermonde_inverse(nodes, q)
        self._per_subset[responders] = tables
        return tables

    def decode(self, answers) -> np.ndarray:
        """Recover the desired message from >= N answers with distinct db ids.

        Answer values may be vectors of length D or (D, t) matrices; the
        matrix form decodes t independent stores in one pass (columns are
        independent right-hand sides of the same linear system).
        """
        p = self.params
        by_id = {}
        batched = False
        for a in answers:
            if a.db_id in by_id:
                raise ValueError(f"duplicate answer from database {a.db_id}")
            vals = np.asarray(a.values, dtype=np.int64)
            if vals.ndim == 1:
                vals = vals.reshape(-1, 1)
            else:
                batched = True
            by_id[a.db_id] = vals
        if len(by_id) < p.N:
            raise ValueError(f"need answers from {p.N} databases, got {len(by_id)}")
        responders = tuple(sorted(by_id)[: p.N])
        tables = self._subset_tables(responders)
        coords = tables["coords"]

        received = {}
        for b in self.layout.blocks:
            off = self._row_offset[b.subset]
            received[b.subset] = np.concatenate(
                [by_id[m][off : off + b.per_db_len] for m in responders]
            )

        q = p.q
        cleaned = []
        for b in self.layout.blocks:
            if not b.contains_desired or b.per_db_len == 0:
                continue
            vals = received[b.subset]
            if b.size > 1:
                parent = self.layout.by_subset[
                    tuple(k for k in b.subset if k != self.desired)
                ]
                # summed info symbols of the aligned interference codeword
                u = linalg.mat_mul(
                    tables["pair_inv"][parent.subset], received[parent.subset], q
                )
                gen = mds.generator(_pair_spec(self.layout, parent))
                parity_rows = gen[parent.block_len + coords[b.subset]]
                interference = linalg.mat_mul(parity_rows, u, q)
                vals = (vals - interference) % q
            cleaned.append(vals)
        y = np.concatenate(cleaned)

        slw = linalg.mat_mul(tables["desired_inv"], y, q)
        if self._secret_inv is None:
            self._secret_inv = linalg.invert(self.secrets.matrices[self.desired], q)
        out = linalg.mat_mul(self._secret_inv, slw, q)
        return out if batched else out.ravel()


def decode(
    params: SchemeParams, desired: int, secrets: SchemeSecrets, answers
) -> np.ndarray:
    """One-shot decode; build a Decoder directly when sweeping subsets."""
    return Decoder(params, desired, secrets).decode(answers)


def achieved_rate(params: SchemeParams) -> Fraction:
    """Exact rate L / total download over the N responders."""
    return Fraction(params.L, total_download(params))
