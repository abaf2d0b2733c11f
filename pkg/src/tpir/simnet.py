"""Simulated replicated-database deployment.

M nodes hold identical message stores; an orchestrator sends each node its
coefficient-matrix query over a versioned binary wire format, marks up to
M - N nodes silent (declared non-response, not timeout races), decodes from
the N lowest-id responders, and records a replayable transcript. Session
records append to a line-delimited log; the desired index never appears in
queries, transcripts, or logs.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import scheme
from .field import element_width, elements_from_bytes, elements_to_bytes
from .layout import SchemeParams, build_layout, total_download

__all__ = [
    "ParseError",
    "MAGIC",
    "WIRE_VERSION",
    "encode_query",
    "decode_query",
    "encode_answer",
    "decode_answer",
    "ingest_messages",
    "DatabaseNode",
    "RetrievalSession",
    "run_session",
    "replay_transcript",
]

MAGIC = b"TPIR"
WIRE_VERSION = 1
_KIND_QUERY = 1
_KIND_ANSWER = 2


class ParseError(ValueError):
    """Malformed wire bytes; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def _header(kind: int, q: int) -> bytes:
    return MAGIC + struct.pack("<BBBQ", WIRE_VERSION, kind, element_width(q), q)


_HEADER_LEN = 4 + 3 + 8


def _parse_header(buf: bytes, kind: int) -> tuple[int, int]:
    """Validate magic/version/kind, return (q, offset past header)."""
    if len(buf) < _HEADER_LEN:
        raise ParseError(
            f"header needs {_HEADER_LEN} bytes, got {len(buf)}", len(buf)
        )
    if buf[:4] != MAGIC:
        raise ParseError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", 0)
    version, got_kind, width, q = struct.unpack("<BBBQ", buf[4:_HEADER_LEN])
    if version != WIRE_VERSION:
        raise ParseError(f"unsupported version {version}", 4)
    if got_kind != kind:
        raise ParseError(f"wrong message kind {got_kind}, expected {kind}", 5)
    if q < 2 or width != element_width(q):
        raise ParseError(f"inconsistent field width {width} for q={q}", 6)
    return q, _HEADER_LEN


def _check_length(buf: bytes, expected: int):
    if len(buf) != expected:
        raise ParseError(
            f"truncated payload: expected {expected} bytes, got {len(buf)}",
            min(len(buf), expected),
        )


def encode_query(q_matrix: np.ndarray, q: int, K: int, L: int) -> bytes:
    """One database's query: header {magic, version, width, q, K, L, D} + rows."""
    D = q_matrix.shape[0]
    if q_matrix.shape[1] != K * L:
        raise ValueError(f"query has {q_matrix.shape[1]} columns, expected K*L={K * L}")
    return (
        _header(_KIND_QUERY, q)
        + struct.pack("<III", K, L, D)
        + elements_to_bytes(q_matrix.reshape(-1), q)
    )


def decode_query(buf: bytes) -> tuple[np.ndarray, int, int, int]:
    """Inverse of encode_query: returns (matrix, q, K, L)."""
    q, off = _parse_header(buf, _KIND_QUERY)
    if len(buf) < off + 12:
        raise ParseError(
            f"query header needs {off + 12} bytes, got {len(buf)}", len(buf)
        )
    K, L, D = struct.unpack("<III", buf[off : off + 12])
    off += 12
    _check_length(buf, off + D * K * L * element_width(q))
    values = elements_from_bytes(buf[off:], q, D * K * L)
    return values.reshape(D, K * L), q, K, L


def encode_answer(answer: scheme.Answer, q: int) -> bytes:
    """One database's answer: header {magic, version, width, q, db_id, D} + D elements."""
    return (
        _header(_KIND_ANSWER, q)
        + struct.pack("<II", answer.db_id, answer.values.size)
        + elements_to_bytes(answer.values, q)
    )


def decode_answer(buf: bytes) -> tuple[scheme.Answer, int]:
    """Inverse of encode_answer: returns (Answer, q)."""
    q, off = _parse_header(buf, _KIND_ANSWER)
    if len(buf) < off + 8:
        raise ParseError(
            f"answer header needs {off + 8} bytes, got {len(buf)}", len(buf)
        )
    db_id, D = struct.unpack("<II", buf[off : off + 8])
    off += 8
    _check_length(buf, off + D * element_width(q))
    return scheme.Answer(db_id=db_id, values=elements_from_bytes(buf[off:], q, D)), q


def ingest_messages(
    source, params: SchemeParams, strict: bool = False
) -> scheme.MessageStore:
    """Build a MessageStore from raw bytes or a seeded-random directive.

    ``source`` is either a byte stream of exactly K*L*element_width(q)
    little-endian values (reduced mod q, or rejected in ``strict`` mode) or
    the string ``"seed:<int>"`` for a reproducible random store.
    """
    p = params
    if isinstance(source, str):
        if not source.startswith("seed:"):
            raise ValueError(f"unrecognized directive {source!r} (want 'seed:<int>')")
        rng = np.random.default_rng(int(source[5:], 0))
        return scheme.MessageStore.random(p, rng)
    buf = source.read() if hasattr(source, "read") else bytes(source)
    width = element_width(p.q)
    expected = p.K * p.L * width
    if len(buf) != expected:
        raise ValueError(
            f"stream has {len(buf)} bytes, need exactly K*L*width = {expected}"
        )
    raw = np.frombuffer(buf, dtype=f"<u{width}").astype(np.int64)
    if strict:
        bad = np.nonzero(raw >= p.q)[0]
        if bad.size:
            raise ValueError(
                f"strict mode: value {raw[bad[0]]} >= q={p.q} at element index {bad[0]}"
            )
    return scheme.MessageStore(raw.reshape(p.K, p.L) % p.q, p.q)


@dataclass(frozen=True)
class DatabaseNode:
    """One replicated database; silent nodes receive queries but never answer."""

    id: int
    store: scheme.MessageStore
    behavior: str = "responsive"  # responsive | silent
    latency: float = 0.0

    def answer(self, query_bytes: bytes) -> bytes | None:
        if self.behavior == "silent":
            return None
        q_matrix, q, K, L = decode_query(query_bytes)
        ans = scheme.answer_query(self.id, q_matrix, self.store)
        return encode_answer(ans, q)


@dataclass
class RetrievalSession:
    params: SchemeParams
    desired: int
    secrets: scheme.SchemeSecrets
    plan: scheme.QueryPlan
    drop_set: frozenset[int]
    transcript: dict = dc_field(default_factory=dict)

    @property
    def responders(self) -> list[int]:
        """The N lowest-id nodes outside the drop set."""
        alive = [m for m in range(self.params.M) if m not in self.drop_set]
        return alive[: self.params.N]


def _digest(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=16).hexdigest()


def run_session(
    params: SchemeParams,
    desired: int,
    store: scheme.MessageStore,
    drop_set=(),
    rng: np.random.Generator | None = None,
    log_dir: str | None = None,
    latencies: dict[int, float] | None = None,
) -> dict:
    """One full retrieval against M simulated nodes; returns decode + metrics.

    ``drop_set`` marks nodes silent and must leave at least N responders.
    With ``latencies`` set, responder choice is by arrival time (first N)
    instead of lowest id — a demonstration mode, not part of the model.
    """
    p = params
    drop_set = frozenset(int(m) for m in drop_set)
    if not drop_set <= set(range(p.M)):
        raise ValueError(f"drop_set {sorted(drop_set)} not a subset of [0, {p.M})")
    if len(drop_set) > p.M - p.N:
        raise ValueError(
            f"drop_set of size {len(drop_set)} leaves fewer than N={p.N} responders"
        )
    if not 0 <= desired < p.K:
        raise ValueError(f"desired index {desired} outside [0, {p.K})")
    rng = rng or np.random.default_rng(p.seed)
    t0 = time.perf_counter()

    secrets = scheme.sample_secrets(p, rng)
    layout = build_layout(p, desired)
    plan = scheme.build_queries(p, desired, secrets, layout=layout)
    nodes = [
        DatabaseNode(
            m,
            store,
            "silent" if m in drop_set else "responsive",
            latency=(latencies or {}).get(m, 0.0),
        )
        for m in range(p.M)
    ]

    # dispatch to every node up front, then collect
    query_bytes = {
        node.id: encode_query(plan.matrices[node.id], p.q, p.K, p.L)
        for node in nodes
    }
    answer_bytes = {}
    for node in nodes:
        reply = node.answer(query_bytes[node.id])
        if reply is not None:
            answer_bytes[node.id] = reply

    if latencies:
        arrival = sorted(answer_bytes, key=lambda m: (nodes[m].latency, m))
        used = sorted(arrival[: p.N])
    else:
        used = sorted(answer_bytes)[: p.N]
    answers = [decode_answer(answer_bytes[m])[0] for m in used]
    decoder = scheme.Decoder(p, desired, secrets, layout)
    decoded = decoder.decode(answers)
    wall = time.perf_counter() - t0

    session = RetrievalSession(
        params=p, desired=desired, secrets=secrets, plan=plan, drop_set=drop_set,
        transcript={
            "query_bytes": query_bytes,
            "answer_bytes": answer_bytes,
            "used_responders": used,
        },
    )
    metrics = {
        "downloaded_symbols": sum(len(answers[i].values) for i in range(p.N)),
        "expected_download": total_download(p),
        "upload_bytes": sum(len(b) for b in query_bytes.values()),
        "download_bytes": sum(len(answer_bytes[m]) for m in used),
        "wall_time": wall,
        "responders": used,
    }
    store_digest = _digest(elements_to_bytes(store.stacked, p.q))
    _log_session(p, drop_set, session, metrics, store_digest, log_dir)
    return {"decoded": decoded, "session": session, "metrics": metrics}


def _log_session(p, drop_set, session, metrics, store_digest, log_dir):
    """Append a privacy-safe session record (the desired index is omitted)."""
    log_dir = log_dir or os.environ.get("TPIR_LOG_DIR")
    if not log_dir:
        return
    record = {
        "schema": 1,
        "timestamp": time.time(),
        "params": {"K": p.K, "N": p.N, "T": p.T, "M": p.M, "q": p.q, "seed": p.seed},
        "drop_set": sorted(drop_set),
        "store_digest": store_digest,
        "query_digests": {
            str(m): _digest(b) for m, b in session.transcript["query_bytes"].items()
        },
        "answer_digests": {
            str(m): _digest(b) for m, b in session.transcript["answer_bytes"].items()
        },
        "outcome": "decoded",
        "downloaded_symbols": metrics["downloaded_symbols"],
    }
    os.makedirs(log_dir, exist_ok=True)
    with open(os.path.join(log_dir, "sessions.jsonl"), "a") as fh:
        fh.write(json.dumps(record) + "\n")


def replay_transcript(session: RetrievalSession) -> np.ndarray:
    """Re-decode purely from recorded bytes; must reproduce the decoded message."""
    used = session.transcript["used_responders"]
    answers = [decode_answer(session.transcript["answer_bytes"][m])[0] for m in used]
    decoder = scheme.Decoder(
        session.params, session.desired, session.secrets, session.plan.layout
    )
    return decoder.decode(answers)
