"""Verification suite: capacity oracle, privacy checks, correctness sweeps.

Three layers of assurance, strongest first: an exhaustive distributional
check of the secret-submatrix invariance at enumerable sizes, structural
per-collusion-subset checks (coordinate counts plus invertibility of every
selected code submatrix, verified by explicit product-with-inverse), and an
empirical chi-square comparison of query distributions across desired
indices. Correctness is checked by brute-force execution over responder
subsets, and the achieved rate is compared to the capacity formula as exact
rationals.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import linalg, mds, scheme
from .layout import SchemeParams, build_layout, total_download

__all__ = [
    "CheckResult",
    "AuditReport",
    "capacity",
    "download_cost",
    "structural_privacy_check",
    "empirical_privacy_check",
    "lemma1_exhaustive_check",
    "correctness_sweep",
    "rate_vs_capacity_grid",
    "capacity_shape_check",
    "run_audit",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = dc_field(default_factory=dict)

    def __bool__(self):
        return self.passed


@dataclass
class AuditReport:
    params: SchemeParams
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            extra = " ".join(f"{k}={v}" for k, v in c.details.items())
            out.append(f"[{status}] {c.name}  {extra}".rstrip())
        return out


def capacity(K: int, N: int, T: int) -> Fraction:
    """Download capacity: (1 + T/N + ... + (T/N)^(K-1))^(-1), exactly."""
    if K < 1 or not 1 <= T <= N:
        raise ValueError(f"need K >= 1 and 1 <= T <= N, got K={K} N={N} T={T}")
    if T == N:
        return Fraction(1, K)
    r = Fraction(T, N)
    return (1 - r) / (1 - r**K)


def download_cost(K: int, N: int, T: int) -> Fraction:
    """Optimal downloaded symbols per desired symbol, 1/capacity."""
    return 1 / capacity(K, N, T)


def _t_subsets(M: int, T: int, cap: int, rng: np.random.Generator | None):
    if math.comb(M, T) <= cap:
        return list(itertools.combinations(range(M), T))
    rng = rng or np.random.default_rng(0)
    seen = set()
    while len(seen) < cap:
        seen.add(tuple(sorted(rng.choice(M, size=T, replace=False).tolist())))
    return sorted(seen)


def structural_privacy_check(
    params: SchemeParams,
    desired: int,
    secrets: scheme.SchemeSecrets | None = None,
    plan: scheme.QueryPlan | None = None,
    max_subsets: int = 500,
    rng: np.random.Generator | None = None,
) -> CheckResult:
    """Per collusion subset: variable counts and code-submatrix invertibility.

    For every T-subset of databases the variables it sees from each message
    must number exactly T * N^(K-1), the rows of each interference code it
    sees must form an invertible alpha x alpha submatrix, and the desired-code
    rows it sees must have full row rank. Invertibility is certified by an
    explicit inverse and product-equals-identity verification. If a plan is
    supplied its row-support pattern is also validated against the layout.
    """
    p = params
    name = "structural_privacy"
    layout = plan.layout if plan is not None else build_layout(p, desired)
    q = p.q
    expected_per_msg = p.T * p.N ** (p.K - 1)

    if plan is not None:
        bad = _plan_support_mismatch(plan)
        if bad is not None:
            return CheckResult(name, False, {"support_violation": bad})
        bad = _plan_alignment_mismatch(plan)
        if bad is not None:
            return CheckResult(name, False, {"alignment_violation": bad})

    pair_blocks = [
        b for b in layout.blocks if not b.contains_desired and b.alpha > 0
    ]
    subsets = _t_subsets(p.M, p.T, max_subsets, rng)
    eye_cache: dict[int, np.ndarray] = {}

    def eye(n):
        if n not in eye_cache:
            eye_cache[n] = np.eye(n, dtype=np.int64)
        return eye_cache[n]

    for tsub in subsets:
        per_msg = {k: 0 for k in range(p.K)}
        for b in pair_blocks:
            spec = mds.MdsSpec(b.code_len, b.alpha, q)
            gen = mds.generator(spec)
            child = layout.by_subset.get(tuple(sorted(b.subset + (desired,))))
            coords = np.concatenate(
                [np.arange(m * b.per_db_len, (m + 1) * b.per_db_len) for m in tsub]
                + (
                    [
                        b.block_len
                        + np.arange(m * child.per_db_len, (m + 1) * child.per_db_len)
                        for m in tsub
                    ]
                    if child is not None and child.per_db_len
                    else []
                )
            )
            if coords.size != b.alpha:
                return CheckResult(
                    name,
                    False,
                    {"subset": tsub, "block": b.subset, "count": coords.size,
                     "expected": b.alpha},
                )
            inv = mds.submatrix_inverse(spec, coords)
            if not np.array_equal(
                linalg.mat_mul(inv, gen[coords], q), eye(b.alpha)
            ):
                return CheckResult(
                    name, False, {"subset": tsub, "block": b.subset,
                                  "reason": "singular MDS submatrix"}
                )
            for k in b.subset:
                per_msg[k] += coords.size
        # desired-message rows seen by the subset
        nodes = np.concatenate(
            [
                b.desired_offset + np.arange(m * b.per_db_len, (m + 1) * b.per_db_len)
                for b in layout.blocks
                if b.contains_desired and b.per_db_len
                for m in tsub
            ]
        )
        per_msg[desired] = nodes.size
        if any(v != expected_per_msg for v in per_msg.values()):
            return CheckResult(
                name, False, {"subset": tsub, "per_message_counts": per_msg,
                              "expected": expected_per_msg},
            )
        # full row rank: the leading square Vandermonde on these nodes
        r = nodes.size
        inv = mds.vandermonde_inverse(nodes, q)
        gen_d = mds.generator(mds.MdsSpec(layout.desired_code_len, p.L, q))
        if not np.array_equal(
            linalg.mat_mul(inv, gen_d[nodes][:, :r], q), eye(r)
        ):
            return CheckResult(
                name, False, {"subset": tsub, "reason": "desired code rows rank-deficient"}
            )
    return CheckResult(
        name, True,
        {"subsets_checked": len(subsets), "per_message_variables": expected_per_msg},
    )


def _plan_support_mismatch(plan: scheme.QueryPlan):
    """Rows of block B may touch only the message segments of B's members."""
    layout = plan.layout
    p = layout.params
    L = p.L
    for m, qm in enumerate(plan.matrices):
        row = 0
        for b in layout.blocks:
            seg = qm[row : row + b.per_db_len]
            allowed = np.zeros(p.K * L, dtype=bool)
            for k in b.subset:
                allowed[k * L : (k + 1) * L] = True
            if seg[:, ~allowed].any():
                return {"db": m, "block": b.subset}
            row += b.per_db_len
    return None


def _plan_alignment_mismatch(plan: scheme.QueryPlan):
    """Every side-information coefficient block must be a valid codeword.

    For a pair block B and member message k, the plan's coefficient rows on
    k's segment — the info rows placed in block B together with the parity
    rows placed in block B + {desired} — must form codewords of B's MDS code
    (one per coefficient column). Zeroed or otherwise inconsistent parity
    breaks this and is how the deliberately broken variant is caught.
    """
    layout = plan.layout
    p = layout.params
    L, q = p.L, p.q
    offsets = {}
    off = 0
    for b in layout.blocks:
        offsets[b.subset] = off
        off += b.per_db_len
    for b in layout.blocks:
        if b.contains_desired or b.alpha == 0:
            continue
        child = layout.by_subset.get(tuple(sorted(b.subset + (plan.desired,))))
        spec = mds.MdsSpec(b.code_len, b.alpha, q)
        gen = mds.generator(spec)
        for k in b.subset:
            cw = np.zeros((b.code_len, L), dtype=np.int64)
            for m in range(p.M):
                r0 = offsets[b.subset]
                cw[m * b.per_db_len : (m + 1) * b.per_db_len] = plan.matrices[m][
                    r0 : r0 + b.per_db_len, k * L : (k + 1) * L
                ]
                if child is not None and child.per_db_len:
                    r0 = offsets[child.subset]
                    cw[
                        b.block_len + m * child.per_db_len :
                        b.block_len + (m + 1) * child.per_db_len
                    ] = plan.matrices[m][
                        r0 : r0 + child.per_db_len, k * L : (k + 1) * L
                    ]
            head = np.arange(b.alpha)
            info = linalg.mat_mul(mds.submatrix_inverse(spec, head), cw[: b.alpha], q)
            if not np.array_equal(linalg.mat_mul(gen, info, q), cw):
                return {"block": b.subset, "message": k}
    return None


def _canonical_query_bytes(plan: scheme.QueryPlan, t_subset) -> bytes:
    q = plan.layout.params.q
    return b"".join(
        linalg.serialize_matrix(plan.matrices[m], q) for m in sorted(t_subset)
    )


def _support_mask_bytes(plan: scheme.QueryPlan, t_subset) -> bytes:
    """Zero/nonzero pattern of the subset's coefficient matrices."""
    return b"".join(
        np.packbits(plan.matrices[m].reshape(-1) != 0).tobytes()
        for m in sorted(t_subset)
    )


def empirical_privacy_check(
    params: SchemeParams,
    t_subset,
    sample_count: int,
    rng: np.random.Generator | None = None,
    break_alignment: bool = False,
    significance: float = 0.001,
    max_buckets: int = 200,
) -> CheckResult:
    """Chi-square comparison of query distributions across desired indices.

    For each desired index, draws ``sample_count`` independent plans (fresh
    secrets each) and records the colluding subset's coefficient matrices as
    a canonical byte string. The per-index empirical distributions are
    compared pairwise; Bonferroni-corrected rejection at ``significance``
    fails the check. ``break_alignment`` runs the deliberately broken
    no-MDS-coding variant (expected to be rejected).

    Bucketing: exact values while the observed support is small. When the
    value space is too large for repeats, a 64-bit hash of the full bytes
    would spread every sample to its own bucket and the test would have no
    power, so buckets then come from the matrices' zero/nonzero support
    pattern — still a deterministic function of the query, hence identically
    distributed across desired indices whenever the queries are.
    """
    p = params
    t_subset = tuple(sorted(t_subset))
    if len(t_subset) != p.T:
        raise ValueError(f"collusion subset must have size T={p.T}")
    rng = rng or np.random.default_rng(p.seed)
    name = "empirical_privacy" + ("_broken" if break_alignment else "")

    layouts = [build_layout(p, ell) for ell in range(p.K)]
    value_counters: list[dict[bytes, int]] = []
    mask_counters: list[dict[bytes, int]] = []
    for ell in range(p.K):
        vcounts: dict[bytes, int] = {}
        mcounts: dict[bytes, int] = {}
        for _ in range(sample_count):
            secrets = scheme.sample_secrets(p, rng)
            plan = scheme.build_queries(
                p, ell, secrets, layout=layouts[ell], break_alignment=break_alignment
            )
            vkey = hashlib.blake2b(
                _canonical_query_bytes(plan, t_subset), digest_size=8
            ).digest()
            vcounts[vkey] = vcounts.get(vkey, 0) + 1
            mkey = hashlib.blake2b(
                _support_mask_bytes(plan, t_subset), digest_size=8
            ).digest()
            mcounts[mkey] = mcounts.get(mkey, 0) + 1
        value_counters.append(vcounts)
        mask_counters.append(mcounts)

    if len(set().union(*value_counters)) <= max_buckets:
        counters, bucketing = value_counters, "value"
    else:
        counters, bucketing = mask_counters, "support_mask"
    support = sorted(set().union(*counters))
    if len(support) > max_buckets:
        def bucket_of(key: bytes) -> int:
            return int.from_bytes(key, "little") % max_buckets
        nbuckets = max_buckets
    else:
        index = {k: i for i, k in enumerate(support)}
        def bucket_of(key: bytes) -> int:
            return index[key]
        nbuckets = len(support)

    tables = np.zeros((p.K, nbuckets), dtype=np.int64)
    for ell, counts in enumerate(counters):
        for key, c in counts.items():
            tables[ell, bucket_of(key)] += c

    pairs = list(itertools.combinations(range(p.K), 2))
    threshold = significance / len(pairs)
    results = {}
    worst_p = 1.0
    for i, j in pairs:
        table = tables[[i, j]]
        table = table[:, table.sum(axis=0) > 0]
        table = _merge_sparse_buckets(table)
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        if table.shape[1] < 2 or expected.min() < 5.0:
            raise ValueError(
                f"sample_count={sample_count} is too small for the chi-square "
                "minimum expected bucket count; increase the sample count"
            )
        chi2, pval, dof, _ = stats.chi2_contingency(table, correction=False)
        results[f"p_{i}_{j}"] = float(pval)
        worst_p = min(worst_p, pval)
    passed = worst_p > threshold
    return CheckResult(
        name,
        passed if not break_alignment else not passed,
        {"min_p": worst_p, "threshold": threshold, "buckets": nbuckets,
         "bucketing": bucketing, "samples_per_index": sample_count, **results},
    )


def _merge_sparse_buckets(table: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """Fold low-count buckets together until every expected count is adequate."""
    order = np.argsort(table.sum(axis=0))[::-1]
    table = table[:, order]
    while table.shape[1] > 2:
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        if expected.min() >= min_expected:
            break
        table = np.concatenate([table[:, :-2], table[:, -2:].sum(axis=1, keepdims=True)], axis=1)
    return table


def lemma1_exhaustive_check(
    alpha: int,
    beta: int,
    q: int,
    max_cases: int | None = None,
    rng: np.random.Generator | None = None,
) -> CheckResult:
    """Exact distributional invariance of secret-matrix row selections.

    Over all S in GL(alpha, q), the multiset {G @ S[I, :]} must equal the
    multiset {S[:beta, :]} for every invertible beta x beta G and every
    vector I of beta distinct row indices. Exhaustive over (G, I) unless
    ``max_cases`` caps it, in which case that many random cases are drawn.
    """
    name = f"lemma1_alpha{alpha}_beta{beta}_q{q}"
    if q ** (alpha * alpha) > 2**24:
        raise ValueError(f"GL({alpha},{q}) too large to enumerate")
    if not 1 <= beta <= alpha:
        raise ValueError(f"need 1 <= beta <= alpha, got beta={beta}")
    s_all = np.stack(list(linalg.enumerate_full_rank(alpha, q)))
    reference = _row_multiset(s_all[:, :beta, :], q)

    g_all = list(linalg.enumerate_full_rank(beta, q))
    index_vectors = list(itertools.permutations(range(alpha), beta))
    cases = list(itertools.product(range(len(g_all)), range(len(index_vectors))))
    if max_cases is not None and len(cases) > max_cases:
        rng = rng or np.random.default_rng(0)
        cases = [cases[i] for i in rng.choice(len(cases), size=max_cases, replace=False)]

    for gi, ii in cases:
        g, ivec = g_all[gi], list(index_vectors[ii])
        transformed = np.einsum("ij,sjk->sik", g, s_all[:, ivec, :]) % q
        if _row_multiset(transformed, q) != reference:
            return CheckResult(
                name, False, {"G_index": gi, "index_vector": ivec}
            )
    return CheckResult(
        name, True,
        {"gl_size": s_all.shape[0], "cases": len(cases)},
    )


def _row_multiset(stack: np.ndarray, q: int) -> dict[bytes, int]:
    counts: dict[bytes, int] = {}
    for s in stack:
        key = np.ascontiguousarray(s % q).tobytes()
        counts[key] = counts.get(key, 0) + 1
    return counts


def correctness_sweep(
    params: SchemeParams,
    trials: int = 10,
    rng: np.random.Generator | None = None,
    max_subsets: int = 200,
) -> CheckResult:
    """Brute-force execution: decode must return the desired message exactly,
    for every desired index and every (capped) N-subset of responders."""
    p = params
    rng = rng or np.random.default_rng(p.seed)
    name = "correctness_sweep"
    secrets = scheme.sample_secrets(p, rng)
    if math.comb(p.M, p.N) <= max_subsets:
        subsets = list(itertools.combinations(range(p.M), p.N))
    else:
        subsets = _t_subsets(p.M, p.N, max_subsets, rng)
    stores = [scheme.MessageStore.random(p, rng) for _ in range(trials)]
    # columns are independent stores; one decode per subset covers all trials
    stacked = np.stack([s.stacked for s in stores], axis=1)
    decodes = 0
    for ell in range(p.K):
        plan = scheme.build_queries(p, ell, secrets)
        decoder = scheme.Decoder(p, ell, secrets, plan.layout)
        want = np.stack([s.data[ell] for s in stores], axis=1)
        answers = [
            scheme.Answer(m, linalg.mat_mul(plan.matrices[m], stacked, p.q))
            for m in range(p.M)
        ]
        for sub in subsets:
            got = decoder.decode([answers[m] for m in sub])
            decodes += trials
            if not np.array_equal(got, want):
                bad = int(np.nonzero((got != want).any(axis=0))[0][0])
                return CheckResult(
                    name, False,
                    {"desired": ell, "store": bad, "responders": sub,
                     "seed": p.seed},
                )
    return CheckResult(
        name, True,
        {"trials": trials, "subsets": len(subsets), "decodes": decodes},
    )


def rate_vs_capacity_grid(grid) -> list[dict]:
    """Achieved rate vs the capacity formula, exactly, per grid point."""
    rows = []
    for params in grid:
        rate = scheme.achieved_rate(params)
        cap = capacity(params.K, params.N, params.T)
        rows.append(
            {
                "K": params.K, "N": params.N, "T": params.T, "M": params.M,
                "download": total_download(params),
                "rate": rate, "capacity": cap, "equal": rate == cap,
            }
        )
    return rows


def capacity_shape_check(max_K: int = 12, max_N: int = 6) -> CheckResult:
    """Capacity is decreasing in T and K, increasing in N, with limit 1 - T/N."""
    name = "capacity_shape"
    for N in range(2, max_N + 1):
        for T in range(1, N + 1):
            for K in range(1, max_K):
                if capacity(K + 1, N, T) >= capacity(K, N, T):
                    return CheckResult(name, False, {"axis": "K", "K": K, "N": N, "T": T})
            if T < N and capacity(3, N, T + 1) >= capacity(3, N, T):
                return CheckResult(name, False, {"axis": "T", "N": N, "T": T})
        if N > 2:
            for T in range(1, N):
                if capacity(3, N, T) <= capacity(3, N - 1, T):
                    return CheckResult(name, False, {"axis": "N", "N": N, "T": T})
    # gap to the K -> infinity limit shrinks monotonically to 0
    for N in range(2, max_N + 1):
        for T in range(1, N):
            limit = Fraction(N - T, N)
            gaps = [capacity(K, N, T) - limit for K in range(1, max_K + 1)]
            if any(g2 >= g1 for g1, g2 in zip(gaps, gaps[1:])) or gaps[-1] < 0:
                return CheckResult(name, False, {"axis": "limit", "N": N, "T": T})
    return CheckResult(name, True, {"max_K": max_K, "max_N": max_N})


def run_audit(
    params: SchemeParams,
    trials: int = 10,
    seed: int | None = None,
    empirical_samples: int | None = None,
    break_alignment: bool = False,
    lemma1: tuple[int, int, int] | None = None,
) -> AuditReport:
    """Full audit of one parameter point; drives the CLI ``audit`` command."""
    p = params if seed is None else SchemeParams(
        params.K, params.N, params.T, params.M, params.q, seed
    )
    if break_alignment and (p.K == 1 or p.T == p.N):
        raise ValueError(
            "fault injection needs K > 1 and T < N; otherwise there is no "
            "side-information coding to break"
        )
    rng = np.random.default_rng(p.seed)
    checks = []

    rate = scheme.achieved_rate(p)
    cap = capacity(p.K, p.N, p.T)
    checks.append(
        CheckResult("rate_equals_capacity", rate == cap,
                    {"rate": str(rate), "capacity": str(cap)})
    )
    checks.append(capacity_shape_check())

    secrets = scheme.sample_secrets(p, rng)
    plan = scheme.build_queries(p, 0, secrets, break_alignment=break_alignment)
    if break_alignment:
        # the broken variant must be caught by the structural check
        res = structural_privacy_check(p, 0, secrets, plan, rng=rng)
        res = CheckResult("structural_privacy_detects_broken", not res.passed,
                          res.details)
        checks.append(res)
    else:
        checks.append(structural_privacy_check(p, 0, secrets, plan, rng=rng))
    checks.append(correctness_sweep(p, trials=trials, rng=rng))

    if empirical_samples:
        t_subset = tuple(range(p.T))
        checks.append(
            empirical_privacy_check(
                p, t_subset, empirical_samples, rng=rng,
                break_alignment=break_alignment,
            )
        )
    if lemma1 is not None:
        a, b, q1 = lemma1
        checks.append(lemma1_exhaustive_check(a, b, q1))
    return AuditReport(params=p, checks=checks)
