"""The oracle: crash diffing and statistical distribution comparison.

Given the execution outcomes of a source/follow-up pair and the transform
records, check_relation applies the expected output relation (identity,
bit remapping, marginalization of added registers, or the Cartesian
product for partitioned execution) and flags crash differences or
statistically significant distribution differences (two-sample
Kolmogorov-Smirnov below the p-value threshold).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .backend import Crash, ExecutionOutcome, OutputDistribution, Success
from .errors import EmptyDistribution, LengthMismatch, PositionOverlap
from .transforms import ADD_REGISTER, EQUIVALENCE, PRODUCT, REMAPPED, TransformRecord

OK = "ok"
CRASH_DIFFERENCE = "crash_difference"
DISTRIBUTION_DIFFERENCE = "distribution_difference"

DEFAULT_THRESHOLD = 0.05


@dataclass(frozen=True)
class Verdict:
    kind: str
    relation_used: str
    side: str | None = None  # crash difference: "source" | "followup"
    phase: str | None = None
    message: str | None = None
    abstracted_message: str | None = None
    statistic: float | None = None
    p_value: float | None = None

    @property
    def is_warning(self) -> bool:
        return self.kind != OK


# ---------------------------------------------------------------------------
# Crash message abstraction (program-specific references removed)
# ---------------------------------------------------------------------------

_PATH_PATTERNS = [
    re.compile(r"(?:[A-Za-z0-9_.~-]+/)+[A-Za-z0-9_.~-]+"),
    re.compile(r"\b[\w-]+\.(?:py|qasm|json|txt|inc|csv)\b"),
    re.compile(r"\bfile\w+\b"),
]
_QUOTED = re.compile(r"'[^']*'|\"[^\"]*\"")
_INTEGER = re.compile(r"\d+")


def abstract_message(raw: str) -> str:
    """Abstract line numbers, quoted identifiers, and path-like tokens.

    Deterministic and idempotent; messages differing only in those
    program-specific references abstract to the same string.
    """
    out = raw
    for pattern in _PATH_PATTERNS:
        out = pattern.sub("<PATH>", out)
    out = _QUOTED.sub("<ID>", out)
    out = _INTEGER.sub("<N>", out)
    return out


# ---------------------------------------------------------------------------
# Distribution post-processing
# ---------------------------------------------------------------------------


def _bit(key: str, clbit: int) -> str:
    return key[len(key) - 1 - clbit]


def remap_distribution(d: OutputDistribution, mapping: Sequence[int]) -> OutputDistribution:
    """Permute bit positions: output bit mapping[i] takes input bit i."""
    length = d.key_length()
    if d.counts and sorted(mapping) != list(range(length)):
        raise LengthMismatch(
            f"mapping over {len(mapping)} positions applied to {length}-bit keys"
        )
    counts: dict[str, float] = {}
    for key, count in d.counts.items():
        out = [""] * length
        for i in range(length):
            out[mapping[i]] = _bit(key, i)
        new_key = "".join(reversed(out))
        counts[new_key] = counts.get(new_key, 0) + count
    return OutputDistribution(counts, d.shots)


def inverse_mapping(mapping: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(mapping)
    for i, v in enumerate(mapping):
        inv[v] = i
    return tuple(inv)


def marginalize_added_bits(
    d: OutputDistribution, positions: Sequence[int]
) -> OutputDistribution:
    """Drop the given bit positions, summing counts of collapsing keys."""
    drop = set(positions)
    counts: dict[str, float] = {}
    for key, count in d.counts.items():
        keep = [c for c in range(len(key)) if c not in drop]
        new_key = "".join(_bit(key, c) for c in sorted(keep, reverse=True))
        counts[new_key] = counts.get(new_key, 0) + count
    return OutputDistribution(counts, d.shots)


def product_distribution(
    d_a: OutputDistribution,
    d_b: OutputDistribution,
    record: TransformRecord,
) -> OutputDistribution:
    """Cartesian product of two partition distributions.

    Bit i of each output key is taken from the part that measured original
    clbit i; positions covered by neither part read 0. Counts are
    renormalized so the product totals shots of part A.
    """
    pos_a, pos_b = record.partition_a, record.partition_b
    if set(pos_a) & set(pos_b):
        raise PositionOverlap(f"partition positions overlap: {pos_a} vs {pos_b}")
    total = record.total_clbits
    counts: dict[str, float] = {}
    scale = 1.0 / float(d_b.shots)
    for key_a, count_a in d_a.counts.items():
        for key_b, count_b in d_b.counts.items():
            bits = ["0"] * total
            for i, pos in enumerate(pos_a):
                bits[total - 1 - pos] = _bit(key_a, i)
            for i, pos in enumerate(pos_b):
                bits[total - 1 - pos] = _bit(key_b, i)
            key = "".join(bits)
            counts[key] = counts.get(key, 0.0) + count_a * count_b * scale
    return OutputDistribution(counts, d_a.shots)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov two-sample test
# ---------------------------------------------------------------------------


def ks_two_sample(
    d_a: OutputDistribution, d_b: OutputDistribution
) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value.

    Bit-strings are ordered by their binary integer value; the empirical
    CDFs are weighted by counts. The p-value uses the alternating
    exponential series truncated once terms drop below 1e-12.
    """
    if not d_a.counts or not d_b.counts or d_a.shots <= 0 or d_b.shots <= 0:
        raise EmptyDistribution("KS test needs two nonempty distributions")
    if d_a.key_length() != d_b.key_length():
        raise LengthMismatch(
            f"KS test on keys of different lengths: "
            f"{d_a.key_length()} vs {d_b.key_length()}"
        )
    values_a = {int(k, 2): v for k, v in d_a.counts.items()}
    values_b = {int(k, 2): v for k, v in d_b.counts.items()}
    support = sorted(set(values_a) | set(values_b))
    cdf_a = cdf_b = 0.0
    statistic = 0.0
    for value in support:
        cdf_a += values_a.get(value, 0.0) / d_a.shots
        cdf_b += values_b.get(value, 0.0) / d_b.shots
        statistic = max(statistic, abs(cdf_a - cdf_b))
    statistic = min(1.0, statistic)
    return statistic, _ks_p_value(statistic, float(d_a.shots), float(d_b.shots))


def _ks_p_value(statistic: float, n_a: float, n_b: float) -> float:
    if statistic <= 0.0:
        return 1.0
    lam = statistic * math.sqrt(n_a * n_b / (n_a + n_b))
    total = 0.0
    sign = 1.0
    for k in range(1, 100_000):
        term = math.exp(-2.0 * (k * lam) ** 2)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


# ---------------------------------------------------------------------------
# Relation checking
# ---------------------------------------------------------------------------

FollowupOutcome = ExecutionOutcome | tuple[ExecutionOutcome, ExecutionOutcome]


def _as_records(records) -> tuple[TransformRecord, ...]:
    if isinstance(records, TransformRecord):
        return (records,)
    return tuple(records)


def _combine_partition(outcome: FollowupOutcome) -> ExecutionOutcome | None:
    """Collapse a partition outcome pair into a single crash, if any."""
    if not isinstance(outcome, tuple):
        return outcome if isinstance(outcome, Crash) else None
    for side in outcome:
        if isinstance(side, Crash):
            return side
    return None


def postprocess_followup(
    records: Sequence[TransformRecord], outcome: FollowupOutcome
) -> OutputDistribution:
    """Map a successful follow-up outcome into the source's output frame."""
    records = _as_records(records)
    relation = records[-1].relation if records else EQUIVALENCE
    if relation == PRODUCT:
        dist = product_distribution(
            outcome[0].distribution, outcome[1].distribution, records[-1]
        )
    elif relation == REMAPPED:
        dist = remap_distribution(
            outcome.distribution, inverse_mapping(records[-1].mapping)
        )
    else:
        dist = outcome.distribution
    added: list[int] = []
    for record in records:
        if record.kind == ADD_REGISTER:
            added.extend(record.added_clbits)
    if added:
        dist = marginalize_added_bits(dist, added)
    return dist


def check_relation(
    records,
    out_s: ExecutionOutcome,
    out_f: FollowupOutcome,
    threshold: float = DEFAULT_THRESHOLD,
) -> Verdict:
    """Compare a source/follow-up pair under the recorded output relation.

    `records` is the transformation chain (a single record is accepted);
    the last record determines the relation, earlier add-register records
    contribute marginalized bit positions.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    records = _as_records(records)
    relation = records[-1].relation if records else EQUIVALENCE
    crash_f = _combine_partition(out_f)
    crash_s = out_s if isinstance(out_s, Crash) else None
    if crash_s is not None and crash_f is not None:
        abstract_s = abstract_message(crash_s.message)
        abstract_f = abstract_message(crash_f.message)
        if abstract_s == abstract_f:
            return Verdict(OK, relation)
        return Verdict(
            CRASH_DIFFERENCE, relation, side="followup", phase=crash_f.phase,
            message=crash_f.message, abstracted_message=abstract_f,
        )
    if crash_s is not None:
        return Verdict(
            CRASH_DIFFERENCE, relation, side="source", phase=crash_s.phase,
            message=crash_s.message, abstracted_message=abstract_message(crash_s.message),
        )
    if crash_f is not None:
        return Verdict(
            CRASH_DIFFERENCE, relation, side="followup", phase=crash_f.phase,
            message=crash_f.message, abstracted_message=abstract_message(crash_f.message),
        )
    dist_f = postprocess_followup(records, out_f)
    statistic, p_value = ks_two_sample(out_s.distribution, dist_f)
    if p_value < threshold:
        return Verdict(
            DISTRIBUTION_DIFFERENCE, relation, statistic=statistic, p_value=p_value
        )
    return Verdict(OK, relation, statistic=statistic, p_value=p_value)


def verdict_to_json(v: Verdict) -> dict:
    out: dict = {"kind": v.kind, "relation": v.relation_used}
    if v.side is not None:
        out["side"] = v.side
        out["phase"] = v.phase
        out["message"] = v.message
        out["abstracted_message"] = v.abstracted_message
    if v.statistic is not None:
        out["statistic"] = v.statistic
        out["p_value"] = v.p_value
    return out
