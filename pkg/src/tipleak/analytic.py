"""Closed-form analysis of the tip-selection identity leak.

The attack model: a network of ``full_nodes`` full nodes, ``compromised``
of which log the tip pairs they hand out.  A light node asks ``requests``
distinct full nodes for a tip selection and follows exactly one answer.
The chance that the followed answer came from a logging node is what the
adversary needs; everything here is computed with exact integer
combinatorics so the numbers stay trustworthy up to ledger-scale node
counts (10**6 and beyond).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


class ParameterError(ValueError):
    """Raised when arguments fall outside a formula's domain."""


# ---------------------------------------------------------------------------
# parameter bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackParams:
    """Population seen by one light node.

    full_nodes:  reachable full nodes (N >= 1)
    compromised: how many of them log responses (0 <= C <= N)
    requests:    distinct nodes queried per attach (1 <= M <= N)
    """

    full_nodes: int
    compromised: int
    requests: int

    def __post_init__(self) -> None:
        n, c, m = self.full_nodes, self.compromised, self.requests
        if n < 1:
            raise ParameterError(f"full_nodes must be >= 1, got {n}")
        if not 0 <= c <= n:
            raise ParameterError(f"compromised must be in [0, {n}], got {c}")
        if not 1 <= m <= n:
            raise ParameterError(f"requests must be in [1, {n}], got {m}")


@dataclass
class AnonymityProfile:
    """A probability distribution over candidate senders.

    Probabilities are normalized on construction; a sum farther than
    1e-9 from 1 is rejected rather than silently rescaled.
    """

    sender_probs: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        probs = list(self.sender_probs)
        if not probs:
            raise ParameterError("profile needs at least one probability")
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"probability {p} outside [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"probabilities sum to {total}, not 1")
        self.sender_probs = [p / total for p in probs]

    @property
    def candidate_count(self) -> int:
        return len(self.sender_probs)

    @classmethod
    def uniform(cls, n: int) -> "AnonymityProfile":
        if n < 1:
            raise ParameterError("uniform profile needs n >= 1")
        return cls([1.0 / n] * n)


@dataclass(frozen=True)
class MixerParams:
    """Mixing-service chain model: each hop is re-identified only if two
    independent address-to-identity mappings (probability ``link_prob``
    each) are both known to the adversary."""

    link_prob: float
    chain_length: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.link_prob <= 1.0:
            raise ParameterError(f"link_prob must be in [0, 1], got {self.link_prob}")
        if self.chain_length < 1:
            raise ParameterError(f"chain_length must be >= 1, got {self.chain_length}")


# ---------------------------------------------------------------------------
# hypergeometric machinery
# ---------------------------------------------------------------------------

def hypergeom_pmf(full_nodes: int, compromised: int, requests: int, k: int) -> float:
    """P(exactly k of the queried nodes are compromised).

    Exact rational arithmetic: C(C,k)*C(N-C,M-k)/C(N,M) evaluated with
    big-integer binomials, converted to float only at the end.  Returns
    0.0 for k outside the feasible support.
    """
    params = AttackParams(full_nodes, compromised, requests)
    n, c, m = params.full_nodes, params.compromised, params.requests
    if k < max(0, m - (n - c)) or k > min(m, c):
        return 0.0
    num = math.comb(c, k) * math.comb(n - c, m - k)
    return float(Fraction(num, math.comb(n, m)))


def deanon_probability(full_nodes: int, compromised: int, requests: int) -> float:
    """Probability that the response a light node follows was logged.

    Sum over k of (k/M) * P(k of M queried are compromised).  Carried out
    in exact rationals; the result collapses to C/N for every valid
    parameter set (the mean of a hypergeometric draw), which is why the
    population ratio alone decides the attack's success rate.
    """
    params = AttackParams(full_nodes, compromised, requests)
    n, c, m = params.full_nodes, params.compromised, params.requests
    total = Fraction(0)
    denom = math.comb(n, m)
    for k in range(1, min(m, c) + 1):
        weight = Fraction(k, m)
        total += weight * Fraction(math.comb(c, k) * math.comb(n - c, m - k), denom)
    return float(total)


def required_full_nodes(compromised: int, target_rate: float | str | Fraction) -> int:
    """Smallest honest-network size N with C/N strictly below target_rate.

    The target is interpreted as the decimal the caller wrote (0.01 means
    1/100 exactly), not as the nearest binary float, so thresholds behave
    the way operators expect: required_full_nodes(10, 0.01) == 1001.
    """
    if compromised < 1:
        raise ParameterError(f"compromised must be >= 1, got {compromised}")
    if isinstance(target_rate, float):
        target = Fraction(str(target_rate))
    else:
        target = Fraction(target_rate)
    if not 0 < target <= 1:
        raise ParameterError(f"target_rate must be in (0, 1], got {target_rate}")
    # smallest integer N with N > C/target
    return math.floor(Fraction(compromised) / target) + 1


# ---------------------------------------------------------------------------
# anonymity degree
# ---------------------------------------------------------------------------

def entropy_degree(profile: AnonymityProfile) -> float:
    """Shannon-entropy anonymity degree H(X) / log2(N) in [0, 1].

    Zero-probability candidates contribute nothing.  A uniform profile
    scores exactly 1; the degree is undefined (raises) for fewer than two
    candidates because the normalizer log2(N) vanishes.
    """
    n = profile.candidate_count
    if n < 2:
        raise ParameterError("anonymity degree needs at least 2 candidates")
    probs = profile.sender_probs
    if all(p == probs[0] for p in probs):
        return 1.0
    h = -math.fsum(p * math.log2(p) for p in probs if p > 0.0)
    h_max = math.log2(n)
    return min(max(h / h_max, 0.0), 1.0)


# ---------------------------------------------------------------------------
# mixing-service chains
# ---------------------------------------------------------------------------

def mixer_chain_probability(link_prob: float, length: int) -> float:
    """P(an identified participant chain reaches the given length).

    Each extra hop needs two fresh mappings known to the adversary, so
    the survival probability is link_prob**(2*(length-1)).
    """
    params = MixerParams(link_prob, length)
    return params.link_prob ** (2 * (params.chain_length - 1))


def mixer_expected_identified(link_prob: float, mode: str = "normalized") -> float:
    """Expected number of participants identified through a mixer chain.

    mode="raw" evaluates the literal series sum_i i * p**(2*(i-1)),
    which closes to 1/(1-p**2)**2.  The series' terms are survival
    probabilities rather than a normalized distribution, so "normalized"
    (the default) divides by the series of the terms themselves, giving
    1/(1-p**2) -- the true expected chain length (about 1.0101 at p=0.1).
    """
    if not 0.0 <= link_prob < 1.0:
        raise ParameterError(
            f"expected chain length diverges unless 0 <= link_prob < 1, got {link_prob}"
        )
    q = link_prob * link_prob
    raw = 1.0 / ((1.0 - q) * (1.0 - q))
    if mode == "raw":
        return raw
    if mode == "normalized":
        return raw * (1.0 - q)  # == 1 / (1 - p**2)
    raise ParameterError(f"mode must be 'raw' or 'normalized', got {mode!r}")


# ---------------------------------------------------------------------------
# regional takeover rates
# ---------------------------------------------------------------------------

def continental_takeover_rate(region_nodes: int, mode: str, count: int = 1) -> float:
    """Attack rate inside one region under same-region request routing.

    mode="takeover": count existing nodes become adversarial -> count/n.
    mode="add":      count new adversarial nodes join -> count/(n+count).
    mode="collude":  count of the n operators pool logs -> count/n.
    """
    if region_nodes < 1:
        raise ParameterError(f"region_nodes must be >= 1, got {region_nodes}")
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if mode in ("takeover", "collude"):
        if count > region_nodes:
            raise ParameterError(
                f"{mode} of {count} nodes impossible in a region of {region_nodes}"
            )
        return float(Fraction(count, region_nodes))
    if mode == "add":
        return float(Fraction(count, region_nodes + count))
    raise ParameterError(f"mode must be 'takeover', 'add' or 'collude', got {mode!r}")
