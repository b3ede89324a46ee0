"""Monte-Carlo harness: synthetic DGPs, violations, rejection experiments.

Four data generating processes share the latent variables

    C1, C2 ~ N(0,1)  (exogenous controls),
    H      ~ N(0,1)  (confounder),
    delta  = sign(H) + 0.5 N(0,1),
    eta    = H + 0.5 N(0,1),

and differ in identification and error scale:

    just-*:  Z = 0.5 C1 - 0.5 C2 + N(0,1),        X = Z - 0.5 C1 + delta
    over-*:  Z1 as above, Z2 = N(0,1),            X = Z1 - 0.5 Z2 - 0.5 C1 + delta
    *-hom:   Y = 2 - X - 0.5 C1 + C2 + eta
    *-het:   Y = 2 - X - 0.5 C1 + C2 + eta * Z1^2

Violations add t * g(.) to Y (g = Z1^2, sign(Z1), the squared or signed
structural term).  Clustered variants replace every N(0,1) draw D_i by
s * R_{g(i)} + (1 - s) * S_i with cluster-shared R and idiosyncratic S.

Every Gaussian draw has its own Philox stream keyed by (master seed,
replication, variable, shared/idiosyncratic role), so a zero-strength
violation or zero cluster dependence reproduces the plain DGP bit for bit.
"""

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dataset import ColumnRoles, Dataset, augment
from .exceptions import DataError, EstimationError
from .gaussian import standard_normal
from .jtest import sargan, square_instrument
from .rptest import _single_split_outcomes
from .streams import derive_seed, generator

SETTINGS = ("just-hom", "just-het", "over-hom", "over-het")
VIOLATIONS = ("none", "z-squared", "sign-z", "misspec-squared", "misspec-sign")
METHODS = ("rp-het", "rp-hom", "rp-cluster", "overid-j")

# Variable tags addressing per-draw Philox streams.
_TAG_C1, _TAG_C2, _TAG_H, _TAG_DELTA, _TAG_ETA, _TAG_Z, _TAG_Z2 = range(1, 8)
_ROLE_IDIO, _ROLE_SHARED = 0, 1
# Tag folded with (master_seed, rep) into the per-replication test seed.
_TEST_SEED_TAG = 0x7E57


@dataclass(frozen=True)
class SimSpec:
    """One simulation configuration.

    ``cluster_size == 0`` generates i.i.d. data without cluster labels.
    Any positive size attaches labels (rows i // cluster_size) and, when
    ``cluster_strength > 0``, mixes cluster-shared noise into every
    Gaussian draw.
    """

    setting: str
    n: int
    violation: str = "none"
    strength: float = 0.0
    cluster_strength: float = 0.0
    cluster_size: int = 0
    reps: int = 1000
    alpha: float = 0.05
    master_seed: int = 0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting '{self.setting}' (choose from {SETTINGS})")
        if self.violation not in VIOLATIONS:
            raise ValueError(f"unknown violation '{self.violation}' (choose from {VIOLATIONS})")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.strength < 0:
            raise ValueError("violation strength must be nonnegative")
        if not 0.0 <= self.cluster_strength <= 1.0:
            raise ValueError("cluster_strength must lie in [0, 1]")
        if self.cluster_size < 0:
            raise ValueError("cluster_size must be nonnegative")
        if self.cluster_strength > 0.0:
            if self.cluster_size < 1:
                raise ValueError("cluster_strength > 0 requires a positive cluster_size")
            if self.n % self.cluster_size != 0:
                raise ValueError("n must be divisible by cluster_size")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def overidentified(self) -> bool:
        return self.setting.startswith("over")

    @property
    def heteroskedastic(self) -> bool:
        return self.setting.endswith("het")

    @property
    def clustered(self) -> bool:
        return self.cluster_size > 0


def _stream(rep_index: int, tag: int, role: int) -> int:
    return (int(rep_index) << 16) | (tag << 4) | role


def _noise(spec: SimSpec, rep_index: int, tag: int) -> np.ndarray:
    """One N(0,1) vector, cluster-mixed when cluster dependence is on."""
    gen = generator(spec.master_seed, _stream(rep_index, tag, _ROLE_IDIO))
    idio = standard_normal(gen, spec.n)
    if spec.clustered and spec.cluster_strength > 0.0:
        groups = np.arange(spec.n) // spec.cluster_size
        shared_gen = generator(spec.master_seed, _stream(rep_index, tag, _ROLE_SHARED))
        shared = standard_normal(shared_gen, int(groups[-1]) + 1)
        s = spec.cluster_strength
        return s * shared[groups] + (1.0 - s) * idio
    return idio


def generate(spec: SimSpec, rep_index: int) -> Dataset:
    """Draw one dataset from the configured process.

    C1 and C2 come back as controls; cluster labels are attached when
    ``spec.cluster_size`` is positive.
    """
    c1 = _noise(spec, rep_index, _TAG_C1)
    c2 = _noise(spec, rep_index, _TAG_C2)
    h = _noise(spec, rep_index, _TAG_H)
    delta = np.sign(h) + 0.5 * _noise(spec, rep_index, _TAG_DELTA)
    eta = h + 0.5 * _noise(spec, rep_index, _TAG_ETA)

    z1 = 0.5 * c1 - 0.5 * c2 + _noise(spec, rep_index, _TAG_Z)
    if spec.overidentified:
        z2 = _noise(spec, rep_index, _TAG_Z2)
        x = z1 - 0.5 * z2 - 0.5 * c1 + delta
        z = np.column_stack([z1, z2])
        instrument_names = ("Z1", "Z2")
    else:
        x = z1 - 0.5 * c1 + delta
        z = z1.reshape(-1, 1)
        instrument_names = ("Z",)

    err = eta * z1 * z1 if spec.heteroskedastic else eta
    y = 2.0 - x - 0.5 * c1 + c2 + err

    if spec.violation != "none" and spec.strength != 0.0:
        t = spec.strength
        if spec.violation == "z-squared":
            y = y + t * z1 * z1
        elif spec.violation == "sign-z":
            y = y + t * np.sign(z1)
        elif spec.violation == "misspec-squared":
            y = y + t * (-x - 0.5 * c1 + c2) ** 2
        else:  # misspec-sign
            y = y + t * np.sign(-x - 0.5 * c1 + c2)

    cluster_ids = None
    cluster_name = None
    if spec.clustered:
        cluster_ids = np.arange(spec.n) // spec.cluster_size
        cluster_name = "cluster"
    names = ColumnRoles(
        response="Y",
        endogenous=("X",),
        instruments=instrument_names,
        controls=("C1", "C2"),
        cluster=cluster_name,
    )
    return Dataset(
        y=y,
        x=x.reshape(-1, 1),
        z=z,
        controls=np.column_stack([c1, c2]),
        cluster_ids=cluster_ids,
        column_names=names,
    )


@dataclass(frozen=True)
class MethodRate:
    """Rejection rate of one method with its Monte-Carlo standard error."""

    rate: float
    std_error: float
    successes: int
    failures: int


@dataclass(frozen=True)
class RejectionReport:
    """Per-method rejection rates for one simulation configuration."""

    spec: SimSpec
    methods: Mapping[str, MethodRate]
    p_values: Mapping[str, np.ndarray] | None = None


def default_methods(spec: SimSpec) -> tuple[str, ...]:
    methods = ["rp-het", "rp-hom"]
    if spec.clustered:
        methods.append("rp-cluster")
    methods.append("overid-j")
    return tuple(methods)


_KIND_OF_METHOD = {"rp-het": "het", "rp-hom": "hom", "rp-cluster": "cluster"}


def _jtest_pvalue(spec: SimSpec, aug) -> float:
    if spec.overidentified:
        return sargan(aug).p_value
    return sargan(square_instrument(aug, 0)).p_value


def rejection_experiment(spec: SimSpec, methods: Sequence[str] | None = None,
                         keep_pvalues: bool = False) -> RejectionReport:
    """Estimate rejection rates at level ``spec.alpha`` over ``spec.reps``
    replications.

    Replications that fail with a rank or degeneracy error are counted per
    method in ``failures`` and excluded from the rate denominator.  Output
    is a deterministic function of the spec.
    """
    if methods is None:
        methods = default_methods(spec)
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method '{m}' (choose from {METHODS})")
    if "rp-cluster" in methods and not spec.clustered:
        raise ValueError("rp-cluster requires a clustered spec (cluster_size > 0)")

    rp_kinds = tuple(_KIND_OF_METHOD[m] for m in methods if m in _KIND_OF_METHOD)
    rejections = {m: 0 for m in methods}
    successes = {m: 0 for m in methods}
    failures = {m: 0 for m in methods}
    pvals: dict[str, list[float]] = {m: [] for m in methods} if keep_pvalues else {}

    for rep in range(spec.reps):
        ds = generate(spec, rep)
        aug = augment(ds)
        seed = derive_seed(spec.master_seed, rep, _TEST_SEED_TAG)

        if rp_kinds:
            per_kind: dict[str, object] = {}
            try:
                per_kind = _single_split_outcomes(aug, rp_kinds, 0.9, 0.05, seed, None)
            except (EstimationError, DataError):
                # attribute the failure per kind: retry each individually
                for kind in rp_kinds:
                    try:
                        per_kind[kind] = _single_split_outcomes(
                            aug, (kind,), 0.9, 0.05, seed, None
                        )[kind]
                    except (EstimationError, DataError):
                        pass
            for m in methods:
                kind = _KIND_OF_METHOD.get(m)
                if kind is None:
                    continue
                outcome = per_kind.get(kind)
                if outcome is None:
                    failures[m] += 1
                    continue
                successes[m] += 1
                rejections[m] += outcome.p_value <= spec.alpha
                if keep_pvalues:
                    pvals[m].append(outcome.p_value)

        if "overid-j" in methods:
            try:
                p = _jtest_pvalue(spec, aug)
            except (EstimationError, DataError):
                failures["overid-j"] += 1
            else:
                successes["overid-j"] += 1
                rejections["overid-j"] += p <= spec.alpha
                if keep_pvalues:
                    pvals["overid-j"].append(p)

    rates = {}
    for m in methods:
        ok = successes[m]
        rate = rejections[m] / ok if ok else float("nan")
        se = math.sqrt(rate * (1.0 - rate) / ok) if ok else float("nan")
        rates[m] = MethodRate(rate=rate, std_error=se, successes=ok, failures=failures[m])
    kept = {m: np.asarray(v) for m, v in pvals.items()} if keep_pvalues else None
    return RejectionReport(spec=spec, methods=rates, p_values=kept)


def power_curve(spec: SimSpec, strengths: Sequence[float],
                methods: Sequence[str] | None = None,
                keep_pvalues: bool = False) -> list[RejectionReport]:
    """One rejection experiment per violation strength.

    All strengths reuse the same replication seeds (common random numbers),
    so the zero-strength entry reproduces the size experiment exactly and
    power comparisons across strengths share their Monte-Carlo noise.
    """
    if spec.violation == "none":
        raise ValueError("power_curve needs a violation kind on the spec")
    return [
        rejection_experiment(replace(spec, strength=float(t)), methods, keep_pvalues)
        for t in strengths
    ]


def report_rows(report: RejectionReport) -> list[dict]:
    """Tidy rows (one per method) for CSV or JSON emission."""
    spec = report.spec
    rows = []
    for method, res in report.methods.items():
        rows.append(
            {
                "setting": spec.setting,
                "n": spec.n,
                "violation": spec.violation,
                "strength": spec.strength,
                "s": spec.cluster_strength,
                "method": method,
                "rate": res.rate,
                "se": res.std_error,
                "reps": spec.reps,
                "failures": res.failures,
            }
        )
    return rows
