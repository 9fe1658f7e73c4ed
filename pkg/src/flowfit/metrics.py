"""GEH error statistics, the calibration objective, and count splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Daily flows run roughly 8-12x the typical hourly flow; the fixed middle
# value converts stored veh/24h volumes to hourly-equivalent GEH.
DAILY_TO_HOURLY = 10.0

# Common guideline: a well-calibrated model keeps GEH below 5 on most counts.
GEH_THRESHOLD = 5.0


@dataclass(frozen=True)
class TrafficCount:
    """Observed daily flow (veh/24h) on one directed link."""

    link_id: str
    observed: float


class LinkGeh(NamedTuple):
    link_id: str
    predicted: float
    observed: float
    geh: float


@dataclass(frozen=True)
class EvaluationReport:
    per_link: tuple[LinkGeh, ...]
    objective_j: float
    share_geh_below_5: float
    n_measurements: int


@dataclass(frozen=True)
class SplitExperimentResult:
    split_fraction: float
    seed: int
    train_geh: float
    test_geh: float


def geh_hourly(predicted, measured):
    """GEH statistic sqrt(2 (P-M)^2 / (P+M)) between hourly flows.

    Defined as 0 when both flows are 0 (the limit along P = M). Accepts
    scalars or arrays; inputs must be nonnegative.
    """
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if (p < 0).any() or (m < 0).any():
        raise ValueError("flows must be >= 0")
    s = p + m
    out = np.where(s > 0, np.sqrt(2.0 * (p - m) ** 2 / np.where(s > 0, s, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def geh_from_daily(predicted_daily, measured_daily):
    """Hourly-equivalent GEH for daily (veh/24h) flows via the 10x divisor."""
    p = np.asarray(predicted_daily, dtype=float)
    m = np.asarray(measured_daily, dtype=float)
    return geh_hourly(p / DAILY_TO_HOURLY, m / DAILY_TO_HOURLY)


def evaluate(flows, counts, *, threshold: float = GEH_THRESHOLD) -> EvaluationReport:
    """Per-link GEH report against observed counts.

    The objective J is the plain mean of hourly-equivalent GEH over counted
    links; links without counts are ignored.
    """
    if not counts:
        raise ValueError("no traffic counts: objective undefined")
    per_link = []
    for count in counts:
        if count.link_id not in flows:
            raise ValueError(f"count references unknown link {count.link_id!r}")
        predicted = float(flows[count.link_id])
        per_link.append(
            LinkGeh(count.link_id, predicted, count.observed,
                    geh_from_daily(predicted, count.observed))
        )
    gehs = np.array([e.geh for e in per_link])
    return EvaluationReport(
        per_link=tuple(per_link),
        objective_j=float(gehs.mean()),
        share_geh_below_5=float((gehs < threshold).mean()),
        n_measurements=len(per_link),
    )


def split_counts(counts, fraction: float, seed: int):
    """Seeded random train/test partition with round-half-up train size."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must be in (0, 1), got {fraction!r}")
    n = len(counts)
    n_train = int(fraction * n + 0.5)
    if n_train < 1 or n - n_train < 1:
        raise ValueError(f"degenerate split: {n_train} train / {n - n_train} test")
    perm = np.random.default_rng(seed).permutation(n)
    train = [counts[i] for i in perm[:n_train]]
    test = [counts[i] for i in perm[n_train:]]
    return train, test


def report_text(report: EvaluationReport, *, threshold: float = GEH_THRESHOLD) -> str:
    """Human-readable evaluation summary with the worst links listed first."""
    lines = [
        f"measurements: {report.n_measurements}",
        f"mean GEH (hourly-equivalent): {report.objective_j:.4f}",
        f"share GEH < {threshold:g}: {100.0 * report.share_geh_below_5:.1f}%",
        "",
        f"{'link':<20} {'observed':>12} {'predicted':>12} {'GEH':>8}",
    ]
    ranked = sorted(report.per_link, key=lambda e: (-e.geh, e.link_id))
    for e in ranked:
        lines.append(
            f"{e.link_id:<20} {e.observed:>12.1f} {e.predicted:>12.1f} {e.geh:>8.3f}"
        )
    return "\n".join(lines)
