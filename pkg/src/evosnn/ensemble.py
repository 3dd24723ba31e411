"""Voting ensembles of two or three networks, with FAR calibration.

Members run independently over the same encoded input (each with its own
simulator state and spike-count threshold); their per-step binary
predictions are folded with the ensemble's vote rule.  Calibration raises
member thresholds one count at a time, always choosing the raise that
costs the least ensemble TPR, until the ensemble false alarm rate drops
to the target.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics as M
from .encoding import EncoderSpec
from .inference import classify_dataset
from .network import Network

ANY = "any"
MAJORITY = "majority"
UNANIMOUS = "unanimous"
VOTES = (ANY, MAJORITY, UNANIMOUS)

PAIR_VOTES = (ANY, UNANIMOUS)
TRIO_VOTES = (ANY, MAJORITY, UNANIMOUS)


@dataclass(frozen=True)
class EnsembleMember:
    network: Network
    theta: int = 0


@dataclass
class Ensemble:
    members: list[EnsembleMember]
    vote: str

    def __post_init__(self):
        if self.vote not in VOTES:
            raise ValueError(f"unknown vote rule {self.vote!r}")
        if len(self.members) not in (2, 3):
            raise ValueError("an ensemble has 2 or 3 members")
        if self.vote == MAJORITY and len(self.members) != 3:
            raise ValueError("majority vote needs exactly 3 members")

    @property
    def thetas(self) -> list[int]:
        return [m.theta for m in self.members]


@dataclass
class CalibrationResult:
    ensemble: Ensemble
    far_per_hour: float
    tpr: float
    reached: bool


def vote_combine(member_predictions, vote: str) -> int:
    """Fold one step's member predictions into the ensemble prediction."""
    preds = [int(p) for p in member_predictions]
    if vote == MAJORITY and len(preds) != 3:
        raise ValueError("majority vote needs exactly 3 members")
    if len(preds) not in (2, 3):
        raise ValueError("an ensemble has 2 or 3 members")
    if vote == ANY:
        return int(any(preds))
    if vote == MAJORITY:
        return int(sum(preds) >= 2)
    if vote == UNANIMOUS:
        return int(all(preds))
    raise ValueError(f"unknown vote rule {vote!r}")


def _combine_arrays(ys: list[np.ndarray], vote: str) -> np.ndarray:
    stack = np.stack(ys)
    if vote == ANY:
        return stack.max(axis=0).astype(np.int8)
    if vote == MAJORITY:
        return (stack.sum(axis=0) >= 2).astype(np.int8)
    return stack.min(axis=0).astype(np.int8)


def _as_member(obj) -> EnsembleMember:
    if isinstance(obj, EnsembleMember):
        return obj
    if isinstance(obj, Network):
        return EnsembleMember(network=obj, theta=0)
    if hasattr(obj, "network"):
        theta = getattr(obj, "theta", 0)
        return EnsembleMember(network=obj.network, theta=int(theta))
    raise TypeError(f"cannot build an ensemble member from {type(obj).__name__}")


def enumerate_ensembles(top, k_max: int = 3) -> list[Ensemble]:
    """All pairs (and trios) over ``top`` with every applicable vote rule.

    ``top`` may hold EnsembleMembers, ScoredNetworks, or bare Networks;
    member order follows the input, so the output order is deterministic.
    """
    members = [_as_member(m) for m in top]
    if len(members) < 2:
        raise ValueError("ensembling needs at least 2 networks")
    out: list[Ensemble] = []
    n = len(members)
    for i in range(n):
        for j in range(i + 1, n):
            for vote in PAIR_VOTES:
                out.append(Ensemble(members=[members[i], members[j]],
                                    vote=vote))
    if k_max >= 3:
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    for vote in TRIO_VOTES:
                        out.append(Ensemble(
                            members=[members[i], members[j], members[k]],
                            vote=vote))
    return out


def member_counts(ensemble: Ensemble, spec: EncoderSpec, runs,
                  jobs: int = 1) -> list[list[np.ndarray]]:
    """Raw per-step spike counts, indexed [member][run]."""
    return [[t.z for t in classify_dataset(m.network, spec, runs, jobs=jobs)]
            for m in ensemble.members]


def _member_ys(windowed: list[list[np.ndarray]], thetas) -> list[list[np.ndarray]]:
    return [[(w > theta).astype(np.int8) for w in member]
            for member, theta in zip(windowed, thetas)]


def ensemble_predictions(ensemble: Ensemble, spec: EncoderSpec, runs,
                         window: int = 0,
                         counts: list[list[np.ndarray]] | None = None
                         ) -> list[np.ndarray]:
    """Combined per-run binary predictions of the ensemble."""
    if counts is None:
        counts = member_counts(ensemble, spec, runs)
    windowed = [[M.rolling_sum(z, window) for z in member]
                for member in counts]
    ys = _member_ys(windowed, ensemble.thetas)
    return [_combine_arrays([ys[m][r] for m in range(len(ys))], ensemble.vote)
            for r in range(len(runs))]


def evaluate_ensemble(ensemble: Ensemble, spec: EncoderSpec, runs,
                      mode: str = M.SAMPLE, window: int = 0,
                      counts: list[list[np.ndarray]] | None = None
                      ) -> M.EvalReport:
    ys = ensemble_predictions(ensemble, spec, runs, window, counts)
    labels = [run.labels for run in runs]
    return M.make_report(ys, labels, runs, mode=mode, window=window)


def calibrate_far(ensemble: Ensemble, spec: EncoderSpec, runs,
                  far_target: float, mode: str = M.SAMPLE, window: int = 0,
                  counts: list[list[np.ndarray]] | None = None
                  ) -> CalibrationResult:
    """Greedy coordinate descent on member thresholds until FAR <= target.

    Each iteration re-scores every single-member raise and keeps the one
    with the smallest TPR loss (ties: larger FAR drop, then member
    order).  A member whose threshold reaches its maximum windowed count
    is silent and cannot be raised further; if every member is silent and
    the target is still unmet, the all-max ensemble is returned with
    reached=False.
    """
    M.check_mode(mode)
    bg_hours = M.background_hours(runs)
    if bg_hours <= 0:
        raise ValueError("calibration set has no background time")
    if counts is None:
        counts = member_counts(ensemble, spec, runs)
    windowed = [[M.rolling_sum(z, window) for z in member]
                for member in counts]
    labels = [run.labels for run in runs]
    max_theta = [max((int(w.max()) for w in member if w.size), default=0)
                 for member in windowed]

    def score(thetas):
        ys = _member_ys(windowed, thetas)
        combined = [_combine_arrays([ys[m][r] for m in range(len(ys))],
                                    ensemble.vote)
                    for r in range(len(runs))]
        cm = M.confusion(combined, labels, mode)
        return cm.fp / bg_hours, M.recall(cm)

    thetas = list(ensemble.thetas)
    far, tpr = score(thetas)
    while far > far_target:
        best = None
        for i in range(len(thetas)):
            if thetas[i] >= max_theta[i]:
                continue
            trial = list(thetas)
            trial[i] += 1
            far_i, tpr_i = score(trial)
            key = (tpr - tpr_i, far_i, i)
            if best is None or key < best[0]:
                best = (key, trial, far_i, tpr_i)
        if best is None:
            break
        _, thetas, far, tpr = best

    calibrated = Ensemble(
        members=[replace(m, theta=t)
                 for m, t in zip(ensemble.members, thetas)],
        vote=ensemble.vote)
    return CalibrationResult(ensemble=calibrated, far_per_hour=far,
                             tpr=tpr, reached=far <= far_target)
