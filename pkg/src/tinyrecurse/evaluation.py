"""Metrics and inference-time protocols.

Evaluation always runs the full supervision budget (halting is a training
device), decodes after the final step, and reports exact-match over
unpadded positions. For augmentation-voting tasks the per-augmentation
predictions are mapped back through their inverse transforms and the most
frequent grids become the answer attempts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tape
from .data.arc import Augmentation
from .data.grids import TaskSpec, decode as decode_grid
from .data.io import Record
from .model import ParamStore, decode
from .recursion import CallCounters, RecursionSchedule, init_state, run_schedule


@dataclass
class EvalReport:
    exact_match: float
    per_cell_accuracy: float
    mean_sup_steps: float
    n_samples: int
    per_task: dict = field(default_factory=dict)
    vote_agreement: float | None = None
    attempts_score: float | None = None

    def to_json(self) -> str:
        obj = {
            "exact_match": self.exact_match,
            "per_cell_accuracy": self.per_cell_accuracy,
            "mean_sup_steps": self.mean_sup_steps,
            "n_samples": self.n_samples,
            "per_task": self.per_task,
            "vote_agreement": self.vote_agreement,
            "attempts_score": self.attempts_score,
        }
        return json.dumps(obj, indent=2, sort_keys=True)


def exact_match(pred: np.ndarray, target: np.ndarray, pad_mask: np.ndarray | None = None) -> float:
    """Fraction of samples whose unpadded positions all match.

    pad_mask [B,L] bool, True where the position counts; None = everywhere.
    """
    eq = pred == target
    if pad_mask is not None:
        eq = eq | ~pad_mask
    return float(np.all(eq, axis=1).mean())


def per_cell_accuracy(pred: np.ndarray, target: np.ndarray, pad_mask: np.ndarray | None = None) -> float:
    eq = pred == target
    if pad_mask is None:
        return float(eq.mean())
    total = int(pad_mask.sum())
    return float(eq[pad_mask].sum() / total) if total else 0.0


def _grid_key(grid: np.ndarray) -> tuple:
    g = np.asarray(grid)
    return (g.shape[0], g.shape[1]) + tuple(int(v) for v in g.reshape(-1))


def vote_tally(grids: list[np.ndarray]) -> list[tuple[np.ndarray, int]]:
    """Grids with counts, most frequent first; ties by lexicographically
    smallest token encoding (shape-prefixed row-major tokens)."""
    if not grids:
        raise ValueError("majority vote over an empty candidate list")
    buckets: dict[tuple, list] = {}
    for g in grids:
        key = _grid_key(g)
        if key in buckets:
            buckets[key][1] += 1
        else:
            buckets[key] = [np.asarray(g), 1]
    ranked = sorted(buckets.items(), key=lambda kv: (-kv[1][1], kv[0]))
    return [(g, n) for _, (g, n) in ranked]


def majority_vote(grids: list[np.ndarray]) -> np.ndarray:
    """Most frequent grid among the candidates."""
    return vote_tally(grids)[0][0]


def vote_agreement(grids: list[np.ndarray]) -> float:
    tally = vote_tally(grids)
    return tally[0][1] / len(grids)


def arc_score(tasks: list[tuple[np.ndarray, np.ndarray]], predictor, attempts: int = 2) -> float:
    """Two-attempt accuracy: a test input scores when any of its first
    ``attempts`` distinct ranked candidates equals the target."""
    if not tasks:
        return 0.0
    hits = 0
    for test_input, target in tasks:
        seen = set()
        distinct = []
        for cand in predictor(test_input):
            key = _grid_key(cand)
            if key in seen:
                continue  # duplicate collapses; next ranked takes its slot
            seen.add(key)
            distinct.append(cand)
            if len(distinct) == attempts:
                break
        if any(np.array_equal(c, target) for c in distinct):
            hits += 1
    return hits / len(tasks)


def predict_tokens(
    store: ParamStore,
    x: np.ndarray,
    puzzle_id: np.ndarray,
    sched: RecursionSchedule,
    n_sup: int | None = None,
    batch_size: int = 256,
) -> tuple[np.ndarray, CallCounters]:
    """Decoded predictions after the full supervision budget, no halting."""
    steps = sched.n_sup if n_sup is None else n_sup
    counters = CallCounters()
    preds = np.empty_like(x)
    with tape.no_grad():
        for lo in range(0, len(x), batch_size):
            hi = min(lo + batch_size, len(x))
            xe = store.embed_inputs(x[lo:hi], puzzle_id[lo:hi])
            state = init_state(store, sched, hi - lo)
            logits = None
            for _ in range(steps):
                state, logits, _ = run_schedule(xe, state, sched, store, counters)
            preds[lo:hi] = decode(logits)
    return preds, counters


def eval_run(
    store: ParamStore,
    data: tuple[np.ndarray, np.ndarray, np.ndarray],
    sched: RecursionSchedule,
    n_sup: int | None = None,
    batch_size: int = 256,
    task: str = "",
) -> EvalReport:
    """Exact-match evaluation over a tokenized split."""
    x, y, pid = data
    steps = sched.n_sup if n_sup is None else n_sup
    preds, _ = predict_tokens(store, x, pid, sched, steps, batch_size)
    em = exact_match(preds, y)
    report = EvalReport(
        exact_match=em,
        per_cell_accuracy=per_cell_accuracy(preds, y),
        mean_sup_steps=float(steps),
        n_samples=len(x),
        per_task={task or "all": em},
    )
    return report


def eval_arc_voting(
    store: ParamStore,
    records: list[Record],
    spec: TaskSpec,
    sched: RecursionSchedule,
    n_sup: int | None = None,
    batch_size: int = 256,
    attempts: int = 2,
) -> EvalReport:
    """Augmentation-vote evaluation for grouped color-grid tasks.

    Predictions from every augmentation of a (base task, test pair) are
    inverse-mapped to canonical orientation and tallied; the top
    ``attempts`` distinct grids are the answer attempts.
    """
    x = np.stack([r.input for r in records])
    pid = np.array([r.puzzle_id for r in records], dtype=np.int64)
    preds, _ = predict_tokens(store, x, pid, sched, n_sup, batch_size)

    groups: dict[tuple, list[int]] = {}
    for i, rec in enumerate(records):
        groups.setdefault((rec.base_id, rec.pair), []).append(i)

    hits = 0
    agreements = []
    exact_single = 0
    cells_ok = 0
    cells_total = 0
    for (base_id, pair), idxs in sorted(groups.items()):
        candidates = []
        target_canonical = None
        for i in idxs:
            rec = records[i]
            aug = Augmentation.from_json(rec.aug) if rec.aug else None
            grid = decode_grid(preds[i], spec)
            truth = decode_grid(rec.target, spec)
            if aug is not None:
                grid = aug.invert(grid) if grid.size else grid
                truth = aug.invert(truth)
            candidates.append(grid)
            target_canonical = truth
            exact_single += int(np.array_equal(grid, truth))
            cells_ok += int(np.sum(preds[i] == records[i].target))
            cells_total += preds[i].size
        tally = vote_tally(candidates)
        agreements.append(tally[0][1] / len(candidates))
        top = [g for g, _ in tally[:attempts]]
        hits += int(any(np.array_equal(g, target_canonical) for g in top))

    n_groups = len(groups)
    steps = sched.n_sup if n_sup is None else n_sup
    return EvalReport(
        exact_match=exact_single / max(1, len(records)),
        per_cell_accuracy=cells_ok / max(1, cells_total),
        mean_sup_steps=float(steps),
        n_samples=len(records),
        per_task={"arc": hits / max(1, n_groups)},
        vote_agreement=float(np.mean(agreements)) if agreements else None,
        attempts_score=hits / max(1, n_groups),
    )
