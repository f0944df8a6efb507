# utmost/trace.py
"""Bounded per-iteration history of a solver run, with pandas export."""
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iter", "objective", "primal_residual", "dual_residual"]


@dataclass
class TraceRecord:
    """One outer ADMM iteration."""
    iteration: int
    objective: float
    primal_residual: float
    dual_residual: float


class ConvergenceTrace:
    """Per-iteration objective and residual history of a solver run."""

    def __init__(self, max_size: Optional[int] = None):
        self.max_size = max_size
        self.records: List[TraceRecord] = []
        self.metrics = {
            'best_objective': float('inf'),
            'best_iteration': 0,
            'infinite_objectives': 0,
        }

    def add(self, iteration: int, objective: float, primal_residual: float, dual_residual: float) -> None:
        record = TraceRecord(iteration, float(objective), float(primal_residual), float(dual_residual))
        if self.max_size is not None and len(self.records) >= self.max_size:
            self.records.pop(0)
        self.records.append(record)
        self._update_metrics(record)

    def _update_metrics(self, record: TraceRecord) -> None:
        if not np.isfinite(record.objective):
            self.metrics['infinite_objectives'] += 1
        elif record.objective < self.metrics['best_objective']:
            self.metrics['best_objective'] = record.objective
            self.metrics['best_iteration'] = record.iteration

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    @property
    def last(self) -> Optional[TraceRecord]:
        return self.records[-1] if self.records else None

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def residuals(self) -> Dict[str, np.ndarray]:
        return {
            'primal': np.array([r.primal_residual for r in self.records]),
            'dual': np.array([r.dual_residual for r in self.records]),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.iteration, r.objective, r.primal_residual, r.dual_residual) for r in self.records],
            columns=TRACE_COLUMNS,
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ConvergenceTrace":
        trace = cls()
        for row in frame[TRACE_COLUMNS].itertuples(index=False):
            trace.add(int(row[0]), row[1], row[2], row[3])
        return trace


def is_non_increasing(values: Sequence[float], slack: float = 1e-12) -> bool:
    """True when each value exceeds its predecessor by at most slack * max(1, |prev|)."""
    values = list(values)
    for prev, cur in zip(values, values[1:]):
        if cur > prev + slack * max(1.0, abs(prev)):
            return False
    return True
