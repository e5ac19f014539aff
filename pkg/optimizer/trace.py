"""Per-step optimization records and their verification against the step identity and bound."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from core.exceptions import InvalidInput

TRACE_COLUMNS = (
    'step', 'loss', 'grad_norm', 'step_norm', 'bound_value', 'bound_ok', 'recon_norm', 'z_norm',
)
IDENTITY_RTOL = 1e-9
BOUND_ATOL = 1e-9
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss: float
    grad_norm: float
    step_norm: float
    bound_value: float
    bound_ok: bool
    recon_norm: float
    z_norm: float
    next_z_norm: float

    def row(self):
        return [
            self.step, f"{self.loss:.17g}", f"{self.grad_norm:.17g}", f"{self.step_norm:.17g}",
            f"{self.bound_value:.17g}", int(self.bound_ok), f"{self.recon_norm:.17g}",
            f"{self.z_norm:.17g}",
        ]


@dataclass
class OptimizationTrace:
    """``lipschitz`` is the L_J the per-step bound flag was computed with."""

    eta: float
    lipschitz: float
    policy: str
    records: list = field(default_factory=list)
    loss_increases: int = 0
    initial_recon: float = None
    final_recon: float = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record):
        self.records.append(record)

    @property
    def bound_violations(self):
        return sum(1 for r in self.records if not r.bound_ok)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path):
        path = Path(path)
        with path.open('w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(TRACE_COLUMNS)
            for record in self.records:
                writer.writerow(record.row())
        return path


@dataclass(frozen=True)
class BoundReport:
    steps: int
    eta: float
    lipschitz: float
    identity_residuals: tuple
    identity_tolerances: tuple
    bound_slacks: tuple

    @property
    def identity_violations(self):
        return sum(r > t for r, t in zip(self.identity_residuals, self.identity_tolerances))

    @property
    def bound_violations(self):
        return sum(s < -BOUND_ATOL for s in self.bound_slacks)

    @property
    def max_identity_residual(self):
        return max(self.identity_residuals)

    @property
    def min_bound_slack(self):
        return min(self.bound_slacks)

    @property
    def ok(self):
        return self.identity_violations == 0 and self.bound_violations == 0


def identity_tolerance(record):
    # the subtraction z - eta*g is only exact to a few ulps of the larger iterate
    return IDENTITY_RTOL * record.step_norm + 4 * _EPS * max(record.z_norm, record.next_z_norm)


def verify_trace(trace, L_J, eta):
    """
    Check every step of ``trace`` for ||dZ|| = eta * ||grad L|| and for
    ||dZ|| <= eta * L_J * ||D(Z) - X'||.
    """
    if not len(trace):
        raise InvalidInput("cannot verify an empty trace")
    residuals, tolerances, slacks = [], [], []
    for record in trace:
        residuals.append(abs(record.step_norm - eta * record.grad_norm))
        tolerances.append(identity_tolerance(record))
        slacks.append(eta * L_J * record.recon_norm - record.step_norm)
    return BoundReport(
        steps=len(trace),
        eta=float(eta),
        lipschitz=float(L_J),
        identity_residuals=tuple(residuals),
        identity_tolerances=tuple(tolerances),
        bound_slacks=tuple(slacks),
    )
