"""Optimizer settings and the CLI form of the step size."""

import json
from dataclasses import asdict, dataclass, replace

from django.conf import settings

from core.exceptions import InvalidInput

AUTO = 'auto'
FIXED = 'fixed'
POLICIES = (AUTO, FIXED)


def parse_eta(text):
    """'auto' -> ('auto', None); 'fixed:1.0' -> ('fixed', 1.0)."""
    text = str(text).strip().lower()
    if text == AUTO:
        return AUTO, None
    policy, _, value = text.partition(':')
    if policy != FIXED or not value:
        raise InvalidInput(f"eta must be 'auto' or 'fixed:VALUE', got {text!r}")
    try:
        eta = float(value)
    except ValueError as e:
        raise InvalidInput(f"eta value {value!r} is not a number") from e
    if not eta > 0 or eta == float('inf'):
        raise InvalidInput(f"eta must be a positive finite number, got {value}")
    return FIXED, eta


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Gradient-descent settings for receiver-side refinement.

    With ``eta_policy='auto'`` the step is ``auto_safety * 2 / L_J**2``, L_J being
    the power-iteration estimate over ``lipschitz_probes`` random latents, shared
    by every run against the same generator; ``eta`` is then ignored.
    """

    steps: int = 100
    eta: float = 1.0
    eta_policy: str = AUTO
    auto_safety: float = 0.9
    grad_tol: float = 0.0
    record_trace: bool = True
    lipschitz_probes: int = 4
    lipschitz_iters: int = 2000
    lipschitz_seed: int = 0

    def __post_init__(self):
        if isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 0:
            raise InvalidInput(f"steps must be a non-negative integer, got {self.steps!r}")
        if not self.eta > 0:
            raise InvalidInput(f"eta must be positive, got {self.eta!r}")
        if self.eta_policy not in POLICIES:
            raise InvalidInput(f"eta policy must be one of {POLICIES}, got {self.eta_policy!r}")
        if not 0 < self.auto_safety < 1:
            raise InvalidInput(f"auto_safety must lie in (0, 1), got {self.auto_safety!r}")
        if self.grad_tol < 0:
            raise InvalidInput("grad_tol must be >= 0")
        if self.lipschitz_probes < 1 or self.lipschitz_iters < 10:
            raise InvalidInput("auto step size needs lipschitz_probes >= 1 and lipschitz_iters >= 10")

    @classmethod
    def from_settings(cls, steps=None, eta=None, **overrides):
        stego = settings.STEGO
        policy, value = parse_eta(eta if eta is not None else stego['ETA'])
        fields = {
            'steps': int(stego['OPTIMIZER_STEPS'] if steps is None else steps),
            'eta_policy': policy,
            'auto_safety': stego['AUTO_SAFETY'],
            'lipschitz_probes': stego['LIPSCHITZ_PROBES'],
            'lipschitz_iters': stego['LIPSCHITZ_ITERS'],
        }
        if value is not None:
            fields['eta'] = value
        fields.update(overrides)
        return cls(**fields)

    @property
    def eta_label(self):
        return AUTO if self.eta_policy == AUTO else f"{FIXED}:{self.eta!r}"

    def with_steps(self, steps):
        return replace(self, steps=steps)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)
