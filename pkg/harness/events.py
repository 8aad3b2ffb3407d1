"""
Per-run counters for saturation, clamping and monitor events
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)


@dataclass
class RunEvents:
    saturations: Counter = field(default_factory=Counter)
    state_clamps: Counter = field(default_factory=Counter)
    estimate_clamps: Counter = field(default_factory=Counter)
    violations: Counter = field(default_factory=Counter)

    def state_clamp(self, signal: str, raw: float) -> None:
        self.state_clamps[signal] += 1

    @property
    def total(self) -> int:
        return sum(
            sum(c.values())
            for c in (self.saturations, self.state_clamps, self.estimate_clamps, self.violations)
        )

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {
            "saturations": dict(sorted(self.saturations.items())),
            "state_clamps": dict(sorted(self.state_clamps.items())),
            "estimate_clamps": dict(sorted(self.estimate_clamps.items())),
            "violations": dict(sorted(self.violations.items())),
        }

    def log_summary(self, label: str, n_steps: int) -> None:
        logger.info("%s: %d steps simulated", label, n_steps)
        if self.total:
            logger.warning(
                "%s: %d saturations, %d state clamps, %d estimate clamps, %d monitor violations",
                label,
                sum(self.saturations.values()),
                sum(self.state_clamps.values()),
                sum(self.estimate_clamps.values()),
                sum(self.violations.values()),
            )
