"""HARQ/ARQ channel model: detection-failure probabilities as a function of
the retransmission count, and the boundedness test for the closed loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    margin: float
    lambda_prime: float
    rho_sq: float

    def __bool__(self):
        return self.stable


class HarqModel:
    """Detection-failure probability g(r) for r consecutive retransmissions.

    The default parameterization is geometric, g(r) = (1 - lam) * h**r,
    where lam is the success probability of a fresh transmission and
    h in (0, 1] is the combining-gain factor (h = 1 degenerates to plain
    ARQ: retransmissions are no more reliable than new packets). An
    explicit table can be supplied instead for other combining schemes;
    it must satisfy g(0) = 1 - lam, be non-increasing, and keep g(0)
    strictly above g(r) for r > 0 unless it is constant (the ARQ case).
    """

    def __init__(self, lam: float, h: float, r_cap: int = 20):
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"lambda must be in (0, 1], got {lam}")
        if not 0.0 < h <= 1.0:
            raise ValueError(f"h must be in (0, 1], got {h}")
        if r_cap < 1:
            raise ValueError("r_cap must be a positive integer")
        self.lam = float(lam)
        self.h = float(h)
        self.r_cap = int(r_cap)
        g = (1.0 - lam) * self.h ** np.arange(self.r_cap + 1, dtype=float)
        g.flags.writeable = False
        self._g = g

    @classmethod
    def from_table(cls, g_table) -> "HarqModel":
        """Build a model from an explicit failure-probability table g(0..r_cap)."""
        g = np.asarray(g_table, dtype=float)
        if g.ndim != 1 or len(g) < 2:
            raise ValueError("g_table must be a 1-D sequence with at least two entries")
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("g_table entries must lie in [0, 1]")
        if np.any(np.diff(g) > 0.0):
            raise ValueError("g_table must be non-increasing in r")
        lam = 1.0 - float(g[0])
        if lam <= 0.0:
            raise ValueError("g_table[0] must be < 1 (new transmissions must sometimes succeed)")
        if float(g[1:].max()) >= g[0] and not np.all(g == g[0]):
            raise ValueError("retransmissions must not be less reliable than new transmissions")
        model = cls.__new__(cls)
        model.lam = lam
        model.h = None
        model.r_cap = len(g) - 1
        g = g.copy()
        g.flags.writeable = False
        model._g = g
        return model

    def failure_prob(self, r: int) -> float:
        """g(r), the probability that a transmission with count r is not detected."""
        if r < 0 or r > self.r_cap:
            raise ValueError(f"r={r} outside modeled range 0..{self.r_cap}")
        return float(self._g[r])

    def failure_prob_clamped(self, r: int) -> float:
        """g(min(r, r_cap)); retransmission counts beyond r_cap saturate."""
        return float(self._g[min(r, self.r_cap)])

    def g_table(self) -> np.ndarray:
        """Read-only failure-probability table indexed by r = 0..r_cap."""
        return self._g

    def lambda_prime(self) -> float:
        """Effective success floor of retransmissions: 1 - max_{r>0} g(r)."""
        return 1.0 - float(self._g[1:].max())

    def stability_check(self, rho_sq: float) -> StabilityReport:
        """Whether (1 - lambda') * rho^2 < 1, i.e. retransmission reliability
        outruns the process expansion so the long-term MSE stays bounded."""
        if rho_sq <= 0:
            raise ValueError("rho_sq must be positive")
        lp = self.lambda_prime()
        margin = (1.0 - lp) * rho_sq
        return StabilityReport(stable=margin < 1.0, margin=margin, lambda_prime=lp, rho_sq=rho_sq)

    def sample_detection(self, r: int, rng: np.random.Generator) -> bool:
        """One Bernoulli detection draw for a transmission with count r."""
        if r < 0 or r > self.r_cap:
            raise ValueError(f"r={r} outside modeled range 0..{self.r_cap}")
        return bool(rng.random() >= self._g[r])
