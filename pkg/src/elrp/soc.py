"""Temperature-dependent DCFC recharge model.

The post-charge SOC is affine in the arrival SOC, ``mu1 * soc_i + mu2``. The
coefficients come from integrating ``d soc / dt = lambda0 + lambda1 * c +
lambda2 * soc`` over a charging session of ``t`` minutes at ambient
temperature ``c``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property

# Frozen default coefficients (calibration version 1). With these, the
# steady-state SOC -(lambda0 + lambda1*c)/lambda2 is exactly 100 % at -10 C and
# grows with temperature, so charging never drains a battery for c >= -10 C.
DEFAULT_LAMBDA0 = 0.68
DEFAULT_LAMBDA1 = 0.018
DEFAULT_LAMBDA2 = -0.005
CALIBRATION_VERSION = 1
DEFAULT_CHARGE_TIME = 80.0


def mu_params(lambda0: float, lambda1: float, lambda2: float, t: float, c: float,
              literal: bool = False) -> tuple[float, float]:
    """Return ``(mu1, mu2)`` of the affine recharge map.

    ``literal=True`` switches to the alternative closed form
    ``mu2 = (lambda0 + lambda1) / lambda2``, which ignores both ``t`` and
    ``c``; it is kept only for comparison.
    """
    if literal:
        if lambda2 == 0:
            raise ValueError("literal form is undefined for lambda2 == 0")
        return math.exp(lambda2 * t), (lambda0 + lambda1) / lambda2
    drift = lambda0 + lambda1 * c
    if lambda2 == 0:
        return 1.0, drift * t
    return math.exp(lambda2 * t), drift * math.expm1(lambda2 * t) / lambda2


def soc_after_charge(soc_i: float, mu1: float, mu2: float) -> float:
    """SOC after a charging stop, clamped to ``[soc_i, 100]``."""
    return min(100.0, max(soc_i, mu1 * soc_i + mu2))


@dataclass(frozen=True)
class ChargingModel:
    lambda0: float
    lambda1: float
    lambda2: float
    charge_time: float
    temperature: float
    literal: bool = False

    @cached_property
    def _mu(self) -> tuple[float, float]:
        return mu_params(self.lambda0, self.lambda1, self.lambda2,
                         self.charge_time, self.temperature, self.literal)

    @property
    def mu1(self) -> float:
        return self._mu[0]

    @property
    def mu2(self) -> float:
        return self._mu[1]

    def soc_after(self, soc_i: float) -> float:
        return soc_after_charge(soc_i, self.mu1, self.mu2)

    def range_after(self, range_km: float, phi: float) -> float:
        """Driving range (km) after charging, given the arrival range."""
        return phi * soc_after_charge(range_km / phi, self.mu1, self.mu2)

    def to_dict(self) -> dict:
        return {
            "kind": "ode",
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "charge_time": self.charge_time,
            "temperature": self.temperature,
            "literal": self.literal,
        }


@dataclass(frozen=True)
class FixedCharge:
    """Recharge map with given coefficients.

    ``FixedCharge(0, soc_full)`` tops every battery up to ``soc_full``, which
    is the recharge behaviour of the base model.
    """

    mu1: float
    mu2: float

    def soc_after(self, soc_i: float) -> float:
        return soc_after_charge(soc_i, self.mu1, self.mu2)

    def range_after(self, range_km: float, phi: float) -> float:
        return phi * soc_after_charge(range_km / phi, self.mu1, self.mu2)

    def to_dict(self) -> dict:
        return {"kind": "fixed", "mu1": self.mu1, "mu2": self.mu2}


def full_recharge(soc_full: float) -> FixedCharge:
    return FixedCharge(0.0, float(soc_full))


def default_calibration(temperature: float, t: float = DEFAULT_CHARGE_TIME) -> ChargingModel:
    return ChargingModel(DEFAULT_LAMBDA0, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2,
                         charge_time=float(t), temperature=float(temperature))


def charging_from_dict(doc: dict):
    kind = doc.get("kind", "ode")
    if kind == "fixed":
        return FixedCharge(float(doc["mu1"]), float(doc["mu2"]))
    if kind != "ode":
        raise ValueError(f"charging.kind: unknown kind {kind!r}")
    return ChargingModel(float(doc["lambda0"]), float(doc["lambda1"]), float(doc["lambda2"]),
                         float(doc["charge_time"]), float(doc["temperature"]),
                         bool(doc.get("literal", False)))


def calibration_hash() -> str:
    payload = json.dumps({
        "version": CALIBRATION_VERSION,
        "lambda": [DEFAULT_LAMBDA0, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2],
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
