"""Three-valued verdicts with machine-checkable certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class Relation(str, Enum):
    SD = "SD"
    MPIR = "MPIR"
    BL = "BL"
    MU_BL = "muBL"
    MMPIR = "MMPIR"
    MU_MMPIR = "muMMPIR"
    STRONG_DISPERSIVE = "strong-dispersive"
    MU_COMONOTONE = "mu-comonotone"
    C_COMONOTONE = "c-comonotone"
    # attitude tests on functionals
    CONCAVE = "concave"
    PESSIMISTIC = "pessimistic"
    MMPIR_AVERSE = "mmpir-averse"
    MU_MMPIR_AVERSE = "mu-mmpir-averse"
    RISK_AVERSE = "risk-averse"
    WEAK_RISK_AVERSE = "weak-risk-averse"
    MORE_RISK_AVERSE = "more-risk-averse"
    MPIR_AVERSE = "mpir-averse"
    PARETO = "pareto"


class Holds(str, Enum):
    TRUE = "true"
    FALSE = "false"
    UNDETERMINED = "undetermined"

    @classmethod
    def of(cls, flag: bool) -> "Holds":
        return cls.TRUE if flag else cls.FALSE


@dataclass
class OrderVerdict:
    relation: Relation
    holds: Holds
    certificate: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds is Holds.TRUE

    @property
    def undetermined(self) -> bool:
        return self.holds is Holds.UNDETERMINED

    def to_dict(self) -> dict:
        return {
            "relation": self.relation.value,
            "holds": self.holds.value,
            "certificate": to_jsonable(self.certificate),
            "tolerances": to_jsonable(self.tolerances),
        }


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values and library objects into JSON-ready data."""
    if hasattr(obj, "to_dict") and not isinstance(obj, dict):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return None
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj
