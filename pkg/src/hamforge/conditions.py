"""Order-elimination constraints on coupling operators.

A constraint set names the expansion orders that must vanish for chosen
levels of a uniformly spaced auxiliary ladder. For the two workhorse
families (three-level single-target and four-level single- or two-target)
the constraints have cheap closed forms used inside optimizer loops; the
generic numeric residuals computed from the full expansion are the
authoritative check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintShapeError
from .perturbation import AuxiliaryConfig, expand_rs

CLOSED_FORM_THRESHOLD = 1e-8
ELIMINATED_THRESHOLD = 1e-6
SMALL_NONZERO_THRESHOLD = 1e-3


@dataclass(frozen=True)
class ConstraintSet:
    """Which orders to eliminate, which to engineer, for which levels."""

    dim: int
    target_levels: tuple[int, ...]
    engineer_order: int
    eliminate_orders: frozenset[int]
    zero_diagonal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "target_levels", tuple(self.target_levels))
        object.__setattr__(self, "eliminate_orders", frozenset(self.eliminate_orders))
        if self.engineer_order in self.eliminate_orders:
            raise ValueError("engineer_order cannot also be eliminated")
        if len(set(self.target_levels)) != len(self.target_levels):
            raise ValueError("target levels must be distinct")
        for n in self.target_levels:
            if not 0 <= n < self.dim:
                raise ValueError(f"target level {n} out of range for dim {self.dim}")


@dataclass(frozen=True)
class ConstraintResidual:
    """Named residual values plus the pass/fail verdict under a threshold.

    ``satisfied`` is True exactly when every residual magnitude is below
    ``threshold``. ``notes`` carries derived quantities (engineered-order
    magnitudes, per-order classifications) that are informational only.
    """

    residuals: dict[str, float]
    satisfied: bool
    threshold: float = CLOSED_FORM_THRESHOLD
    notes: dict[str, object] = field(default_factory=dict)


def _verdict(residuals: dict[str, float], threshold: float, notes: dict | None = None):
    ok = all(abs(v) < threshold for v in residuals.values())
    return ConstraintResidual(
        residuals=residuals, satisfied=ok, threshold=threshold, notes=notes or {}
    )


def _check_zero_diagonal(vtilde: np.ndarray, zero_diagonal: bool) -> None:
    if zero_diagonal and float(np.max(np.abs(np.diag(vtilde)))) > 1e-12:
        raise ConstraintShapeError(
            "coupling operator has nonzero diagonal elements, but the "
            "constraint set requires a zero diagonal"
        )


def qutrit_conditions(
    vtilde: np.ndarray, zero_diagonal: bool = True
) -> ConstraintResidual:
    """Second-order elimination for a three-level ladder, target level 1.

    Residual r = |V12|^2 - |V01|^2. Also reports the engineered third-order
    cycle magnitude 2 |Re[V01 V12 V20]|, which is the payload term.
    """
    vtilde = np.asarray(vtilde, dtype=complex)
    if vtilde.shape != (3, 3):
        raise ValueError("qutrit conditions need a 3x3 operator")
    _check_zero_diagonal(vtilde, zero_diagonal)
    r = abs(vtilde[1, 2]) ** 2 - abs(vtilde[0, 1]) ** 2
    cycle = 2 * (vtilde[0, 1] * vtilde[1, 2] * vtilde[2, 0]).real
    return _verdict(
        {"r2": float(r)},
        CLOSED_FORM_THRESHOLD,
        notes={"engineered_order3_magnitude": abs(float(cycle))},
    )


def _mirror(vtilde: np.ndarray) -> np.ndarray:
    """Reverse the level indexing n -> d-1-n."""
    return vtilde[::-1, ::-1].copy()


def _x4_residuals(v: np.ndarray) -> tuple[float, float]:
    r2 = abs(v[1, 3]) ** 2 - 2 * (abs(v[0, 1]) ** 2 - abs(v[1, 2]) ** 2)
    r3 = (
        2 * v[1, 0] * v[0, 2] * v[2, 1]
        + v[1, 0] * v[0, 3] * v[3, 1]
        - v[1, 2] * v[2, 3] * v[3, 1]
    ).real
    return float(r2), float(r3)


def twoqubit_x4_conditions(
    vtilde: np.ndarray, level: int = 1, zero_diagonal: bool = True
) -> ConstraintResidual:
    """Second- and third-order elimination for a four-level ladder.

    For target level 1 the residuals are
        r2 = |V13|^2 - 2 (|V01|^2 - |V12|^2)
        r3 = Re[2 V10 V02 V21 + V10 V03 V31 - V12 V23 V31]
    and for target level 2 the same conditions applied to the
    index-reversed operator (the ladder is symmetric under n -> 3-n).
    """
    vtilde = np.asarray(vtilde, dtype=complex)
    if vtilde.shape != (4, 4):
        raise ValueError("four-level conditions need a 4x4 operator")
    if level not in (1, 2):
        raise ValueError("target level must be 1 or 2")
    _check_zero_diagonal(vtilde, zero_diagonal)
    v = vtilde if level == 1 else _mirror(vtilde)
    r2, r3 = _x4_residuals(v)
    return _verdict({"r2": r2, "r3": r3}, CLOSED_FORM_THRESHOLD)


def generic_conditions(cfg: AuxiliaryConfig, cs: ConstraintSet) -> ConstraintResidual:
    """Numeric elimination residuals from the full expansion.

    The residual for (level, order) is the computed coefficient E_n^(m).
    Orders below 1e-6 count as eliminated; residual coefficients up to 1e-3
    are classified "small_nonzero" (the scale of rounded published inputs)
    and still satisfy the set; anything larger violates it.
    """
    if cfg.dim != cs.dim:
        raise ValueError(f"config dim {cfg.dim} does not match constraint dim {cs.dim}")
    if cs.zero_diagonal:
        evals, vecs = np.linalg.eigh(cfg.h0)
        vt = vecs.conj().T @ cfg.v @ vecs
        _check_zero_diagonal(vt, True)
    max_needed = max(cs.eliminate_orders | {cs.engineer_order})
    residuals: dict[str, float] = {}
    classes: dict[str, str] = {}
    engineered: dict[str, float] = {}
    for n in cs.target_levels:
        series = expand_rs(cfg, n, max_needed)
        for m in sorted(cs.eliminate_orders):
            value = float(series.coefficients[m].real)
            key = f"E{m}[level{n}]"
            residuals[key] = value
            if abs(value) < ELIMINATED_THRESHOLD:
                classes[key] = "eliminated"
            elif abs(value) < SMALL_NONZERO_THRESHOLD:
                classes[key] = "small_nonzero"
            else:
                classes[key] = "violated"
        engineered[f"E{cs.engineer_order}[level{n}]"] = float(
            series.coefficients[cs.engineer_order].real
        )
    ok = all(c != "violated" for c in classes.values())
    return ConstraintResidual(
        residuals=residuals,
        satisfied=ok,
        threshold=SMALL_NONZERO_THRESHOLD,
        notes={"classification": classes, "engineered": engineered},
    )
