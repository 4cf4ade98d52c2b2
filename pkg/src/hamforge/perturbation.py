"""Eigenvalue expansions of weakly coupled auxiliary systems.

The central object is the series E_n(lambda) for an eigenvalue of
H0 + lambda V, computed either by the Rayleigh-Schrodinger recursion
(expand_rs) or by sampling the exact spectrum on a grid of lambda values
and fitting (expand_spectral_fit). The two routes are independent, so they
cross-check each other.

All internal computation uses dimensionless units in which the level
spacing of H0 is of order one; the physical scales delta and mu enter only
through AuxiliaryConfig when series coefficients are assembled into
physical-unit quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchIdentificationError,
    BranchTrackingError,
    DegeneracyError,
    OrderOverflowError,
)
from .operators import DEGENERACY_GUARD

MAX_ORDER = 12


@dataclass(frozen=True)
class AuxiliaryConfig:
    """An auxiliary system with bare Hamiltonian h0 and coupling operator v.

    ``h0`` and ``v`` are dimensionless (energies in units of ``delta``).
    ``delta`` is the level-spacing scale and ``mu`` the physical coupling
    strength, both in s^-1; their ratio ``epsilon`` is the small parameter
    of the expansion. ``h0`` may be non-Hermitian (used for decay analysis),
    ``v`` must be Hermitian.
    """

    h0: np.ndarray
    v: np.ndarray
    delta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
            raise ValueError(f"h0 must be square, got shape {h0.shape}")
        if v.shape != h0.shape:
            raise ValueError(f"v shape {v.shape} does not match h0 {h0.shape}")
        vdev = float(np.max(np.abs(v - v.conj().T)))
        if vdev > 1e-12 * max(1.0, float(np.linalg.norm(v))):
            raise ValueError(f"v is not Hermitian (max deviation {vdev:.3e})")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def epsilon(self) -> float:
        return self.mu / self.delta

    @property
    def hermitian(self) -> bool:
        dev = float(np.max(np.abs(self.h0 - self.h0.conj().T)))
        return dev <= 1e-12 * max(1.0, float(np.linalg.norm(self.h0)))


@dataclass(frozen=True)
class ExpansionSeries:
    """Dimensionless expansion coefficients E^(0)..E^(M) for one level.

    The physical eigenvalue is delta * sum_m E^(m) epsilon^m, so
    coefficients[0] is the bare level in units of delta. ``uncertainty``
    is per-coefficient and only meaningful for fitted series.
    """

    level_index: int
    max_order: int
    coefficients: np.ndarray
    method: str
    uncertainty: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.shape != (self.max_order + 1,):
            raise ValueError(
                f"need {self.max_order + 1} coefficients, got shape {c.shape}"
            )
        object.__setattr__(self, "coefficients", c)
        if self.uncertainty is not None:
            u = np.asarray(self.uncertainty, dtype=float)
            if u.shape != c.shape:
                raise ValueError("uncertainty shape must match coefficients")
            object.__setattr__(self, "uncertainty", u)


@dataclass(frozen=True)
class FitGrid:
    """Sampling grid for expand_spectral_fit.

    kind="circle": complex lambda on a circle of radius
    min(max_radius, 0.15 * gap / ||v||), coefficients from the FFT of the
    tracked eigenvalue around the circle. The accuracy workhorse.

    kind="chebyshev": real lambda at Chebyshev extrema in
    [-l, l], l = min(max_radius, 0.2 * gap / ||v||), parity-split
    least-squares polynomial fit with propagated uncertainties.
    """

    kind: str = "circle"
    n_points: int = 0
    max_radius: float = 0.1

    def __post_init__(self):
        if self.kind not in ("circle", "chebyshev"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n_points == 0:
            object.__setattr__(
                self, "n_points", 64 if self.kind == "circle" else 41
            )
        if self.kind == "chebyshev" and self.n_points % 2 == 0:
            raise ValueError("chebyshev grid needs an odd point count")


def _check_order(max_order: int) -> None:
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    if max_order > MAX_ORDER:
        raise OrderOverflowError(max_order, MAX_ORDER)


def _check_level(evals: np.ndarray, n: int, scale: float) -> None:
    d = len(evals)
    if not 0 <= n < d:
        raise ValueError(f"level index {n} out of range for dimension {d}")
    gaps = np.abs(evals - evals[n])
    gaps[n] = np.inf
    guard = DEGENERACY_GUARD * max(1.0, scale)
    colliding = [int(k) for k in np.where(gaps < guard)[0]]
    if colliding:
        raise DegeneracyError(n, colliding, float(np.min(gaps)))


def _rs_recursion(
    evals: np.ndarray, vt: np.ndarray, n: int, max_order: int
) -> np.ndarray:
    """Rayleigh-Schrodinger recursion in the eigenbasis of h0.

    Intermediate normalization <n|psi> = 1; no vanishing-order assumptions,
    so it is valid for arbitrary coupling operators. Works with complex
    eigenvalues too (non-Hermitian h0), in which case the result is complex.
    """
    d = vt.shape[0]
    psi = np.zeros((max_order + 1, d), dtype=complex)
    psi[0, n] = 1.0
    coeff = np.zeros(max_order + 1, dtype=complex)
    coeff[0] = evals[n]
    denom = evals[n] - evals.astype(complex)
    denom[n] = 1.0  # placeholder; the n-th component is zeroed below
    for m in range(1, max_order + 1):
        w = vt @ psi[m - 1]
        coeff[m] = w[n]
        c = w.copy()
        for j in range(1, m):
            c -= coeff[j] * psi[m - j]
        psi[m] = c / denom
        psi[m, n] = 0.0
    return coeff


def expand_rs(cfg: AuxiliaryConfig, n: int, max_order: int) -> ExpansionSeries:
    """Full Rayleigh-Schrodinger expansion of level n through max_order.

    h0 may be any Hermitian operator; it is diagonalized first. The level
    must be nondegenerate and max_order at most 12.
    """
    _check_order(max_order)
    if not cfg.hermitian:
        raise ValueError("h0 is not Hermitian; use expand_nonhermitian")
    evals, vecs = np.linalg.eigh(cfg.h0)
    scale = float(np.linalg.norm(cfg.h0))
    _check_level(evals, n, scale)
    vt = vecs.conj().T @ cfg.v @ vecs
    coeff = _rs_recursion(evals.astype(complex), vt, n, max_order)
    imag = float(np.max(np.abs(coeff.imag)))
    if imag > 1e-10 * max(1.0, float(np.max(np.abs(coeff)))):
        raise ValueError(f"unexpected imaginary residue {imag:.3e} in RS series")
    return ExpansionSeries(
        level_index=n,
        max_order=max_order,
        coefficients=coeff.real,
        method="rs_recursion",
    )


def expand_nonhermitian(cfg: AuxiliaryConfig, n: int, max_order: int) -> ExpansionSeries:
    """Expansion of a decaying (non-Hermitian h0) system; complex series.

    The branch is identified by maximal overlap with the level-n eigenvector
    of the Hermitian part of h0; an ambiguous identification (two overlaps
    within 0.1) raises BranchIdentificationError.
    """
    _check_order(max_order)
    herm = (cfg.h0 + cfg.h0.conj().T) / 2
    e_ref, u_ref = np.linalg.eigh(herm)
    scale = float(np.linalg.norm(cfg.h0))
    _check_level(e_ref, n, scale)
    ref = u_ref[:, n]

    evals, p = np.linalg.eig(cfg.h0)
    p = p / np.linalg.norm(p, axis=0, keepdims=True)
    overlaps = np.abs(p.conj().T @ ref)
    order = np.argsort(overlaps)[::-1]
    if len(order) > 1 and overlaps[order[0]] - overlaps[order[1]] < 0.1:
        raise BranchIdentificationError(
            float(overlaps[order[0]]), float(overlaps[order[1]])
        )
    k = int(order[0])
    gaps = np.abs(evals - evals[k])
    gaps[k] = np.inf
    guard = DEGENERACY_GUARD * max(1.0, scale)
    colliding = [int(i) for i in np.where(gaps < guard)[0]]
    if colliding:
        raise DegeneracyError(k, colliding, float(np.min(gaps)))
    pinv = np.linalg.inv(p)
    vt = pinv @ cfg.v @ p
    coeff = _rs_recursion(evals, vt, k, max_order)
    return ExpansionSeries(
        level_index=n,
        max_order=max_order,
        coefficients=coeff,
        method="rs_recursion",
    )


def _require_diagonal(cfg: AuxiliaryConfig) -> np.ndarray:
    h0 = cfg.h0
    off = h0 - np.diag(np.diag(h0))
    if float(np.max(np.abs(off))) > 1e-12 * max(1.0, float(np.linalg.norm(h0))):
        raise ValueError("closed-form coefficients require h0 in its diagonal frame")
    evals = np.diag(h0).real
    return evals


def coeff_order2(cfg: AuxiliaryConfig, n: int) -> float:
    """Closed-form second-order coefficient sum_{k != n} |V_kn|^2 / (e_n - e_k).

    Requires the diagonal frame and a nondegenerate level.
    """
    evals = _require_diagonal(cfg)
    _check_level(evals, n, float(np.linalg.norm(cfg.h0)))
    v = cfg.v
    total = 0.0
    for k in range(cfg.dim):
        if k == n:
            continue
        total += abs(v[k, n]) ** 2 / (evals[n] - evals[k])
    return float(total)


def coeff_order3(cfg: AuxiliaryConfig, n: int) -> float:
    """Closed-form third-order coefficient (double sum over intermediate levels).

    Exact when the diagonal of v vanishes; the stated precondition of the
    simplified published form (vanishing second order) is the caller's
    responsibility, as is customary for these order-by-order formulas.
    """
    evals = _require_diagonal(cfg)
    _check_level(evals, n, float(np.linalg.norm(cfg.h0)))
    v = cfg.v
    d = cfg.dim
    total = 0.0
    for k in range(d):
        if k == n:
            continue
        for l in range(d):
            if l == n:
                continue
            total += (
                v[n, k] * v[k, l] * v[l, n]
                / ((evals[n] - evals[k]) * (evals[n] - evals[l]))
            ).real
    corr = 0.0
    for k in range(d):
        if k == n:
            continue
        corr += abs(v[k, n]) ** 2 / (evals[n] - evals[k]) ** 2
    total -= float(v[n, n].real) * corr
    return float(total)


def coeff_order4(cfg: AuxiliaryConfig, n: int) -> float:
    """Closed-form fourth-order coefficient, the two-term expression.

    Triple sum over intermediate levels minus the second-order coefficient
    times the norm correction. Exact when the diagonal of v vanishes.
    """
    evals = _require_diagonal(cfg)
    _check_level(evals, n, float(np.linalg.norm(cfg.h0)))
    v = cfg.v
    d = cfg.dim
    if float(np.max(np.abs(np.diag(v)))) > 1e-12:
        raise ValueError("the fourth-order closed form assumes zero diagonal in v")
    total = 0.0
    for k in range(d):
        if k == n:
            continue
        dk = evals[n] - evals[k]
        for l in range(d):
            if l == n:
                continue
            dl = evals[n] - evals[l]
            for mq in range(d):
                if mq == n:
                    continue
                dm = evals[n] - evals[mq]
                total += (v[n, k] * v[k, l] * v[l, mq] * v[mq, n] / (dk * dl * dm)).real
    e2 = coeff_order2(cfg, n)
    corr = 0.0
    for k in range(d):
        if k == n:
            continue
        corr += abs(v[k, n]) ** 2 / (evals[n] - evals[k]) ** 2
    return float(total - e2 * corr)


def _fit_radius(cfg: AuxiliaryConfig, n: int, grid: FitGrid) -> tuple[float, np.ndarray, np.ndarray]:
    evals, vecs = np.linalg.eigh(cfg.h0)
    scale = float(np.linalg.norm(cfg.h0))
    _check_level(evals, n, scale)
    gaps = np.abs(evals - evals[n])
    gaps[n] = np.inf
    gap = float(np.min(gaps))
    vnorm = float(np.linalg.norm(cfg.v, 2))
    factor = 0.15 if grid.kind == "circle" else 0.2
    if vnorm == 0.0:
        radius = grid.max_radius
    else:
        radius = min(grid.max_radius, factor * gap / vnorm)
    return radius, evals, vecs


def _circle_fit(
    cfg: AuxiliaryConfig, n: int, max_order: int, grid: FitGrid
) -> tuple[np.ndarray, np.ndarray]:
    radius, evals, vecs = _fit_radius(cfg, n, grid)
    npts = grid.n_points
    lams = radius * np.exp(2j * np.pi * np.arange(npts) / npts)
    vals = np.zeros(npts, dtype=complex)
    prev = vecs[:, n].astype(complex)
    for i in range(npts):
        e, p = np.linalg.eig(cfg.h0 + lams[i] * cfg.v)
        p = p / np.linalg.norm(p, axis=0, keepdims=True)
        ov = np.abs(p.conj().T @ prev)
        k = int(np.argmax(ov))
        if ov[k] < 0.5:
            raise BranchTrackingError(float(ov[k]), radius)
        vals[i] = e[k]
        prev = p[:, k]
    # monodromy closure: continuing past the last point must return to the start
    e, p = np.linalg.eig(cfg.h0 + lams[0] * cfg.v)
    p = p / np.linalg.norm(p, axis=0, keepdims=True)
    k = int(np.argmax(np.abs(p.conj().T @ prev)))
    if abs(e[k] - vals[0]) > 1e-8 * max(1.0, abs(vals[0])):
        raise BranchTrackingError(0.0, radius)
    fc = np.fft.fft(vals) / npts
    powers = radius ** np.arange(max_order + 1)
    coeff = fc[: max_order + 1] / powers
    floor = 4 * np.finfo(float).eps * float(np.max(np.abs(vals)))
    unc = np.maximum(np.abs(coeff.imag), floor / powers)
    return coeff.real, unc


def _chebyshev_fit(
    cfg: AuxiliaryConfig, n: int, max_order: int, grid: FitGrid
) -> tuple[np.ndarray, np.ndarray]:
    radius, evals, vecs = _fit_radius(cfg, n, grid)
    npts = grid.n_points
    # Chebyshev extrema, symmetric about zero, including the center point
    lams = radius * np.cos(np.pi * np.arange(npts) / (npts - 1))
    order = np.argsort(lams)
    lams = lams[order]
    center = int(np.argmin(np.abs(lams)))
    vals = np.zeros(npts)

    def track(start_vec: np.ndarray, indices: range) -> None:
        prev = start_vec
        for i in indices:
            e, p = np.linalg.eigh(cfg.h0 + lams[i] * cfg.v)
            ov = np.abs(p.conj().T @ prev)
            k = int(np.argmax(ov))
            if ov[k] < 0.5:
                raise BranchTrackingError(float(ov[k]), radius)
            vals[i] = e[k]
            prev = p[:, k].astype(complex)

    track(vecs[:, n].astype(complex), range(center, npts))
    track(vecs[:, n].astype(complex), range(center, -1, -1))

    # parity-split least-squares fit: even and odd parts are fit separately,
    # which is exact for any branch and keeps the Vandermonde well conditioned
    pos = lams > 1e-15 * radius
    lp = lams[pos]
    vplus = vals[pos]
    vminus = vals[::-1][pos]
    even_target = (vplus + vminus) / 2
    odd_target = (vplus - vminus) / 2
    coeff = np.zeros(max_order + 1)
    unc = np.zeros(max_order + 1)
    for parity, target in ((0, even_target), (1, odd_target)):
        powers = np.arange(parity, max_order + 1, 2)
        a = lp[:, None] ** powers[None, :]
        sol, res, rank, _ = np.linalg.lstsq(a, target, rcond=None)
        dof = max(1, len(lp) - len(powers))
        if len(res):
            var = float(res[0]) / dof
        else:
            var = float(np.sum((a @ sol - target) ** 2)) / dof
        cov = var * np.linalg.inv(a.T @ a)
        coeff[powers] = sol
        unc[powers] = np.sqrt(np.maximum(np.diag(cov), 0.0))
    # the center sample pins the constant term essentially exactly
    coeff[0] = vals[center] if abs(lams[center]) < 1e-15 * radius else coeff[0]
    return coeff, unc


def expand_spectral_fit(
    cfg: AuxiliaryConfig, n: int, max_order: int, grid: FitGrid | None = None
) -> ExpansionSeries:
    """Expansion coefficients from exact spectra on a lambda grid.

    Independent of expand_rs: diagonalizes h0 + lambda v at each grid point,
    tracks the level-n branch by eigenvector-overlap continuity, and reads
    off the series by quadrature (circle grid) or a parity-split polynomial
    fit (chebyshev grid). Returns fit uncertainties per coefficient.
    """
    _check_order(max_order)
    if not cfg.hermitian:
        raise ValueError("spectral fit requires Hermitian h0")
    grid = grid or FitGrid()
    if grid.kind == "circle":
        coeff, unc = _circle_fit(cfg, n, max_order, grid)
    else:
        coeff, unc = _chebyshev_fit(cfg, n, max_order, grid)
    return ExpansionSeries(
        level_index=n,
        max_order=max_order,
        coefficients=coeff,
        method="spectral_fit",
        uncertainty=unc,
    )


@dataclass(frozen=True)
class TwoBranchResult:
    """Joint summary of the expansions of two levels.

    ``pair_blocks[m]`` is the diagonal of the order-m operator in the
    two-level subspace, diag(E_{n1}^(m), E_{n2}^(m)). ``antisymmetric[m]``
    marks orders with E_{n2}^(m) = -E_{n1}^(m); when that holds for every
    order from 1 up, the pair acts as a traceless (Y-form) operator on the
    subspace and ``y_form`` is True.
    """

    first: ExpansionSeries
    second: ExpansionSeries
    pair_blocks: np.ndarray = field(repr=False)
    antisymmetric: np.ndarray = field(repr=False)
    y_form: bool = False


def expand_two_branch(
    cfg: AuxiliaryConfig, n1: int, n2: int, max_order: int
) -> TwoBranchResult:
    """Expand two levels at once and report the operator-form summary."""
    if n1 == n2:
        raise ValueError("the two levels must be distinct")
    s1 = expand_rs(cfg, n1, max_order)
    s2 = expand_rs(cfg, n2, max_order)
    blocks = np.stack([s1.coefficients, s2.coefficients], axis=1)
    scale = np.maximum(1.0, np.max(np.abs(blocks), axis=1))
    anti = np.abs(s1.coefficients + s2.coefficients) <= 1e-8 * scale
    y_form = bool(np.all(anti[1:])) if max_order >= 1 else False
    return TwoBranchResult(
        first=s1,
        second=s2,
        pair_blocks=blocks,
        antisymmetric=anti,
        y_form=y_form,
    )


def physical_coefficient(series: ExpansionSeries, cfg: AuxiliaryConfig, m: int) -> float:
    """The physical-unit coefficient delta * E^(m) * epsilon^m of x^m, in s^-1."""
    if not 0 <= m <= series.max_order:
        raise ValueError(f"order {m} outside the computed range")
    return float(cfg.delta * series.coefficients[m].real * cfg.epsilon**m)
