"""Search for auxiliary systems that are easy to build and well behaved.

The design recipe works in the diagonal frame: fix the ladder h0_tilde,
parameterize the coupling operator vtilde by its independent matrix
elements, constrain vtilde so the unwanted expansion orders vanish, and ask
that the physical Hamiltonian obtained by undoing vtilde's diagonalization
lands on an engineerable combination of Pauli products. The search scores
candidates by implementability plus a discounted tail of higher-order
coefficients, with constraints enforced by exact projection where closed
forms exist and by penalty otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .conditions import ConstraintSet, generic_conditions
from .operators import PauliTerm, fix_phases, pauli_matrix
from .perturbation import AuxiliaryConfig, _rs_recursion

PENALTY_WEIGHT = 1e6
SUPPRESSION_DISCOUNT = 0.25
SEARCH_NORM = 2.0


@dataclass(frozen=True)
class DesignProblem:
    """A design target: ladder, constraints, and the allowed physical terms.

    ``engineerable_basis`` lists the Pauli products (label strings such as
    "ZZ" or "IX") allowed in the physical Hamiltonian; for dimensions that
    are not qubit registers, entries may be matrices instead. The identity
    is always allowed implicitly (a constant offset costs nothing).
    ``objective_weights`` = (implementability, higher-order suppression).
    """

    dim: int
    constraints: ConstraintSet
    engineerable_basis: tuple = ()
    h0_tilde: np.ndarray | None = None
    objective_weights: tuple[float, float] = (1.0, 0.1)
    suppression_max_order: int = 6

    def __post_init__(self):
        if self.dim != self.constraints.dim:
            raise ValueError("problem dim and constraint dim disagree")
        if not self.engineerable_basis:
            raise ValueError("engineerable_basis must not be empty")
        object.__setattr__(self, "engineerable_basis", tuple(self.engineerable_basis))
        w1, w2 = self.objective_weights
        if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
            raise ValueError("weights must be nonnegative and not both zero")
        if self.h0_tilde is None:
            object.__setattr__(
                self, "h0_tilde", np.arange(self.dim, dtype=float).astype(complex)
            )
        else:
            h = np.asarray(self.h0_tilde, dtype=complex)
            if h.ndim == 2:
                off = h - np.diag(np.diag(h))
                if np.max(np.abs(off)) > 1e-12:
                    raise ValueError("h0_tilde must be diagonal")
                h = np.diag(h)
            object.__setattr__(self, "h0_tilde", h)
        if self.suppression_max_order <= self.constraints.engineer_order:
            raise ValueError("suppression_max_order must exceed the engineered order")


@dataclass(frozen=True)
class DesignCandidate:
    """One auxiliary design: diagonal-frame coupling plus the physical frame.

    ``u`` diagonalizes vtilde (v_physical = u^dag vtilde u is diagonal) and
    carries the ladder to the physical frame h0_physical = u^dag h0_tilde u,
    which preserves the ladder spectrum exactly. Matrices are stored in the
    reporting gauge where the engineered-order coefficient has magnitude 1.
    """

    vtilde: np.ndarray
    u: np.ndarray
    v_physical: np.ndarray
    h0_physical: np.ndarray
    score: float
    pauli_decomposition: tuple[PauliTerm, ...] = ()
    decomposition_residual: float = 0.0
    couplings: dict[str, float] = field(default_factory=dict)
    expansion: dict[int, np.ndarray] = field(default_factory=dict)
    constraint_residuals: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    start_index: int | None = None
    degenerate: bool = False


# ---------------------------------------------------------------------------
# parameterization: independent matrix elements of a Hermitian operator


def _pair_index(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i + 1, dim)]


def n_parameters(dim: int, zero_diagonal: bool = True) -> int:
    n = dim * (dim - 1)
    return n if zero_diagonal else n + dim


def vtilde_from_params(p: np.ndarray, dim: int, zero_diagonal: bool = True) -> np.ndarray:
    pairs = _pair_index(dim)
    vt = np.zeros((dim, dim), dtype=complex)
    for k, (i, j) in enumerate(pairs):
        vt[i, j] = p[2 * k] + 1j * p[2 * k + 1]
        vt[j, i] = vt[i, j].conjugate()
    if not zero_diagonal:
        vt[np.diag_indices(dim)] = p[2 * len(pairs):]
    return vt


def params_from_vtilde(vt: np.ndarray, zero_diagonal: bool = True) -> np.ndarray:
    dim = vt.shape[0]
    pairs = _pair_index(dim)
    p = np.zeros(n_parameters(dim, zero_diagonal))
    for k, (i, j) in enumerate(pairs):
        p[2 * k] = vt[i, j].real
        p[2 * k + 1] = vt[i, j].imag
    if not zero_diagonal:
        p[2 * len(pairs):] = np.diag(vt).real
    return p


# ---------------------------------------------------------------------------
# closed-form constraint residuals with analytic Jacobians
#
# Parameters are the (re, im) pairs of the upper-triangle elements in pair
# order. For a residual Re[c * conj(z_k)] the gradient block is
# (Re c, Im c); for Re[c * z_k] it is (Re c, -Im c).


def _grad_lin(c: complex) -> np.ndarray:
    return np.array([c.real, -c.imag])


def _grad_conj(c: complex) -> np.ndarray:
    return np.array([c.real, c.imag])


def _zvec(p: np.ndarray, npairs: int) -> list[complex]:
    return [p[2 * k] + 1j * p[2 * k + 1] for k in range(npairs)]


def _rj_qutrit(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # pairs: z1=V01, z2=V02, z3=V12; residual |V12|^2 - |V01|^2
    z1, _, z3 = _zvec(p, 3)
    r = np.array([abs(z3) ** 2 - abs(z1) ** 2])
    jac = np.zeros((1, 6))
    jac[0, 4:6] = 2 * np.array([z3.real, z3.imag])
    jac[0, 0:2] = -2 * np.array([z1.real, z1.imag])
    return r, jac


def _rj_x4(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # pairs: z1=V01, z2=V02, z3=V03, z4=V12, z5=V13, z6=V23 (level-1 target)
    z1, z2, z3, z4, z5, z6 = _zvec(p, 6)
    r2 = abs(z5) ** 2 - 2 * (abs(z1) ** 2 - abs(z4) ** 2)
    r3 = (
        2 * np.conj(z1) * z2 * np.conj(z4)
        + np.conj(z1) * z3 * np.conj(z5)
        - z4 * z6 * np.conj(z5)
    ).real
    jac = np.zeros((2, 12))
    jac[0, 8:10] = 2 * np.array([z5.real, z5.imag])
    jac[0, 0:2] = -4 * np.array([z1.real, z1.imag])
    jac[0, 6:8] = 4 * np.array([z4.real, z4.imag])
    jac[1, 0:2] = _grad_conj(2 * z2 * np.conj(z4) + z3 * np.conj(z5))
    jac[1, 2:4] = _grad_lin(2 * np.conj(z1) * np.conj(z4))
    jac[1, 4:6] = _grad_lin(np.conj(z1) * np.conj(z5))
    jac[1, 6:8] = _grad_conj(2 * np.conj(z1) * z2) + _grad_lin(-z6 * np.conj(z5))
    jac[1, 8:10] = _grad_conj(np.conj(z1) * z3 - z4 * z6)
    jac[1, 10:12] = _grad_lin(-z4 * np.conj(z5))
    return np.array([r2, r3]), jac


_MIRROR_PERM = {0: 5, 1: 4, 2: 2, 3: 3, 4: 1, 5: 0}  # pair k -> mirrored pair


def _mirror_matrix() -> np.ndarray:
    m = np.zeros((12, 12))
    for k, kp in _MIRROR_PERM.items():
        m[2 * kp, 2 * k] = 1.0
        m[2 * kp + 1, 2 * k + 1] = -1.0
    return m


_MIRROR_M = _mirror_matrix()


def _rj_x4_level2(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r, jac = _rj_x4(_MIRROR_M @ p)
    return r, jac @ _MIRROR_M


def _rj_probe(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z1, z2, z3, z4, z5, z6 = _zvec(p, 6)
    r1, j1 = _rj_x4(p)
    r2b = abs(z2) ** 2 - 2 * (abs(z6) ** 2 - abs(z4) ** 2)
    r3b = (
        2 * z6 * np.conj(z5) * z4 + z6 * np.conj(z3) * z2 - np.conj(z4) * np.conj(z1) * z2
    ).real
    jac = np.zeros((4, 12))
    jac[:2] = j1
    jac[2, 2:4] = 2 * np.array([z2.real, z2.imag])
    jac[2, 10:12] = -4 * np.array([z6.real, z6.imag])
    jac[2, 6:8] = 4 * np.array([z4.real, z4.imag])
    jac[3, 10:12] = _grad_lin(2 * np.conj(z5) * z4 + np.conj(z3) * z2)
    jac[3, 8:10] = _grad_conj(2 * z6 * z4)
    jac[3, 6:8] = _grad_lin(2 * z6 * np.conj(z5)) + _grad_conj(-np.conj(z1) * z2)
    jac[3, 4:6] = _grad_conj(z6 * z2)
    jac[3, 2:4] = _grad_lin(z6 * np.conj(z3) - np.conj(z4) * np.conj(z1))
    jac[3, 0:2] = _grad_conj(-np.conj(z4) * z2)
    return np.array([r1[0], r1[1], r2b, r3b]), jac


def closed_form_residuals(cs: ConstraintSet):
    """The projection residual function for a constraint set, if one exists.

    Returns a callable p -> (residuals, jacobian) or None when the set has
    no closed form (the search then falls back to quadratic penalties).
    """
    if not cs.zero_diagonal:
        return None
    needed = {2, 3} if cs.dim == 4 else {2}
    if not needed <= cs.eliminate_orders:
        return None
    if cs.dim == 3 and cs.target_levels == (1,):
        return _rj_qutrit
    if cs.dim == 4 and cs.target_levels == (1,):
        return _rj_x4
    if cs.dim == 4 and cs.target_levels == (2,):
        return _rj_x4_level2
    if cs.dim == 4 and tuple(sorted(cs.target_levels)) == (1, 2):
        return _rj_probe
    return None


def project_constraints(p: np.ndarray, rj, iters: int = 8) -> np.ndarray:
    """Gauss-Newton projection of a parameter vector onto the feasible set."""
    for _ in range(iters):
        r, jac = rj(p)
        if np.max(np.abs(r)) < 1e-12:
            break
        p = p - jac.T @ np.linalg.solve(jac @ jac.T + 1e-12 * np.eye(len(r)), r)
    return p


# ---------------------------------------------------------------------------
# frame change and scoring


def frame_change(vtilde: np.ndarray, h0_tilde: np.ndarray) -> DesignCandidate:
    """Diagonalize vtilde and carry the ladder to the physical frame.

    The eigenvector phase convention (largest component real-positive) makes
    the unitary deterministic; a degenerate vtilde spectrum is flagged and
    resolved by the solver's deterministic ordering.
    """
    vtilde = np.asarray(vtilde, dtype=complex)
    h0d = np.asarray(h0_tilde, dtype=complex)
    if h0d.ndim == 2:
        h0d = np.diag(h0d)
    w, u = np.linalg.eigh(vtilde)
    gap = float(np.min(np.abs(np.diff(w)))) if len(w) > 1 else np.inf
    degenerate = gap < 1e-8 * max(1.0, float(np.linalg.norm(vtilde)))
    if degenerate:
        warnings.warn(
            "degenerate coupling spectrum; eigenvector phases fixed by "
            "deterministic convention only",
            stacklevel=2,
        )
    u = fix_phases(u)
    h0_physical = u.conj().T @ np.diag(h0d) @ u
    dim = vtilde.shape[0]
    nq = int(round(np.log2(dim)))
    terms: tuple[PauliTerm, ...] = ()
    resid = float(np.linalg.norm(h0_physical))
    if 2**nq == dim:
        from .operators import pauli_project

        tlist, resid = pauli_project(h0_physical)
        terms = tuple(tlist)
    return DesignCandidate(
        vtilde=vtilde,
        u=u,
        v_physical=np.diag(w.astype(complex)),
        h0_physical=h0_physical,
        score=float("nan"),
        pauli_decomposition=terms,
        decomposition_residual=resid if 2**nq == dim else float(np.linalg.norm(h0_physical)),
        degenerate=degenerate,
    )


def _basis_stack(problem: DesignProblem) -> tuple[np.ndarray, list[str], bool]:
    """Basis matrices with the identity appended; True if an orthogonal Pauli set."""
    entries = problem.engineerable_basis
    if all(isinstance(b, str) for b in entries):
        mats = [pauli_matrix(b) for b in entries]
        labels = list(entries)
        nq = len(entries[0])
        mats.append(np.eye(2**nq, dtype=complex))
        labels.append("I" * nq)
        return np.stack(mats), labels, True
    mats = [np.asarray(b, dtype=complex) for b in entries]
    labels = [f"B{k}" for k in range(len(mats))]
    mats.append(np.eye(problem.dim, dtype=complex))
    labels.append("I")
    return np.stack(mats), labels, False


def _implementability(h0_physical: np.ndarray, basis: np.ndarray, pauli: bool):
    """Project h0_physical onto the allowed terms; return (coeffs, residual)."""
    if pauli:
        d = h0_physical.shape[0]
        coeffs = np.einsum("kij,ji->k", basis, h0_physical).real / d
        resid = h0_physical - np.einsum("k,kij->ij", coeffs, basis)
        return coeffs, float(np.linalg.norm(resid))
    a = basis.reshape(basis.shape[0], -1).T
    b = h0_physical.reshape(-1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = b - a @ sol
    return sol.real, float(np.linalg.norm(resid))


def _suppression(
    vt: np.ndarray,
    h0d: np.ndarray,
    levels: tuple[int, ...],
    mstar: int,
    mmax: int,
) -> float | None:
    """Discounted tail of coefficients beyond the engineered order.

    Evaluated in the reporting gauge where |E^(mstar)| = 1 for the first
    target level, which removes the overall scale freedom of the coupling.
    Returns None when the engineered coefficient is numerically zero (no
    such gauge exists; the candidate engineers nothing).
    """
    e0 = _rs_recursion(h0d, vt, levels[0], mstar)
    if abs(e0[mstar]) < 1e-14:
        return None
    t = abs(e0[mstar]) ** (-1.0 / mstar)
    vts = vt * t
    total = 0.0
    for n in levels:
        series = _rs_recursion(h0d, vts, n, mmax)
        for m in range(mstar + 1, mmax + 1):
            total += abs(series[m]) * SUPPRESSION_DISCOUNT ** (m - mstar)
    return total


def score(candidate: DesignCandidate, problem: DesignProblem) -> float:
    """Implementability residual + discounted higher orders + penalties."""
    basis, _, pauli = _basis_stack(problem)
    w1, w2 = problem.objective_weights
    _, impl = _implementability(candidate.h0_physical, basis, pauli)
    cs = problem.constraints
    sup = _suppression(
        candidate.vtilde,
        problem.h0_tilde.astype(complex),
        cs.target_levels,
        cs.engineer_order,
        problem.suppression_max_order,
    )
    if sup is None:
        return float(PENALTY_WEIGHT)
    rj = closed_form_residuals(cs)
    if rj is not None:
        r, _ = rj(params_from_vtilde(candidate.vtilde, cs.zero_diagonal))
        penalty = float(r @ r)
    else:
        penalty = 0.0
        for n in cs.target_levels:
            series = _rs_recursion(
                problem.h0_tilde.astype(complex), candidate.vtilde, n,
                max(cs.eliminate_orders),
            )
            for m in cs.eliminate_orders:
                penalty += float(abs(series[m]) ** 2)
    return w1 * impl + w2 * sup + PENALTY_WEIGHT * penalty


# ---------------------------------------------------------------------------
# multi-start local search


def _score_function(problem: DesignProblem, rj):
    """The optimizer objective over the raw parameter vector."""
    basis, _, pauli = _basis_stack(problem)
    cs = problem.constraints
    h0d = problem.h0_tilde.astype(complex)
    w1, w2 = problem.objective_weights
    dim, zd = problem.dim, cs.zero_diagonal
    mstar, mmax = cs.engineer_order, problem.suppression_max_order

    def objective(p: np.ndarray) -> float:
        if rj is not None:
            p = project_constraints(p, rj, iters=6)
        vt = vtilde_from_params(p, dim, zd)
        fnorm = float(np.linalg.norm(vt))
        if fnorm < 1e-9:
            return float(PENALTY_WEIGHT * 1e6)
        vt = vt * (SEARCH_NORM / fnorm)
        if rj is not None:
            r, _ = rj(params_from_vtilde(vt, zd))
            penalty = float(r @ r)
        else:
            penalty = 0.0
            for n in cs.target_levels:
                series = _rs_recursion(h0d, vt, n, max(cs.eliminate_orders))
                for m in cs.eliminate_orders:
                    penalty += float(abs(series[m]) ** 2)
        w, u = np.linalg.eigh(vt)
        u = fix_phases(u)
        h0p = u.conj().T @ np.diag(h0d) @ u
        _, impl = _implementability(h0p, basis, pauli)
        sup = _suppression(vt, h0d, cs.target_levels, mstar, mmax)
        if sup is None:
            return float(PENALTY_WEIGHT * 1e6)
        return w1 * impl + w2 * sup + PENALTY_WEIGHT * penalty

    return objective


def _initial_simplex(p0: np.ndarray, scale: float) -> np.ndarray:
    n = len(p0)
    simplex = np.tile(p0, (n + 1, 1))
    for k in range(n):
        simplex[k + 1, k] += scale * max(0.02, abs(p0[k]) * 0.25)
    return simplex


def _one_start(problem: DesignProblem, objective, rj, seed: int, start: int, budget: int):
    """One deterministic local search: seeded start, chained simplex runs.

    The simplex method stalls long before a generous budget is spent, so it
    is relaunched from the incumbent best with a fresh, progressively
    smaller simplex until the evaluation budget is used up.
    """
    gen = np.random.Generator(
        np.random.Philox(key=np.array([seed, start], dtype=np.uint64))
    )
    nparams = n_parameters(problem.dim, problem.constraints.zero_diagonal)
    p0 = gen.normal(size=nparams)
    if rj is not None:
        p0 = project_constraints(p0, rj)
    vt0 = vtilde_from_params(p0, problem.dim, problem.constraints.zero_diagonal)
    norm0 = float(np.linalg.norm(vt0))
    if norm0 > 1e-9:
        p0 = params_from_vtilde(
            vt0 * (SEARCH_NORM / norm0), problem.constraints.zero_diagonal
        )
    evaluations = 0
    best_p, best_f = p0, objective(p0)
    evaluations += 1
    scale = 1.0
    while evaluations < budget:
        result = minimize(
            objective,
            best_p,
            method="Nelder-Mead",
            options={
                "maxfev": budget - evaluations,
                "xatol": 1e-10,
                "fatol": 1e-13,
                "adaptive": True,
                "initial_simplex": _initial_simplex(best_p, scale),
            },
        )
        evaluations += result.nfev
        if result.fun < best_f:
            best_f, best_p = result.fun, result.x
        scale *= 0.25
    if rj is not None:
        best_p = project_constraints(best_p, rj)
    vt = vtilde_from_params(best_p, problem.dim, problem.constraints.zero_diagonal)
    norm = float(np.linalg.norm(vt))
    if norm < 1e-9:
        return None
    return vt * (SEARCH_NORM / norm)


def _diagonal_labels(dim: int) -> list[str]:
    nq = int(round(np.log2(dim)))
    if 2**nq != dim:
        return []
    labels = [""]
    for _ in range(nq):
        labels = [s + c for s in labels for c in "IZ"]
    return [l for l in labels if l != "I" * nq]


def _finalize(problem: DesignProblem, vt: np.ndarray, seed, start) -> DesignCandidate | None:
    """Build the full reporting-gauge candidate from a search-gauge coupling."""
    cs = problem.constraints
    h0d = problem.h0_tilde.astype(complex)
    e0 = _rs_recursion(h0d, vt, cs.target_levels[0], cs.engineer_order)
    if abs(e0[cs.engineer_order]) < 1e-14:
        return None
    t = float(abs(e0[cs.engineer_order]) ** (-1.0 / cs.engineer_order))
    vts = vt * t
    cand = frame_change(vts, h0d)
    basis, labels, pauli = _basis_stack(problem)
    coeffs, impl = _implementability(cand.h0_physical, basis, pauli)
    if pauli:
        terms = tuple(
            PauliTerm(coefficient=complex(c), factors=tuple(lbl))
            for c, lbl in zip(coeffs, labels)
        )
    else:
        terms = ()
    couplings: dict[str, float] = {}
    for lbl in _diagonal_labels(problem.dim):
        p = pauli_matrix(lbl)
        couplings[lbl] = float(
            (np.trace(p @ cand.v_physical) / problem.dim).real
        )
    expansion = {}
    for n in cs.target_levels:
        expansion[n] = _rs_recursion(
            h0d, vts, n, problem.suppression_max_order
        ).real
    verdict = generic_conditions(
        AuxiliaryConfig(h0=np.diag(h0d), v=vts), cs
    )
    if not verdict.satisfied:
        return None
    value = score(cand, problem)
    return replace(
        cand,
        score=value,
        pauli_decomposition=terms,
        decomposition_residual=impl,
        couplings=couplings,
        expansion=expansion,
        constraint_residuals=dict(verdict.residuals),
        seed=seed,
        start_index=start,
    )


def _canonical_key(cand: DesignCandidate) -> np.ndarray:
    """Gauge-quotient fingerprint: abs coefficients up to qubit relabeling."""
    groups: dict[str, list[float]] = {}
    for term in cand.pauli_decomposition:
        orbit = min(term.label, term.label[::-1])
        groups.setdefault(orbit, []).append(abs(term.coefficient))
    parts = [v for _, vs in sorted(groups.items()) for v in sorted(vs)]
    cp = sorted(abs(v) for v in cand.couplings.values())
    spec = np.sort(np.diag(cand.v_physical).real)
    return np.concatenate([np.asarray(parts), np.asarray(cp), spec])


def deduplicate(
    candidates: list[DesignCandidate], tol: float = 1e-3
) -> list[DesignCandidate]:
    """Merge candidates equal up to gauge; keep the best score of each class."""
    kept: list[tuple[np.ndarray, DesignCandidate]] = []
    for cand in sorted(candidates, key=lambda c: c.score):
        key = _canonical_key(cand)
        is_new = True
        for ref_key, _ in kept:
            if ref_key.shape == key.shape and np.max(np.abs(ref_key - key)) < tol:
                is_new = False
                break
        if is_new:
            kept.append((key, cand))
    return [c for _, c in kept]


def search(
    problem: DesignProblem,
    budget: int,
    seed: int,
    n_starts: int = 20,
    score_threshold: float | None = None,
) -> list[DesignCandidate]:
    """Multi-start constrained search; deterministic in (seed, start index).

    ``budget`` is the evaluation budget per start. Candidates that fail the
    authoritative numeric constraint verification are dropped; survivors are
    deduplicated up to gauge symmetry and ranked by score. An empty list is
    the no-result status, not an error.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rj = closed_form_residuals(problem.constraints)
    objective = _score_function(problem, rj)
    found: list[DesignCandidate] = []
    for start in range(n_starts):
        vt = _one_start(problem, objective, rj, seed, start, budget)
        if vt is None:
            continue
        cand = _finalize(problem, vt, seed, start)
        if cand is None:
            continue
        if score_threshold is not None and cand.score > score_threshold:
            continue
        found.append(cand)
    ranked = deduplicate(found)
    ranked.sort(key=lambda c: (c.score, tuple(_canonical_key(c))))
    return ranked
