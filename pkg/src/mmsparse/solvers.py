"""Per-example sparse coding solvers.

Two coding problems are supported, both over a dictionary D with atoms as
columns:

    l1 (LASSO):   min_y ||x - D y||_2^2 + lam * ||y||_1
    l0 (OMP):     min_y ||x - D y||_2^2   s.t.  ||y||_0 <= s

The quadratic term carries no 1/2 factor, so the coordinate-wise soft
threshold sits at lam / 2 and the KKT conditions read

    active k:    |2 d_k^T (x - D y) - lam * sign(y_k)| <= tol
    inactive k:  |2 d_k^T (x - D y)| <= lam + tol

The LASSO solver is cyclic coordinate descent in fixed ascending coordinate
order; each coordinate update is an exact minimization, so the objective is
non-increasing per update. Columns need not be unit norm (split dictionaries
produced from a joint dictionary are not).
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InputError

__all__ = [
    "Dictionary",
    "SparseCode",
    "SolverConfig",
    "lasso_encode",
    "lasso_encode_batch",
    "lasso_objective",
    "lasso_sweep_trace",
    "omp_encode",
    "kkt_violation",
    "reconstruction_error",
]


def _as_finite_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise InputError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise InputError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class Dictionary:
    """Matrix of basis atoms, one atom per column.

    `modality_dims` marks a joint dictionary whose rows split into an audio
    block followed by a video block. `normalized=False` marks dictionaries
    whose columns are intentionally not unit norm (the split halves of a
    joint dictionary).
    """

    atoms: np.ndarray
    modality_dims: Optional[Tuple[int, int]] = None
    normalized: bool = True

    def __post_init__(self):
        atoms = np.ascontiguousarray(np.asarray(self.atoms, dtype=np.float64))
        if atoms.ndim != 2:
            raise InputError(f"atoms must be 2-D, got shape {atoms.shape}")
        n, k = atoms.shape
        if n < 1 or k < 1:
            raise InputError(f"dictionary must be at least 1x1, got {n}x{k}")
        if not np.all(np.isfinite(atoms)):
            raise InputError("dictionary contains non-finite values")
        if self.normalized:
            norms = np.linalg.norm(atoms, axis=0)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > 1e-9:
                raise InputError(
                    f"normalized dictionary has a column norm off by {worst:.3e}"
                )
        if self.modality_dims is not None:
            na, nv = self.modality_dims
            if na < 1 or nv < 1 or na + nv != n:
                raise InputError(
                    f"modality_dims {self.modality_dims} do not sum to input dim {n}"
                )
            object.__setattr__(self, "modality_dims", (int(na), int(nv)))
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def input_dim(self) -> int:
        return self.atoms.shape[0]

    @property
    def atom_count(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class SparseCode:
    """Coefficient vector plus its explicit support.

    `support` is exactly the sorted list of nonzero coefficient indices.
    `converged` is False when the producing solver stopped abnormally
    (LASSO iteration budget exhausted, OMP rank-deficient selection).
    """

    coeffs: np.ndarray
    support: Tuple[int, ...]
    converged: bool = True

    def __post_init__(self):
        coeffs = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.float64))
        if coeffs.ndim != 1:
            raise InputError(f"coeffs must be 1-D, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("coeffs contain non-finite values")
        actual = tuple(int(i) for i in np.flatnonzero(coeffs))
        if tuple(self.support) != actual:
            raise InputError("support does not match nonzero coefficients")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "support", actual)

    @classmethod
    def from_coeffs(cls, coeffs, converged: bool = True) -> "SparseCode":
        coeffs = np.asarray(coeffs, dtype=np.float64)
        support = tuple(int(i) for i in np.flatnonzero(coeffs))
        return cls(coeffs=coeffs, support=support, converged=converged)

    @property
    def nnz(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class SolverConfig:
    """LASSO solver settings: l1 weight, KKT tolerance, sweep budget."""

    lam: float
    tol: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InputError(f"lam must be >= 0, got {self.lam}")
        if not self.tol > 0:
            raise InputError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise InputError(f"max_iter must be >= 1, got {self.max_iter}")


def _coeffs_of(y) -> np.ndarray:
    if isinstance(y, SparseCode):
        return y.coeffs
    return _as_finite_vector(y, name="y")


def lasso_objective(x, d: Dictionary, y, lam: float) -> float:
    """Value of ||x - D y||^2 + lam * ||y||_1."""
    coeffs = _coeffs_of(y)
    x = _as_finite_vector(x, d.input_dim)
    if coeffs.shape[0] != d.atom_count:
        raise InputError(
            f"code length {coeffs.shape[0]} does not match atom count {d.atom_count}"
        )
    r = x - d.atoms @ coeffs
    return float(r @ r + lam * np.sum(np.abs(coeffs)))


def _kkt_from_corr(corr: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Max KKT violation given corr = 2 D^T (x - D y)."""
    active = y != 0.0
    viol_active = np.abs(corr[active] - lam * np.sign(y[active]))
    viol_inactive = np.abs(corr[~active]) - lam
    worst = 0.0
    if viol_active.size:
        worst = float(np.max(viol_active))
    if viol_inactive.size:
        worst = max(worst, float(np.max(viol_inactive)), 0.0)
    return max(worst, 0.0)


def kkt_violation(x, d: Dictionary, y, lam: float) -> float:
    """Maximum violation of the LASSO optimality conditions; 0 iff optimal."""
    coeffs = _coeffs_of(y)
    x = _as_finite_vector(x, d.input_dim)
    if coeffs.shape[0] != d.atom_count:
        raise InputError(
            f"code length {coeffs.shape[0]} does not match atom count {d.atom_count}"
        )
    corr = 2.0 * (d.atoms.T @ (x - d.atoms @ coeffs))
    return _kkt_from_corr(corr, coeffs, lam)


def reconstruction_error(x, d: Dictionary, y) -> float:
    """Squared Euclidean residual ||x - D y||^2."""
    coeffs = _coeffs_of(y)
    x = _as_finite_vector(x, d.input_dim)
    if coeffs.shape[0] != d.atom_count:
        raise InputError(
            f"code length {coeffs.shape[0]} does not match atom count {d.atom_count}"
        )
    r = x - d.atoms @ coeffs
    return float(r @ r)


def _cd_solve(
    x: np.ndarray,
    atoms: np.ndarray,
    lam: float,
    tol: float,
    max_iter: int,
    trace: Optional[list] = None,
) -> Tuple[np.ndarray, bool]:
    """Cyclic coordinate descent on one example. Returns (coeffs, converged)."""
    n, k = atoms.shape
    sq_norms = np.einsum("nk,nk->k", atoms, atoms)
    half_lam = 0.5 * lam
    y = np.zeros(k)
    r = x.copy()
    for _ in range(max_iter):
        max_delta = 0.0
        for j in range(k):
            g = sq_norms[j]
            if g <= 0.0:
                continue
            col = atoms[:, j]
            rho = col @ r + g * y[j]
            mag = abs(rho) - half_lam
            new = (mag / g if rho > 0 else -mag / g) if mag > 0.0 else 0.0
            delta = new - y[j]
            if delta != 0.0:
                r -= delta * col
                y[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if trace is not None:
            trace.append(float(r @ r + lam * np.sum(np.abs(y))))
        if max_delta < tol:
            corr = 2.0 * (atoms.T @ r)
            if _kkt_from_corr(corr, y, lam) < tol:
                return y, True
    return y, False


def lasso_encode(x, d: Dictionary, cfg: SolverConfig) -> SparseCode:
    """Solve the l1 coding problem for one example.

    Converges when both the largest coordinate change in a sweep and the
    KKT violation fall below cfg.tol; otherwise returns the final iterate
    with converged=False after cfg.max_iter sweeps.
    """
    x = _as_finite_vector(x, d.input_dim)
    y, ok = _cd_solve(x, d.atoms, cfg.lam, cfg.tol, cfg.max_iter)
    return SparseCode.from_coeffs(y, converged=ok)


def lasso_sweep_trace(x, d: Dictionary, cfg: SolverConfig) -> list:
    """Objective value after each coordinate-descent sweep (diagnostic)."""
    x = _as_finite_vector(x, d.input_dim)
    trace: list = []
    _cd_solve(x, d.atoms, cfg.lam, cfg.tol, cfg.max_iter, trace=trace)
    return trace


def lasso_encode_batch(
    xs: np.ndarray, d: Dictionary, cfg: SolverConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Encode many examples (rows of xs) against one dictionary.

    Runs the same cyclic coordinate descent as lasso_encode, vectorized
    across examples; each example is frozen as soon as it individually
    meets the convergence test. Returns (codes, converged) with codes of
    shape (len(xs), atom_count).
    """
    X = np.asarray(xs, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"examples must be 2-D, got shape {X.shape}")
    if X.shape[1] != d.input_dim:
        raise InputError(
            f"examples have dim {X.shape[1]}, dictionary expects {d.input_dim}"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("examples contain non-finite values")

    m = X.shape[0]
    k = d.atom_count
    atoms = d.atoms
    sq_norms = np.einsum("nk,nk->k", atoms, atoms)
    half_lam = 0.5 * cfg.lam

    codes = np.zeros((k, m))
    converged = np.zeros(m, dtype=bool)
    active = np.arange(m)
    Y = np.zeros((k, m))
    R = np.ascontiguousarray(X.T)  # residuals for active examples, (n, active)

    for _ in range(cfg.max_iter):
        if active.size == 0:
            break
        max_delta = np.zeros(active.size)
        for j in range(k):
            g = sq_norms[j]
            if g <= 0.0:
                continue
            col = atoms[:, j]
            rho = col @ R + g * Y[j, active]
            new = np.sign(rho) * np.maximum(np.abs(rho) - half_lam, 0.0) / g
            delta = new - Y[j, active]
            nz = delta != 0.0
            if np.any(nz):
                R -= np.outer(col, delta)
                Y[j, active] = new
                np.maximum(max_delta, np.abs(delta), out=max_delta)
        settled = max_delta < cfg.tol
        if np.any(settled):
            corr = 2.0 * (atoms.T @ R[:, settled])
            ys = Y[:, active[settled]]
            ok = np.zeros(corr.shape[1], dtype=bool)
            for c in range(corr.shape[1]):
                ok[c] = _kkt_from_corr(corr[:, c], ys[:, c], cfg.lam) < cfg.tol
            done_local = np.flatnonzero(settled)[ok]
            if done_local.size:
                converged[active[done_local]] = True
                keep = np.ones(active.size, dtype=bool)
                keep[done_local] = False
                active = active[keep]
                R = np.ascontiguousarray(R[:, keep])
    return Y.T, converged


def omp_encode(x, d: Dictionary, s: int) -> SparseCode:
    """Greedy l0-constrained coding with a full least-squares refit on the
    selected support at every iteration.

    Selection maximizes the normalized residual correlation |d_k^T r|/||d_k||.
    Stops when s atoms are selected, the residual norm drops below 1e-12, or
    a newly selected atom makes the support rank-deficient (that atom is
    dropped and the result is flagged converged=False).
    """
    x = _as_finite_vector(x, d.input_dim)
    s = int(s)
    if s < 0:
        raise InputError(f"sparsity bound must be >= 0, got {s}")
    if s > d.atom_count:
        raise InputError(f"sparsity bound {s} exceeds atom count {d.atom_count}")

    k = d.atom_count
    coeffs = np.zeros(k)
    if s == 0:
        return SparseCode.from_coeffs(coeffs)

    atoms = d.atoms
    norms = np.linalg.norm(atoms, axis=0)
    selectable = norms > 0.0
    inv_norms = np.where(selectable, 1.0 / np.where(selectable, norms, 1.0), 0.0)

    support: list = []
    r = x.copy()
    sol = np.zeros(0)
    flagged = False

    for _ in range(s):
        if np.linalg.norm(r) < 1e-12:
            break
        corr = (atoms.T @ r) * inv_norms
        if support:
            corr[support] = 0.0
        j = int(np.argmax(np.abs(corr)))
        if corr[j] == 0.0:
            break
        trial = support + [j]
        sub = atoms[:, trial]
        gram = sub.T @ sub
        if len(trial) > 1 and float(np.min(np.linalg.eigvalsh(gram))) < 1e-10:
            flagged = True
            break
        rhs = sub.T @ x
        sol = np.linalg.solve(gram + 1e-12 * np.eye(len(trial)), rhs)
        support = trial
        r = x - sub @ sol

    if support:
        coeffs[support] = sol
    return SparseCode.from_coeffs(coeffs, converged=not flagged)
