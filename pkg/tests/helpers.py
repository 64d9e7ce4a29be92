"""Shared test utilities: small random problem builders and reference
implementations kept deliberately independent of the library code paths."""

import numpy as np

from mmsparse.solvers import Dictionary


def unit_column_dictionary(rng, n, k, modality_dims=None) -> Dictionary:
    """Random dictionary with iid Gaussian columns normalized to unit norm."""
    atoms = rng.standard_normal((n, k))
    atoms /= np.linalg.norm(atoms, axis=0, keepdims=True)
    return Dictionary(atoms, modality_dims=modality_dims)


def mutual_coherence(atoms: np.ndarray) -> float:
    cols = atoms / np.linalg.norm(atoms, axis=0, keepdims=True)
    gram = np.abs(cols.T @ cols)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def low_coherence_dictionary(rng, n, k, max_coherence=0.5, tries=20000) -> Dictionary:
    """Near-orthogonal dictionary by construction: columns are accepted one
    at a time only if their correlation with every accepted column stays
    below the coherence bound."""
    cols = []
    for _ in range(tries):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        if all(abs(v @ u) <= max_coherence for u in cols):
            cols.append(v)
            if len(cols) == k:
                return Dictionary(np.stack(cols, axis=1))
    raise AssertionError(
        f"could not draw a {n}x{k} dictionary with coherence <= {max_coherence}"
    )


def lasso_objective_ref(x, atoms, y, lam) -> float:
    """Objective ||x - D y||^2 + lam ||y||_1 by direct evaluation."""
    r = x - atoms @ y
    return float(r @ r + lam * np.sum(np.abs(y)))


def proximal_gradient_lasso(x, atoms, lam, max_iter=1_000_000, stop_delta=1e-14):
    """Independent LASSO oracle: proximal gradient descent (ISTA).

    Gradient step on the smooth part ||x - D y||^2 (gradient 2 D^T (D y - x),
    Lipschitz constant 2 lmax(D^T D)) followed by the prox of step*lam*||.||_1,
    i.e. a soft threshold at step * lam. Runs a fixed-step iteration budget
    with early exit once iterates stop moving.
    """
    gram = atoms.T @ atoms
    lip = 2.0 * float(np.linalg.eigvalsh(gram).max())
    step = 1.0 / lip
    thresh = step * lam
    dtx = atoms.T @ x
    y = np.zeros(atoms.shape[1])
    for _ in range(max_iter):
        grad = 2.0 * (gram @ y - dtx)
        v = y - step * grad
        y_next = np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)
        if np.max(np.abs(y_next - y)) < stop_delta:
            y = y_next
            break
        y = y_next
    return y
