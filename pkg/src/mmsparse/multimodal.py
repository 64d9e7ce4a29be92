"""Joint audio-video sparse coding and cross-modal encoding.

Joint coding concatenates the two modalities with per-modality scaling,

    x_av = [ x_a / sqrt(N_a) ; x_v / sqrt(N_v) ],

and learns one dictionary over the fused vectors. The fused dictionary
decomposes back into per-modality blocks

    D_av = [ D_av_a / sqrt(N_a) ; D_av_v / sqrt(N_v) ],

so each block (times its sqrt(N) factor) supports single-modality coding
against the jointly learned atoms. For any shared code y the fused
objective splits exactly:

    ||x_av - D_av y||^2 + lam' ||y||_1
        = (1/N_a) (||x_a - D_av_a y||^2 + lam'' ||y||_1)
        + (1/N_v) (||x_v - D_av_v y||^2 + lam'' ||y||_1)

provided lam' = (1/N_a + 1/N_v) lam''. The split blocks are deliberately
left un-normalized; renormalizing would break this identity.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .dictlearn import LearnConfig, TrainStats, learn_dictionary
from .errors import InputError
from .solvers import Dictionary, SolverConfig, SparseCode, lasso_encode

__all__ = [
    "ModalityPair",
    "JointDictionary",
    "fuse_input",
    "fuse_rows",
    "learn_joint",
    "split_joint",
    "encode_cross_modal",
    "lambda_joint_of",
    "union_features",
]


@dataclass(frozen=True)
class ModalityPair:
    """Input dimensionalities of the audio and video modalities."""

    audio_dim: int
    video_dim: int

    def __post_init__(self):
        if self.audio_dim < 1 or self.video_dim < 1:
            raise InputError(
                f"modality dims must be >= 1, got ({self.audio_dim}, {self.video_dim})"
            )


@dataclass(frozen=True)
class JointDictionary:
    """A dictionary learned on fused inputs, remembering the l1 weight it
    was trained with."""

    inner: Dictionary
    lambda_joint: float

    def __post_init__(self):
        if self.inner.modality_dims is None:
            raise InputError("joint dictionary requires modality_dims")
        if self.lambda_joint < 0:
            raise InputError(f"lambda_joint must be >= 0, got {self.lambda_joint}")

    @property
    def dims(self) -> ModalityPair:
        na, nv = self.inner.modality_dims
        return ModalityPair(na, nv)


def _finite_vector(x, name) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InputError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


def fuse_input(x_a, x_v) -> np.ndarray:
    """Concatenate one audio and one video vector with 1/sqrt(N) scaling."""
    a = _finite_vector(x_a, "x_a")
    v = _finite_vector(x_v, "x_v")
    return np.concatenate([a / math.sqrt(a.size), v / math.sqrt(v.size)])


def fuse_rows(audio: np.ndarray, video: np.ndarray) -> np.ndarray:
    """Row-wise fuse_input for matching feature matrices."""
    A = np.asarray(audio, dtype=np.float64)
    V = np.asarray(video, dtype=np.float64)
    if A.ndim != 2 or V.ndim != 2 or A.shape[0] != V.shape[0]:
        raise InputError(
            f"audio and video matrices must share row counts, got {A.shape} and {V.shape}"
        )
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(V))):
        raise InputError("fused inputs contain non-finite values")
    return np.hstack([A / math.sqrt(A.shape[1]), V / math.sqrt(V.shape[1])])


def learn_joint(pairs, cfg: LearnConfig) -> Tuple[JointDictionary, TrainStats]:
    """Learn a joint dictionary from (x_a, x_v) pairs by fusing each pair
    and delegating to the standard alternating learner. cfg.lam is the
    fused-space l1 weight."""
    pairs = list(pairs)
    if not pairs:
        raise InputError("learn_joint requires at least one (x_a, x_v) pair")
    a0 = _finite_vector(pairs[0][0], "x_a")
    v0 = _finite_vector(pairs[0][1], "x_v")
    audio = np.empty((len(pairs), a0.size))
    video = np.empty((len(pairs), v0.size))
    for i, (xa, xv) in enumerate(pairs):
        xa = _finite_vector(xa, "x_a")
        xv = _finite_vector(xv, "x_v")
        if xa.size != a0.size or xv.size != v0.size:
            raise InputError(
                f"pair {i} has dims ({xa.size}, {xv.size}), expected "
                f"({a0.size}, {v0.size})"
            )
        audio[i] = xa
        video[i] = xv
    fused = fuse_rows(audio, video)
    d, stats = learn_dictionary(fused, cfg)
    joint = Dictionary(d.atoms, modality_dims=(a0.size, v0.size))
    return JointDictionary(inner=joint, lambda_joint=cfg.lam), stats


def split_joint(jd: JointDictionary) -> Tuple[Dictionary, Dictionary]:
    """Decompose a joint dictionary into its audio and video blocks.

    The blocks are scaled by sqrt(N_a), sqrt(N_v) so that re-fusing them
    reproduces the joint matrix; their columns are not unit norm and the
    returned dictionaries are flagged accordingly.
    """
    na, nv = jd.inner.modality_dims
    atoms = jd.inner.atoms
    audio = Dictionary(atoms[:na, :] * math.sqrt(na), normalized=False)
    video = Dictionary(atoms[na:, :] * math.sqrt(nv), normalized=False)
    return audio, video


def encode_cross_modal(
    x,
    d_split: Dictionary,
    lambda2: float,
    tol: float = 1e-8,
    max_iter: int = 1000,
) -> SparseCode:
    """Code a single-modality vector against its block of a joint
    dictionary with the per-modality l1 weight lambda2."""
    if lambda2 < 0:
        raise InputError(f"lambda2 must be >= 0, got {lambda2}")
    return lasso_encode(x, d_split, SolverConfig(lam=lambda2, tol=tol, max_iter=max_iter))


def lambda_joint_of(lambda2: float, dims: ModalityPair) -> float:
    """Fused-space l1 weight matching a per-modality weight lambda2:
    lam' = (1/N_a + 1/N_v) * lam''."""
    if lambda2 < 0:
        raise InputError(f"lambda2 must be >= 0, got {lambda2}")
    return (1.0 / dims.audio_dim + 1.0 / dims.video_dim) * lambda2


def union_features(y_a, y_v) -> np.ndarray:
    """Concatenate two per-modality feature vectors, audio first."""
    a = np.asarray(y_a, dtype=np.float64)
    v = np.asarray(y_v, dtype=np.float64)
    if a.ndim != 1 or v.ndim != 1:
        raise InputError("union_features expects 1-D vectors")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))):
        raise InputError("union inputs contain non-finite values")
    return np.concatenate([a, v])
