"""Feature-level fusion by regularized canonical correlation analysis.

Both descriptor sets are centered, optionally reduced onto an
orthonormal basis when dimensionality exceeds sample count, and the
canonical directions are obtained from the Cholesky-whitened coupled
eigenproblem. Projections of a (coror, gaborhog) pair are concatenated
or summed into the fused vector that templates store.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from . import binio
from .errors import (
    CorruptModelError,
    DimensionMismatchError,
    NumericalFailureError,
    TooFewSamplesError,
)

DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_K = 256
DEFAULT_VARIANCE_KEEP = 0.99
FUSION_MODES = ("concat", "sum")

# Correlations at or below this are noise-level and dropped.
LAMBDA_FLOOR = 1e-8

MODEL_VERSION = 1
_MANDATORY_MATRICES = ("mean_x", "mean_y", "wx", "wy", "lambdas")
_OPTIONAL_MATRICES = ("pca_x", "pca_y")


@dataclass
class DescriptorPairSet:
    """Training pairs as columns: x is p x n, y is q x n."""

    x: np.ndarray
    y: np.ndarray
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ValueError("descriptor sets must be 2-D matrices")
        if self.x.shape[1] != self.y.shape[1]:
            raise DimensionMismatchError(
                f"sample counts differ: {self.x.shape[1]} vs {self.y.shape[1]}"
            )
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("descriptor sets must be finite")

    @property
    def n(self) -> int:
        return self.x.shape[1]


@dataclass
class CcaModel:
    """Fitted projection pair plus the preprocessing that feeds it.

    wx/wy map reduced, centered inputs onto k canonical variates with
    unit within-set variance; lambdas are the canonical correlations in
    decreasing order.
    """

    mean_x: np.ndarray
    mean_y: np.ndarray
    pca_x: np.ndarray | None  # (p, p') orthonormal columns, or None
    pca_y: np.ndarray | None
    wx: np.ndarray  # (p', k)
    wy: np.ndarray  # (q', k)
    lambdas: np.ndarray  # (k,)
    epsilon: float
    fusion_mode: str

    @property
    def p(self) -> int:
        return self.mean_x.shape[0]

    @property
    def q(self) -> int:
        return self.mean_y.shape[0]

    @property
    def k(self) -> int:
        return self.wx.shape[1]

    @property
    def fused_length(self) -> int:
        return 2 * self.k if self.fusion_mode == "concat" else self.k


def _reduce_basis(centered: np.ndarray, n: int, variance_keep: float) -> np.ndarray | None:
    """Orthonormal basis capturing variance_keep of a wide descriptor set.

    Applied only when dimensionality exceeds n - 1, where the sample
    covariance is inevitably singular.
    """
    p = centered.shape[0]
    if p <= n - 1:
        return None
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        raise NumericalFailureError("descriptor set has zero variance")
    rank = min(n - 1, int(np.sum(s > s[0] * max(centered.shape) * np.finfo(float).eps)))
    if rank < 1:
        raise NumericalFailureError("descriptor set has zero variance")
    fraction = np.cumsum(s[:rank] ** 2) / np.sum(s**2)
    keep = int(np.searchsorted(fraction, variance_keep - 1e-12) + 1)
    return np.ascontiguousarray(u[:, : min(keep, rank)])


def _regularize(cov: np.ndarray, epsilon: float) -> np.ndarray:
    dim = cov.shape[0]
    scale = np.trace(cov) / dim
    if scale <= 0.0:
        raise NumericalFailureError("covariance has nonpositive trace")
    return cov + epsilon * scale * np.eye(dim)


def fit_cca(
    pairs: DescriptorPairSet,
    epsilon: float = DEFAULT_EPSILON,
    max_k: int = DEFAULT_MAX_K,
    fusion_mode: str = "concat",
    variance_keep: float = DEFAULT_VARIANCE_KEEP,
) -> CcaModel:
    """Fit canonical projections maximizing cross-set correlation.

    Solves the coupled eigenproblem via the Cholesky factor of the
    regularized Sxx: eigenvectors of Lx^-1 Sxy Syy^-1 Syx Lx^-T give
    wx = Lx^-T u, and wy follows as Syy^-1 Syx wx / lambda. Covariances
    are ridged by epsilon * trace/dim before factorization.
    """
    if fusion_mode not in FUSION_MODES:
        raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    n = pairs.n
    if n < 3:
        raise TooFewSamplesError(f"need at least 3 training pairs, got {n}")

    mean_x = pairs.x.mean(axis=1)
    mean_y = pairs.y.mean(axis=1)
    xc = pairs.x - mean_x[:, None]
    yc = pairs.y - mean_y[:, None]
    pca_x = _reduce_basis(xc, n, variance_keep)
    pca_y = _reduce_basis(yc, n, variance_keep)
    xr = pca_x.T @ xc if pca_x is not None else xc
    yr = pca_y.T @ yc if pca_y is not None else yc

    sxx = _regularize(xr @ xr.T / (n - 1), epsilon)
    syy = _regularize(yr @ yr.T / (n - 1), epsilon)
    sxy = xr @ yr.T / (n - 1)

    try:
        lx = np.linalg.cholesky(sxx)
        syy_fac = cho_factor(syy, lower=True)
        half = solve_triangular(lx, sxy, lower=True)  # Lx^-1 Sxy
        cross = half @ cho_solve(syy_fac, sxy.T)  # Lx^-1 Sxy Syy^-1 Syx
        kmat = solve_triangular(lx, cross.T, lower=True).T  # ... Lx^-T
        kmat = 0.5 * (kmat + kmat.T)
        mu, u = np.linalg.eigh(kmat)
    except LinAlgError as exc:
        raise NumericalFailureError(f"eigensolve failed: {exc}") from exc

    order = np.argsort(mu)[::-1]
    lambdas = np.sqrt(np.clip(mu[order], 0.0, None))
    u = u[:, order]

    k = int(np.sum(lambdas > LAMBDA_FLOOR))
    k = min(k, max_k, xr.shape[0], yr.shape[0])
    if k < 1:
        raise NumericalFailureError("no canonical correlation above the noise floor")
    lambdas = lambdas[:k]
    wx = solve_triangular(lx.T, u[:, :k], lower=False)
    wx /= np.sqrt(np.sum(wx * (sxx @ wx), axis=0))
    wy = cho_solve(syy_fac, sxy.T @ wx) / lambdas
    wy /= np.sqrt(np.sum(wy * (syy @ wy), axis=0))

    # Deterministic orientation: largest-|coefficient| of wx positive,
    # flipping wy with it so cov(x*, y*) stays +lambda.
    for i in range(k):
        pivot = int(np.argmax(np.abs(wx[:, i])))
        if wx[pivot, i] < 0:
            wx[:, i] = -wx[:, i]
            wy[:, i] = -wy[:, i]

    return CcaModel(
        mean_x=mean_x,
        mean_y=mean_y,
        pca_x=pca_x,
        pca_y=pca_y,
        wx=np.ascontiguousarray(wx),
        wy=np.ascontiguousarray(wy),
        lambdas=lambdas,
        epsilon=float(epsilon),
        fusion_mode=fusion_mode,
    )


def _transform(vec: np.ndarray, mean: np.ndarray, pca: np.ndarray | None, w: np.ndarray, side: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64).ravel()
    if vec.shape[0] != mean.shape[0]:
        raise DimensionMismatchError(
            f"{side} descriptor length {vec.shape[0]}, model expects {mean.shape[0]}"
        )
    centered = vec - mean
    reduced = pca.T @ centered if pca is not None else centered
    return w.T @ reduced


def project_fuse(model: CcaModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fuse one (coror, gaborhog) descriptor pair into the match vector:
    concatenated canonical variates (length 2k) or their sum (length k)."""
    xs = _transform(x, model.mean_x, model.pca_x, model.wx, "coror")
    ys = _transform(y, model.mean_y, model.pca_y, model.wy, "gaborhog")
    if model.fusion_mode == "concat":
        return np.concatenate([xs, ys])
    return xs + ys


def _model_matrices(model: CcaModel) -> list[tuple[str, np.ndarray]]:
    entries = [("mean_x", model.mean_x), ("mean_y", model.mean_y)]
    if model.pca_x is not None:
        entries.append(("pca_x", model.pca_x))
    if model.pca_y is not None:
        entries.append(("pca_y", model.pca_y))
    entries.extend([("wx", model.wx), ("wy", model.wy), ("lambdas", model.lambdas)])
    return entries


def model_to_bytes(model: CcaModel) -> bytes:
    matrices = _model_matrices(model)
    header = {
        "version": MODEL_VERSION,
        "p": model.p,
        "q": model.q,
        "k": model.k,
        "epsilon": model.epsilon,
        "fusion_mode": model.fusion_mode,
        "matrices": [[name, list(mat.shape)] for name, mat in matrices],
    }
    buf = io.BytesIO()
    binio.write_header(buf, header)
    for _, mat in matrices:
        buf.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())
    return buf.getvalue()


def save_model(model: CcaModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | Path) -> CcaModel:
    with open(path, "rb") as fh:
        header = binio.read_header(fh, str(path))
        binio.check_version(header, MODEL_VERSION, str(path))
        declared = header.get("matrices")
        if not isinstance(declared, list):
            raise CorruptModelError(f"{path}: missing matrix declarations")
        loaded: dict[str, np.ndarray] = {}
        for entry in declared:
            try:
                name, shape = entry
                shape = tuple(int(s) for s in shape)
            except (TypeError, ValueError) as exc:
                raise CorruptModelError(f"{path}: bad matrix declaration {entry!r}") from exc
            if name not in _MANDATORY_MATRICES + _OPTIONAL_MATRICES or name in loaded:
                raise CorruptModelError(f"{path}: unexpected matrix {name!r}")
            count = int(np.prod(shape)) if shape else 1
            raw = binio.read_exact(fh, 8 * count, str(path))
            loaded[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CorruptModelError(f"{path}: trailing bytes after matrices")
    missing = [name for name in _MANDATORY_MATRICES if name not in loaded]
    if missing:
        raise CorruptModelError(f"{path}: missing matrices {missing}")
    fusion_mode = header.get("fusion_mode")
    if fusion_mode not in FUSION_MODES:
        raise CorruptModelError(f"{path}: bad fusion_mode {fusion_mode!r}")
    model = CcaModel(
        mean_x=loaded["mean_x"],
        mean_y=loaded["mean_y"],
        pca_x=loaded.get("pca_x"),
        pca_y=loaded.get("pca_y"),
        wx=loaded["wx"],
        wy=loaded["wy"],
        lambdas=loaded["lambdas"],
        epsilon=float(header.get("epsilon", 0.0)),
        fusion_mode=fusion_mode,
    )
    declared_k = header.get("k")
    if (
        model.wx.shape[1] != declared_k
        or model.wy.shape[1] != declared_k
        or model.lambdas.shape[0] != declared_k
        or model.p != header.get("p")
        or model.q != header.get("q")
    ):
        raise CorruptModelError(f"{path}: inconsistent header dimensions")
    return model


def model_hash(model: CcaModel) -> str:
    """Content hash binding template databases to the exact model."""
    return hashlib.sha256(model_to_bytes(model)).hexdigest()
