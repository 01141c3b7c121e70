"""Hessian approximations of the training loss at the MAP point and their truncated spectra.

Complexities (N samples, D cores of size I x R, E ALS sweeps) for reference:

============  ================  ===================  ================
variant       stored            peak memory          assembly cost
============  ================  ===================  ================
MAP (ALS)     DIR               (N + D) IR           E N D I^2 R^2
LastCore      I^2 R^2           N IR                 N I^2 R^2
Diag          DIR               (N + D) IR           N D I R
Block         D I^2 R^2         N IR + D I^2 R^2     N D I^2 R^2
GGN / Full    (DIR)^2           N IR + (DIR)^2       N (DIR)^2
============  ================  ===================  ================

Only GGN and Full ever build a ``DIR x DIR`` matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .cpd import CpdModel, FeatureSet, design_matrices, model_response, projections
from .errors import ConfigError, NumericalError, TooLarge

DENSE_HESSIAN_CAP = 5000


class HessianVariant(str, enum.Enum):
    FULL = "full"
    GGN = "ggn"
    BLOCK = "block"
    DIAG = "diag"
    LAST = "last"

    @classmethod
    def parse(cls, value) -> "HessianVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"lastcore": "last", "last_core": "last", "block_diagonal": "block", "diagonal": "diag"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(
                f"unknown Hessian variant {value!r}; choose from {[v.value for v in cls]}"
            ) from None


@dataclass
class HessianMatrix:
    """Curvature at v*.

    ``blocks`` holds one dense matrix (Full/GGN/LastCore), D dense matrices
    (Block) or a single vector of diagonal entries (Diag). ``offset`` is the
    index of the first parameter covered, ``dim`` the number covered.
    """

    variant: HessianVariant
    blocks: list[np.ndarray]
    beta: float
    gamma: float
    offset: int
    dim: int

    def dense(self) -> np.ndarray:
        """Materialise the covered part as one matrix (tests and small problems only)."""
        if self.variant is HessianVariant.DIAG:
            return np.diag(self.blocks[0])
        return linalg.block_diag(*self.blocks)


def _check_dense_cap(n, cap):
    if n > cap:
        raise TooLarge(f"dense Hessian would be {n} x {n} (cap {cap})")


def full_hessian(model: CpdModel, fs: FeatureSet, y, beta, gamma, cap=DENSE_HESSIAN_CAP) -> HessianMatrix:
    """Exact Hessian of the regularised loss, assembled block by block.

    Diagonal blocks are ``beta A_k^T A_k + gamma I``. The block for cores
    ``k != m`` has entries
    ``beta * sum_n Phi_k[n,i] T_n Phi_m[n,j]`` with
    ``T_n = Z_k[n,r] Z_m[n,p] + [r == p] (f - y)[n] Z_km[n,r]`` where ``Z_km``
    is the Hadamard product of all projections except ``k`` and ``m``.
    """
    D, I, R = model.D, model.I, model.R
    n = model.n_params
    _check_dense_cap(n, cap)
    y = np.asarray(y, dtype=float)
    P = projections(model, fs)
    As = design_matrices(model, fs)
    resid = model_response(model, fs) - y
    size = I * R
    H = np.zeros((n, n))
    eye_r = np.eye(R)
    for k in range(D):
        sk = model.core_slice(k)
        H[sk, sk] = beta * As[k].T @ As[k] + gamma * np.eye(size)
        for m in range(k + 1, D):
            sm = model.core_slice(m)
            Zkm = np.ones((fs.N, R))
            for d in range(D):
                if d != k and d != m:
                    Zkm = Zkm * P[d]
            # Z_k = Z_km * P_m and Z_m = Z_km * P_k
            Zk = Zkm * P[m]
            Zm = Zkm * P[k]
            gauss = np.einsum("ni,nr,np,nj->ripj", fs.phi[k], Zk, Zm, fs.phi[m], optimize=True)
            curv = np.einsum("n,nr,ni,nj->rij", resid, Zkm, fs.phi[k], fs.phi[m], optimize=True)
            block = gauss + np.einsum("rp,rij->ripj", eye_r, curv)
            block = beta * block.reshape(size, size)
            H[sk, sm] = block
            H[sm, sk] = block.T
    H = 0.5 * (H + H.T)
    return HessianMatrix(HessianVariant.FULL, [H], float(beta), float(gamma), 0, n)


def ggn_hessian(model: CpdModel, fs: FeatureSet, y, beta, gamma, cap=DENSE_HESSIAN_CAP) -> HessianMatrix:
    n = model.n_params
    _check_dense_cap(n, cap)
    A = np.hstack(design_matrices(model, fs))
    H = beta * A.T @ A
    H[np.diag_indices_from(H)] += gamma
    H = 0.5 * (H + H.T)
    return HessianMatrix(HessianVariant.GGN, [H], float(beta), float(gamma), 0, n)


def structured_hessian(model: CpdModel, fs: FeatureSet, y, beta, gamma, variant, cap=DENSE_HESSIAN_CAP) -> HessianMatrix:
    variant = HessianVariant.parse(variant)
    size = model.I * model.R
    As = design_matrices(model, fs)
    if variant is HessianVariant.DIAG:
        diag = np.concatenate([beta * np.einsum("nj,nj->j", A, A) + gamma for A in As])
        return HessianMatrix(variant, [diag], float(beta), float(gamma), 0, model.n_params)

    _check_dense_cap(size, cap)

    def block(A):
        G = beta * A.T @ A
        G[np.diag_indices_from(G)] += gamma
        return G

    if variant is HessianVariant.BLOCK:
        return HessianMatrix(variant, [block(A) for A in As], float(beta), float(gamma), 0, model.n_params)
    if variant is HessianVariant.LAST:
        # cores 0..D-2 are point masses at v*; only the last core is covered
        return HessianMatrix(variant, [block(As[-1])], float(beta), float(gamma), (model.D - 1) * size, size)
    raise ValueError(f"{variant.value} is not a structured variant")


def compute_hessian(model, fs, y, beta, gamma, variant, cap=DENSE_HESSIAN_CAP) -> HessianMatrix:
    variant = HessianVariant.parse(variant)
    if variant is HessianVariant.FULL:
        return full_hessian(model, fs, y, beta, gamma, cap)
    if variant is HessianVariant.GGN:
        return ggn_hessian(model, fs, y, beta, gamma, cap)
    return structured_hessian(model, fs, y, beta, gamma, variant, cap)


@dataclass
class TruncatedEig:
    """Retained eigenpairs of one symmetric block.

    Either ``vectors`` (dim x R_hat, orthonormal columns) or ``axes`` (indices
    of retained coordinates, for a diagonal Hessian) is set. ``offset`` places
    the block inside the full parameter vector.
    """

    values: np.ndarray
    t_hat: float
    dim: int
    offset: int = 0
    vectors: np.ndarray | None = None
    axes: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return int(self.values.size)

    def _local(self, g):
        return np.asarray(g)[..., self.offset:self.offset + self.dim]

    def project(self, g) -> np.ndarray:
        """Coordinates of ``g`` (full-length, last axis) along the retained eigenvectors."""
        gl = self._local(g)
        if self.axes is not None:
            return gl[..., self.axes]
        return gl @ self.vectors

    def quad_inverse(self, g) -> np.ndarray:
        """``sum_j (u_j^T g)^2 / lambda_j``; zero when nothing is retained."""
        if self.rank == 0:
            return np.zeros(np.shape(g)[:-1])
        c = self.project(g)
        return np.sum(c * c / self.values, axis=-1)

    def perturb(self, eps: np.ndarray, n_params: int) -> np.ndarray:
        """Map standard-normal coefficients (S x R_hat) to parameter offsets (S x n_params)."""
        S = eps.shape[0]
        out = np.zeros((S, n_params))
        if self.rank == 0:
            return out
        scaled = eps / np.sqrt(self.values)
        if self.axes is not None:
            out[:, self.offset + self.axes] = scaled
        else:
            out[:, self.offset:self.offset + self.dim] = scaled @ self.vectors.T
        return out

    def reconstruct(self) -> np.ndarray:
        if self.axes is not None:
            d = np.zeros(self.dim)
            d[self.axes] = self.values
            return np.diag(d)
        return (self.vectors * self.values) @ self.vectors.T


def eigh_desc(M: np.ndarray):
    try:
        w, U = linalg.eigh(M, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigendecomposition failed: {exc}") from exc
    return w[::-1], U[:, ::-1]


def truncated_eig(M: np.ndarray, t_hat: float, offset: int = 0) -> TruncatedEig:
    """Keep eigenpairs with eigenvalue >= ``t_hat`` (ties kept), in descending order."""
    if not np.isfinite(t_hat):
        raise ValueError("t_hat must be finite")
    M = np.asarray(M, dtype=float)
    w, U = eigh_desc(M)
    keep = w >= t_hat
    return TruncatedEig(w[keep].copy(), float(t_hat), M.shape[0], offset, vectors=U[:, keep].copy())


def truncated_diag(diag: np.ndarray, t_hat: float, offset: int = 0) -> TruncatedEig:
    if not np.isfinite(t_hat):
        raise ValueError("t_hat must be finite")
    order = np.argsort(-diag, kind="stable")
    axes = order[diag[order] >= t_hat]
    return TruncatedEig(diag[axes].copy(), float(t_hat), diag.size, offset, axes=axes)


def truncate(H: HessianMatrix, t_hat: float) -> list[TruncatedEig]:
    """Truncated spectra of every block of ``H``; one factor per independent block."""
    if H.variant is HessianVariant.FULL and not t_hat > 0:
        # the exact Hessian may be indefinite; a positive cut discards the negative directions
        raise ConfigError("the Full Hessian needs a positive truncation threshold")
    if H.variant is HessianVariant.DIAG:
        return [truncated_diag(H.blocks[0], t_hat, H.offset)]
    factors = []
    off = H.offset
    for B in H.blocks:
        factors.append(truncated_eig(B, t_hat, off))
        off += B.shape[0]
    return factors


def max_eigenvalue(H: HessianMatrix) -> float:
    if H.variant is HessianVariant.DIAG:
        return float(H.blocks[0].max())
    return float(max(linalg.eigvalsh(B)[-1] for B in H.blocks))
