"""Generalized Gell-Mann measurements and compressive state reconstruction.

The measurement basis is the trace-orthonormal Hermitian basis of dimension
d^2: the scaled identity I/sqrt(d), symmetric pairs (E_jk + E_kj)/sqrt(2),
antisymmetric pairs -i(E_jk - E_kj)/sqrt(2), and d-1 scaled diagonal
matrices.  tr(tau_i tau_j) = delta_ij, so Bloch coefficients are the
expectation values themselves and every measurement hyperplane has a unit
normal.

Reconstruction alternates an eigenvalue-threshold step (keep the spectrum
above epsilon_0, renormalize the trace) with hyperplane projections onto
the measured constraints, starting from the maximally mixed guess, until
consecutive iterates agree in Frobenius norm.

Flat index layout for dimension d (P = d(d-1)/2 pairs, j < k row-major):

    0                  identity / sqrt(d)
    1        .. P      symmetric pair elements
    P + 1    .. 2P     antisymmetric pair elements
    2P + 1   .. d^2-1  diagonal elements l = 1 .. d-1
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    AllBelowThreshold,
    DimensionMismatch,
    InvalidCount,
    NotConverged,
)

__all__ = [
    "GGMBasis",
    "MeasurementRecord",
    "ReconstructionConfig",
    "sample_measurement_set",
    "measure_state",
    "threshold_step",
    "project_measurements",
    "reconstruct",
    "SVTReconstructor",
    "save_records_csv",
    "load_records_csv",
]

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, slots=True)
class MeasurementRecord:
    """One sampled expectation value: basis index and real result."""

    index: int
    alpha: float


class GGMBasis:
    """Trace-orthonormal generalized Gell-Mann basis of dimension ``d``.

    Elements are generated on demand (`element`); expectation values and
    hyperplane projections exploit the sparsity of the basis instead of
    materializing d^2 dense matrices, which is what keeps dimension-630
    reconstructions tractable.
    """

    def __init__(self, d: int):
        if d < 2:
            raise ValueError(f"basis dimension must be >= 2, got {d}")
        self.d = int(d)
        self.n_pairs = d * (d - 1) // 2
        self.size = d * d
        # row offsets for unranking pair index r -> (j, k), j < k
        self._offsets = np.array(
            [j * d - j * (j + 1) // 2 for j in range(d)], dtype=np.int64
        )
        # diagonal element l has entries c_l (first l slots), -l * c_l at slot l
        self._diag_coeff = 1.0 / np.sqrt(
            np.arange(1, d, dtype=np.float64) * np.arange(2, d + 1, dtype=np.float64)
        )

    def _unrank_pairs(self, ranks):
        ranks = np.asarray(ranks, dtype=np.int64)
        j = np.searchsorted(self._offsets, ranks, side="right") - 1
        k = ranks - self._offsets[j] + j + 1
        return j, k

    def classify(self, indices):
        """Split flat indices into (identity mask, sym jk, antisym jk, diag l)."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.size):
            raise IndexError("basis index out of range")
        p = self.n_pairs
        ident = indices == 0
        sym = (indices >= 1) & (indices <= p)
        anti = (indices > p) & (indices <= 2 * p)
        diag = indices > 2 * p
        sj, sk = self._unrank_pairs(indices[sym] - 1)
        aj, ak = self._unrank_pairs(indices[anti] - 1 - p)
        dl = indices[diag] - 2 * p
        return ident, (sym, sj, sk), (anti, aj, ak), (diag, dl)

    def element(self, i: int) -> np.ndarray:
        """Dense matrix for one flat index (small-d and test use)."""
        d = self.d
        out = np.zeros((d, d), dtype=np.complex128)
        p = self.n_pairs
        if i == 0:
            np.fill_diagonal(out, 1.0 / np.sqrt(d))
        elif i <= p:
            j, k = self._unrank_pairs(i - 1)
            out[j, k] = out[k, j] = 1.0 / _SQRT2
        elif i <= 2 * p:
            j, k = self._unrank_pairs(i - 1 - p)
            out[j, k] = -1j / _SQRT2
            out[k, j] = 1j / _SQRT2
        else:
            l = int(i - 2 * p)
            c = self._diag_coeff[l - 1]
            out[np.arange(l), np.arange(l)] = c
            out[l, l] = -l * c
        return out

    def matrices(self):
        """Iterate over all d^2 elements in flat order."""
        for i in range(self.size):
            yield self.element(i)

    def expectations_state(self, psi, indices):
        """<psi| tau_i |psi> for each index; exactly real by construction."""
        psi = np.asarray(psi, dtype=np.complex128)
        if psi.shape != (self.d,):
            raise DimensionMismatch(
                f"state dimension {psi.shape} does not match basis d={self.d}"
            )
        ident, (sym, sj, sk), (anti, aj, ak), (diag, dl) = self.classify(indices)
        out = np.empty(np.asarray(indices).shape, dtype=np.float64)
        probs = np.abs(psi) ** 2
        out[ident] = probs.sum() / np.sqrt(self.d)
        cross = np.conj(psi[sj]) * psi[sk]
        out[sym] = _SQRT2 * cross.real
        cross = np.conj(psi[aj]) * psi[ak]
        out[anti] = _SQRT2 * cross.imag
        head = np.concatenate(([0.0], np.cumsum(probs)))
        out[diag] = self._diag_coeff[dl - 1] * (head[dl] - dl * probs[dl])
        return out

    def expectations_rho(self, rho, indices):
        """tr(tau_i rho) for a Hermitian matrix, each index."""
        rho = np.asarray(rho, dtype=np.complex128)
        if rho.shape != (self.d, self.d):
            raise DimensionMismatch(
                f"matrix shape {rho.shape} does not match basis d={self.d}"
            )
        ident, (sym, sj, sk), (anti, aj, ak), (diag, dl) = self.classify(indices)
        out = np.empty(np.asarray(indices).shape, dtype=np.float64)
        diag_rho = np.real(np.diag(rho))
        out[ident] = diag_rho.sum() / np.sqrt(self.d)
        out[sym] = _SQRT2 * rho[sj, sk].real
        out[anti] = -_SQRT2 * rho[aj, ak].imag
        head = np.concatenate(([0.0], np.cumsum(diag_rho)))
        out[diag] = self._diag_coeff[dl - 1] * (head[dl] - dl * diag_rho[dl])
        return out

    def project(self, rho, indices, alphas):
        """Kaczmarz sweep over the hyperplanes tr(tau_i rho) = alpha_i.

        The normals are trace-orthonormal, so one update leaves every other
        visited constraint's residual unchanged; the sequential sweep in
        record order therefore equals this single batch update exactly, and
        all visited constraints hold on return.
        """
        rho = np.array(rho, dtype=np.complex128)
        alphas = np.asarray(alphas, dtype=np.float64)
        indices = np.asarray(indices, dtype=np.int64)
        if np.unique(indices).size != indices.size:
            raise ValueError("measurement indices must be distinct")
        ident, (sym, sj, sk), (anti, aj, ak), (diag, dl) = self.classify(indices)

        current = _SQRT2 * rho[sj, sk].real
        delta = (alphas[sym] - current) / _SQRT2
        rho[sj, sk] += delta
        rho[sk, sj] += delta

        current = -_SQRT2 * rho[aj, ak].imag
        delta = (alphas[anti] - current) / _SQRT2
        rho[aj, ak] += -1j * delta
        rho[ak, aj] += 1j * delta

        diag_rho = np.real(np.diag(rho)).copy()
        head = np.concatenate(([0.0], np.cumsum(diag_rho)))
        shift = np.zeros(self.d)
        if ident.any():
            target = alphas[ident][0]
            shift += (target - diag_rho.sum() / np.sqrt(self.d)) / np.sqrt(self.d)
        if diag.any():
            coeff = self._diag_coeff[dl - 1]
            c = coeff * (alphas[diag] - coeff * (head[dl] - dl * diag_rho[dl]))
            spread = np.zeros(self.d)
            spread[dl] = c
            # tau_l adds c to every slot below l and subtracts l*c at slot l
            shift += np.concatenate((np.cumsum(spread[::-1])[::-1][1:], [0.0]))
            shift[dl] -= dl * c
        rho[np.arange(self.d), np.arange(self.d)] += shift
        return rho


def sample_measurement_set(d, m, rng):
    """Draw ``m`` distinct basis indices; the identity is always included."""
    size = d * d
    if not 1 <= m <= size:
        raise InvalidCount(f"m must be in [1, {size}], got {m}")
    rest = rng.choice(size - 1, size=m - 1, replace=False) + 1
    return np.concatenate(([0], np.sort(rest)))


def measure_state(state, basis, indices, noise_sigma=0.0, rng=None):
    """Exact expectation values of the state, optionally with Gaussian noise."""
    alphas = basis.expectations_state(state, indices)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        alphas = alphas + noise_sigma * rng.standard_normal(alphas.shape)
    return [MeasurementRecord(int(i), float(a)) for i, a in zip(indices, alphas)]


def records_to_arrays(records):
    indices = np.array([r.index for r in records], dtype=np.int64)
    alphas = np.array([r.alpha for r in records], dtype=np.float64)
    return indices, alphas


def threshold_step(rho, epsilon0):
    """Keep the eigenvalues above ``epsilon0`` times the largest one.

    The cut is relative to the current spectral peak: a fixed absolute cut
    below the maximally mixed level 1/d never prunes the eigenvalue bulk,
    and the iteration then stalls at a high-entropy fixed point instead of
    collapsing onto the (pure) target, at every sampling ratio tried.  The
    input is symmetrized first; the output is Hermitian, positive
    semidefinite, and unit trace.  Raises AllBelowThreshold when nothing
    survives (no positive eigenvalue).
    """
    rho = np.asarray(rho, dtype=np.complex128)
    herm = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    keep = vals > epsilon0 * vals.max()
    if not keep.any():
        raise AllBelowThreshold(
            f"no eigenvalue above {epsilon0} * max; largest is {vals.max():.3e}"
        )
    vals = vals[keep]
    vecs = vecs[:, keep]
    out = (vecs * vals) @ vecs.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / vals.sum()


def project_measurements(rho, records, basis):
    """Impose every measured constraint tr(tau_i rho) = alpha_i."""
    if not len(records):
        raise ValueError("records must be non-empty")
    indices, alphas = records_to_arrays(records)
    return basis.project(rho, indices, alphas)


@dataclass(frozen=True)
class ReconstructionConfig:
    """Iteration controls: threshold, Frobenius tolerance, iteration cap.

    ``epsilon0`` is the relative spectral cut of `threshold_step`; it must
    dominate the post-renormalization eigenvalue bulk for the iteration to
    seek a low-rank state, hence the aggressive default.  ``guess`` is
    either None (maximally mixed start) or an explicit Hermitian matrix of
    the basis dimension.
    """

    epsilon0: float = 0.5
    tol: float = 1e-6
    max_iter: int = 5000
    guess: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon0 < 1.0:
            raise ValueError("epsilon0 must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def reconstruct(records, basis, config=None):
    """Recover a density matrix from undersampled expectation values.

    Alternates threshold_step and project_measurements from the guess until
    consecutive iterates differ by less than ``config.tol`` in Frobenius
    norm, then applies a final threshold_step so the result is Hermitian,
    PSD, and unit trace.  Returns (rho, info) where info reports iterations,
    the final measurement residual, and wall time.  Raises NotConverged
    (carrying the final iterate) if the cap is hit.
    """
    if config is None:
        config = ReconstructionConfig()
    indices, alphas = records_to_arrays(records)
    if len(indices) == 0:
        raise ValueError("records must be non-empty")
    started = time.perf_counter()
    if config.guess is not None:
        rho = np.asarray(config.guess, dtype=np.complex128)
        if rho.shape != (basis.d, basis.d):
            raise DimensionMismatch("guess dimension does not match basis")
        rho = 0.5 * (rho + rho.conj().T)
    else:
        rho = np.eye(basis.d, dtype=np.complex128) / basis.d

    converged = False
    iterations = 0
    previous = rho
    for iterations in range(1, config.max_iter + 1):
        rho = threshold_step(rho, config.epsilon0)
        rho = basis.project(rho, indices, alphas)
        if np.linalg.norm(rho - previous) < config.tol:
            converged = True
            break
        previous = rho

    rho = threshold_step(rho, config.epsilon0)
    residual = float(np.linalg.norm(basis.expectations_rho(rho, indices) - alphas))
    info = {
        "iterations": iterations,
        "residual": residual,
        "wall_time_s": time.perf_counter() - started,
        "converged": converged,
    }
    if not converged:
        raise NotConverged(
            f"no convergence within {config.max_iter} iterations "
            f"(residual {residual:.3e})",
            iterate=rho,
            residual=residual,
            iterations=iterations,
        )
    return rho, info


class SVTReconstructor(BaseEstimator):
    """Estimator wrapper around `reconstruct` for pipeline composition.

    Parameters mirror ReconstructionConfig; ``fit`` takes the sampled basis
    indices and their expectation values and exposes the recovered state as
    ``density_matrix_`` together with ``n_iter_`` and ``residual_``.
    """

    def __init__(self, dim, epsilon0=0.5, tol=1e-6, max_iter=5000, guess=None):
        self.dim = dim
        self.epsilon0 = epsilon0
        self.tol = tol
        self.max_iter = max_iter
        self.guess = guess

    def fit(self, indices, alphas):
        basis = GGMBasis(self.dim)
        records = [
            MeasurementRecord(int(i), float(a)) for i, a in zip(indices, alphas)
        ]
        config = ReconstructionConfig(
            epsilon0=self.epsilon0,
            tol=self.tol,
            max_iter=self.max_iter,
            guess=None if self.guess is None else np.asarray(self.guess),
        )
        rho, info = reconstruct(records, basis, config)
        self.density_matrix_ = rho
        self.n_iter_ = info["iterations"]
        self.residual_ = info["residual"]
        self.wall_time_ = info["wall_time_s"]
        return self


def save_records_csv(path, records):
    with open(path, "w") as fh:
        fh.write("index,alpha\n")
        for rec in records:
            fh.write(f"{rec.index},{rec.alpha!r}\n")


def load_records_csv(path):
    records = []
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "index,alpha":
            raise ValueError(f"unexpected records header: {header!r}")
        for line in fh:
            idx, alpha = line.strip().split(",")
            records.append(MeasurementRecord(int(idx), float(alpha)))
    return records
