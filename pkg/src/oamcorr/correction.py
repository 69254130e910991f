"""Channel-matrix assembly from the reconstructed state and the metrics.

The reconstructed output density matrix is (near) rank one, so a state
vector can be read off one column ("column-division", the default) or from
the dominant eigenvector; its entries, grouped by wavelength, form the
columns of the channel matrix.  Treating the channel as unitary, the
adjoint inverts it: rho_c ~ (Lambda^dag x I) rho_out (Lambda x I).

Metrics against a pure target |Psi>: fidelity sqrt(<Psi|rho|Psi>), trace
distance 0.5 * sum |eig(rho - |Psi><Psi|)|, and negativity from the
partial transpose of the wavelength subsystem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateColumn,
    DimensionMismatch,
    RankAmbiguous,
    ZeroPivot,
    ZeroTrace,
)

__all__ = [
    "extract_state_vector",
    "assemble_kraus",
    "correct_state",
    "fidelity",
    "trace_distance",
    "partial_transpose",
    "negativity",
    "CorrectionReport",
    "REPORT_COLUMNS",
]


def extract_state_vector(rho, method="column-division", rank_threshold=0.1):
    """Read the state vector out of a near-rank-one density matrix.

    column-division: take the column with the largest diagonal entry and
    divide by the square root of that entry.  dominant-eigenvector: top
    eigenvector.  Either way the global phase is fixed by making the pivot
    component real positive.  Raises RankAmbiguous when the second
    eigenvalue reaches ``rank_threshold``.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    vals, vecs = np.linalg.eigh(rho)
    if vals[-2] >= rank_threshold:
        raise RankAmbiguous(
            f"second eigenvalue {vals[-2]:.3e} >= {rank_threshold}; "
            "state extraction is ill-defined"
        )
    diag = np.real(np.diag(rho))
    pivot = int(np.argmax(diag))
    if method == "column-division":
        if diag[pivot] < 1e-10:
            raise ZeroPivot(f"largest diagonal entry {diag[pivot]:.3e} below 1e-10")
        psi = rho[:, pivot] / np.sqrt(diag[pivot])
    elif method == "dominant-eigenvector":
        psi = vecs[:, -1]
    else:
        raise ValueError(f"unknown extraction method {method!r}")
    psi = psi / np.linalg.norm(psi)
    phase = psi[pivot] / abs(psi[pivot])
    return psi * np.conj(phase)


def assemble_kraus(psi_out, n_wavelengths=3):
    """Rearrange the output state vector into the channel matrix.

    Column n collects sqrt(3) times the components with wavelength index n,
    then each column is rescaled to unit norm (compensating truncation
    loss).  Returns (kraus, pre-normalization column norms).
    """
    psi_out = np.asarray(psi_out, dtype=np.complex128)
    if psi_out.size % n_wavelengths:
        raise DimensionMismatch(
            f"state dimension {psi_out.size} not divisible by {n_wavelengths}"
        )
    kraus = np.sqrt(3.0) * psi_out.reshape(-1, n_wavelengths)
    norms = np.linalg.norm(kraus, axis=0)
    if np.any(norms < 1e-6):
        raise DegenerateColumn(f"column norms {norms} contain a degenerate column")
    return kraus / norms, norms


def correct_state(rho_out, kraus):
    """Invert the channel: rho_c ~ (Lambda^dag x I) rho_out (Lambda x I)."""
    rho_out = np.asarray(rho_out, dtype=np.complex128)
    kraus = np.asarray(kraus, dtype=np.complex128)
    n_spatial, n_in = kraus.shape
    nb = rho_out.shape[0] // n_spatial
    if rho_out.shape != (n_spatial * nb, n_spatial * nb):
        raise DimensionMismatch(
            f"output state {rho_out.shape} incompatible with channel {kraus.shape}"
        )
    embed = np.kron(kraus, np.eye(nb))
    rho_c = embed.conj().T @ rho_out @ embed
    tr = float(np.real(np.trace(rho_c)))
    if tr < 1e-12:
        raise ZeroTrace(f"corrected trace {tr:.3e} below 1e-12")
    rho_c = rho_c / tr
    return 0.5 * (rho_c + rho_c.conj().T)


def _check_dims(rho, target):
    rho = np.asarray(rho, dtype=np.complex128)
    target = np.asarray(target, dtype=np.complex128)
    if rho.shape != (target.size, target.size):
        raise DimensionMismatch(f"state dim {target.size} vs matrix {rho.shape}")
    return rho, target


def fidelity(rho, target):
    """sqrt(<Psi|rho|Psi>) for a pure target state."""
    rho, target = _check_dims(rho, target)
    val = np.real(np.conj(target) @ rho @ target)
    return float(np.sqrt(max(val, 0.0)))


def trace_distance(rho, target):
    """Half the trace norm of rho - |Psi><Psi|."""
    rho, target = _check_dims(rho, target)
    diff = rho - np.outer(target, np.conj(target))
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def partial_transpose(rho, dim_a, dim_b):
    """Transpose subsystem B of a (dim_a * dim_b)-dimensional matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (dim_a * dim_b, dim_a * dim_b):
        raise DimensionMismatch(
            f"matrix {rho.shape} is not ({dim_a}*{dim_b}) square"
        )
    t = rho.reshape(dim_a, dim_b, dim_a, dim_b)
    return t.transpose(0, 3, 2, 1).reshape(dim_a * dim_b, dim_a * dim_b)


def negativity(rho, dim_a, dim_b):
    """Half the summed magnitude of negative partial-transpose eigenvalues."""
    vals = np.linalg.eigvalsh(partial_transpose(rho, dim_a, dim_b))
    return float(0.5 * np.sum(np.abs(vals) - vals))


REPORT_COLUMNS = (
    "fidelity_corrected",
    "fidelity_uncorrected",
    "trace_distance_corrected",
    "trace_distance_uncorrected",
    "negativity_corrected",
    "negativity_uncorrected",
)


@dataclass(frozen=True)
class CorrectionReport:
    """Corrected-vs-uncorrected metrics for one channel realization."""

    fidelity_corrected: float
    fidelity_uncorrected: float
    trace_distance_corrected: float
    trace_distance_uncorrected: float
    negativity_corrected: float
    negativity_uncorrected: float
    extraction_method: str = "column-division"
    residual: float = float("nan")
    iterations: int = 0

    @classmethod
    def evaluate(
        cls,
        rho_corrected,
        rho_uncorrected,
        target,
        dim_a=3,
        dim_b=3,
        extraction_method="column-division",
        residual=float("nan"),
        iterations=0,
    ):
        return cls(
            fidelity_corrected=fidelity(rho_corrected, target),
            fidelity_uncorrected=fidelity(rho_uncorrected, target),
            trace_distance_corrected=trace_distance(rho_corrected, target),
            trace_distance_uncorrected=trace_distance(rho_uncorrected, target),
            negativity_corrected=negativity(rho_corrected, dim_a, dim_b),
            negativity_uncorrected=negativity(rho_uncorrected, dim_a, dim_b),
            extraction_method=extraction_method,
            residual=residual,
            iterations=iterations,
        )
