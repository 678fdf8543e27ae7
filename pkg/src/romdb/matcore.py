"""Dense matrix kernels used by every other module.

All operators are plain 2-D ``numpy`` arrays in double precision, real
(``float64``) or complex (``complex128``). The functions here add the
package's numeric contract on top of LAPACK: argument validation, symmetry
tolerances, and the shared error taxonomy. Nothing above this module calls
``numpy.linalg`` / ``scipy.linalg`` factorizations directly.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, LogUndefinedError, NotSpdError, SingularMatrixError

# Relative tolerance for symmetry / Hermitian preconditions. Congruence
# products accumulate roundoff asymmetry, so inputs are symmetrized before
# factorization once they pass this check.
SYMMETRY_RTOL = 1e-10

_RCOND_FLOOR = 1e-14


def as_matrix(m, name="matrix"):
    """Validate and return ``m`` as a finite 2-D float64/complex128 array."""
    a = np.asarray(m)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={a.ndim}")
    if np.iscomplexobj(a):
        a = a.astype(np.complex128, copy=False)
    else:
        a = a.astype(np.float64, copy=False)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def scalar_field(m):
    """Return ``"complex"`` if ``m`` has a nonzero imaginary part, else ``"real"``."""
    return "complex" if np.iscomplexobj(m) else "real"


def frobenius(m):
    return float(np.linalg.norm(m, "fro"))


def spectral_norm(m):
    """Largest singular value (2-norm)."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def symmetrize(m):
    """Return the symmetric (Hermitian) part ``(m + m*) / 2``."""
    return 0.5 * (m + m.conj().T)


def _require_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {m.shape}")


def _require_symmetric(m, name, rtol=SYMMETRY_RTOL):
    _require_square(m, name)
    scale = max(frobenius(m), np.finfo(float).tiny)
    if frobenius(m - m.conj().T) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric to relative tolerance {rtol:g}")


def svd(m):
    """Singular value decomposition ``m = u @ diag(s) @ vh``.

    Returns
    -------
    u, s, vh : ndarray
        ``u`` and ``vh.conj().T`` have orthonormal columns, ``s`` is sorted
        descending.
    """
    m = as_matrix(m)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return u, s, vh


def cholesky(m):
    """Lower-triangular factor ``S`` with ``S @ S.conj().T == m``.

    ``m`` must be Hermitian to :data:`SYMMETRY_RTOL` and positive definite.
    Raises :class:`NotSpdError` carrying the 0-based failing pivot index
    otherwise.
    """
    m = as_matrix(m)
    _require_symmetric(m, "cholesky input")
    a = symmetrize(m)
    if np.iscomplexobj(a):
        c, info = scipy.linalg.lapack.zpotrf(a, lower=1, clean=1, overwrite_a=0)
    else:
        c, info = scipy.linalg.lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotSpdError(f"matrix not positive definite (pivot {info - 1})", pivot=info - 1)
    if info < 0:
        raise InvalidInputError(f"illegal argument {-info} to potrf")
    return c


def is_spd(m, rtol=SYMMETRY_RTOL):
    """True when ``m`` is Hermitian to tolerance and Cholesky succeeds."""
    try:
        cholesky(m)
    except (NotSpdError, InvalidInputError):
        return False
    return True


def sym_eig(m):
    """Eigendecomposition of a symmetric/Hermitian matrix.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns.
    """
    m = as_matrix(m)
    _require_symmetric(m, "sym_eig input")
    vals, vecs = np.linalg.eigh(symmetrize(m))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def mat_log_spd(m):
    """Matrix logarithm of an SPD matrix (symmetric result)."""
    m = as_matrix(m)
    _require_symmetric(m, "mat_log_spd input")
    vals, vecs = np.linalg.eigh(symmetrize(m))
    if vals[0] <= 0:
        k = int(np.argmax(vals <= 0)) if np.any(vals <= 0) else 0
        raise NotSpdError(f"eigenvalue {vals[0]:g} <= 0, matrix not SPD", pivot=k)
    log_vals = np.log(vals)
    out = (vecs * log_vals) @ vecs.conj().T
    return symmetrize(out)


def mat_exp_sym(m):
    """Matrix exponential of a symmetric matrix (SPD result)."""
    m = as_matrix(m)
    _require_symmetric(m, "mat_exp_sym input")
    vals, vecs = np.linalg.eigh(symmetrize(m))
    out = (vecs * np.exp(vals)) @ vecs.conj().T
    return symmetrize(out)


def _on_negative_real_axis(eigvals, rtol=1e-12):
    mags = np.abs(eigvals)
    tol = rtol * max(float(mags.max(initial=0.0)), 1.0)
    near_axis = np.abs(eigvals.imag) <= tol
    return np.any(near_axis & (eigvals.real <= tol))


def mat_log_general(m):
    """Principal logarithm of a nonsingular matrix.

    Computed by eigendecomposition when the eigenvector basis is well
    conditioned, with a Schur-based fallback for defective cases. Raises
    :class:`LogUndefinedError` when an eigenvalue lies on the closed
    negative real axis (the caller is expected to fall back to flat
    interpolation).
    """
    m = as_matrix(m)
    _require_square(m, "mat_log_general input")
    eigvals = np.linalg.eigvals(m)
    if _on_negative_real_axis(eigvals):
        raise LogUndefinedError("eigenvalue on the closed negative real axis, principal log undefined")
    real_input = not np.iscomplexobj(m)
    try:
        w, v = np.linalg.eig(m)
        cond_v = np.linalg.cond(v)
        if cond_v < 1.0 / np.sqrt(np.finfo(float).eps):
            log_m = v @ np.diag(np.log(w.astype(np.complex128))) @ np.linalg.inv(v)
        else:
            raise np.linalg.LinAlgError("ill-conditioned eigenvector basis")
    except np.linalg.LinAlgError:
        log_m = scipy.linalg.logm(m)
    if real_input:
        return np.real(log_m)
    return log_m


def mat_exp_general(m):
    """Matrix exponential (scaling-and-squaring)."""
    m = as_matrix(m)
    _require_square(m, "mat_exp_general input")
    return scipy.linalg.expm(m)


def solve(a, b):
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Raises :class:`SingularMatrixError` with a condition estimate when the
    reciprocal condition number falls below 1e-14.
    """
    a = as_matrix(a, "a")
    b_arr = np.asarray(b)
    b_was_vector = b_arr.ndim == 1
    b2 = as_matrix(b_arr.reshape(-1, 1) if b_was_vector else b_arr, "b")
    _require_square(a, "a")
    if a.shape[0] != b2.shape[0]:
        raise InvalidInputError(f"shape mismatch: a {a.shape} vs b {b2.shape}")
    complex_problem = np.iscomplexobj(a) or np.iscomplexobj(b2)
    if complex_problem:
        a = a.astype(np.complex128, copy=False)
        b2 = b2.astype(np.complex128, copy=False)
    anorm = np.linalg.norm(a, 1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"LU factorization failed: {exc}", cond_estimate=np.inf) from exc
    if complex_problem:
        rcond, info = scipy.linalg.lapack.zgecon(lu, anorm)
    else:
        rcond, info = scipy.linalg.lapack.dgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond < _RCOND_FLOOR:
        cond = np.inf if rcond == 0 or not np.isfinite(rcond) else 1.0 / rcond
        raise SingularMatrixError(
            f"matrix singular to tolerance (condition estimate {cond:.3e})",
            cond_estimate=cond,
        )
    x = scipy.linalg.lu_solve((lu, piv), b2)
    return x[:, 0] if b_was_vector else x


def random_orthogonal(k, rng):
    """Haar-ish random orthogonal matrix from a QR of a Gaussian sample."""
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))
