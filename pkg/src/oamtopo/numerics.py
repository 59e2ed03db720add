"""Special functions and complex linear-algebra kernels.

The production Bessel evaluation is delegated to :func:`scipy.special.jv`;
:func:`bessel_j_integral` is an independent quadrature used to cross-check it.
ZF kernels go through a Cholesky factorisation of the Gram matrix.
"""

import numpy as np
import scipy.linalg
import scipy.special

from .errors import DomainError, NumericError, SingularMatrixError

MAX_ORDER = 64
MAX_ARG = 1.0e4
DEFAULT_MAX_CONDITION = 1.0e12


def _check_bessel_domain(order, arg):
    if int(order) != order:
        raise DomainError(f"Bessel order must be an integer, got {order!r}")
    if abs(order) > MAX_ORDER:
        raise DomainError(f"|order| must be <= {MAX_ORDER}, got {order}")
    if not np.isfinite(arg) or abs(arg) > MAX_ARG:
        raise DomainError(f"|arg| must be finite and <= {MAX_ARG:g}, got {arg}")


def bessel_j(order, arg):
    """Bessel function of the first kind ``J_order(arg)`` for integer order."""
    _check_bessel_domain(order, arg)
    order = int(order)
    if arg == 0.0:
        return 1.0 if order == 0 else 0.0
    # negative orders through the reflection identity, so both signs share one path
    value = float(scipy.special.jv(abs(order), arg))
    if order < 0 and order % 2:
        value = -value
    return value


def bessel_j_vec(order, args):
    """Vectorised :func:`bessel_j` over an array of arguments (no domain checks)."""
    return scipy.special.jv(order, np.asarray(args, dtype=float))


def bessel_j_integral(order, arg, tol=1e-14, max_points=1 << 20):
    """Evaluate ``J_order(arg)`` by quadrature of its integral representation.

    Integrates ``(1/(2 pi j^l)) * int_0^{2pi} exp(j l tau) exp(j arg cos tau) dtau``
    with the trapezoidal rule, which converges geometrically for this periodic
    integrand. The point count doubles until two successive estimates agree.

    Raises
    ------
    NumericError
        If the estimate does not settle, or the imaginary residue exceeds 1e-9.
    """
    _check_bessel_domain(order, arg)
    order = int(order)
    prefactor = 1.0 / (1j ** order)

    def estimate(n):
        tau = 2.0 * np.pi * np.arange(n) / n
        return prefactor * np.mean(np.exp(1j * order * tau) * np.exp(1j * arg * np.cos(tau)))

    n = 64
    previous = estimate(n)
    while True:
        n *= 2
        if n > max_points:
            raise NumericError(f"quadrature for J_{order}({arg}) did not converge")
        current = estimate(n)
        if abs(current - previous) <= tol * max(1.0, abs(current)):
            break
        previous = current
    if abs(current.imag) >= 1e-9:
        raise NumericError(f"imaginary residue {current.imag:.3e} in J_{order}({arg})")
    return float(current.real)


def _gram_factor(H, max_condition):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise DomainError(f"expected a matrix, got shape {H.shape}")
    rows, cols = H.shape
    if rows < cols:
        raise DomainError(f"zero-forcing needs rows >= cols, got {rows}x{cols}")
    if not np.all(np.isfinite(H)):
        raise DomainError("matrix has non-finite entries")
    gram = H.conj().T @ H
    cond = np.linalg.cond(gram) if cols else 1.0
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularMatrixError(cond)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(cond) from None
    return H, factor


def zf_pseudo_inverse(H, max_condition=DEFAULT_MAX_CONDITION):
    """Zero-forcing pseudo-inverse ``G = (H^H H)^-1 H^H``.

    Raises
    ------
    SingularMatrixError
        When ``cond(H^H H)`` exceeds `max_condition`; carries the estimate.
    """
    H, factor = _gram_factor(H, max_condition)
    return scipy.linalg.cho_solve(factor, H.conj().T)


def zf_noise_amplifications(H, max_condition=DEFAULT_MAX_CONDITION):
    """All diagonal entries of ``(H^H H)^-1`` as a real vector."""
    H, factor = _gram_factor(H, max_condition)
    inverse = scipy.linalg.cho_solve(factor, np.eye(H.shape[1], dtype=complex))
    return np.real(np.diag(inverse)).copy()


def zf_noise_amplification(H, stream, max_condition=DEFAULT_MAX_CONDITION):
    """Noise-enhancement factor ``[(H^H H)^-1]_{nn}`` of one ZF output stream."""
    amps = zf_noise_amplifications(H, max_condition)
    if not 0 <= stream < amps.size:
        raise DomainError(f"stream index {stream} out of range for {amps.size} streams")
    return float(amps[stream])
