"""Pure numpy implementations of the hot kernels.

These define the reference semantics; the compiled versions in
``_ckernels.pyx`` must agree with them to within floating-point rounding.
"""
import numpy as np

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def box_muller(raw):
    """Map an even-length uint64 array to standard normals.

    Each pair ``(r0, r1)`` becomes ``(R cos th, R sin th)`` with
    ``R = sqrt(-2 log u0)``, ``u0 = 1 - (r0 >> 11) 2^-53`` in (0, 1] and
    ``th = 2 pi (r1 >> 11) 2^-53``.
    """
    raw = np.ascontiguousarray(raw, dtype=np.uint64)
    if raw.size % 2:
        raise ValueError("box_muller needs an even number of raw draws")
    u0 = 1.0 - (raw[0::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    u1 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    radius = np.sqrt(-2.0 * np.log(u0))
    theta = _TWO_PI * u1
    out = np.empty(raw.size, dtype=np.float64)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return out


def sq_dist_rows(bank, resid, coef):
    """Return ``sum_k (resid_k - coef * bank[w, k])**2`` for every row ``w``."""
    bank = np.asarray(bank, dtype=np.float64)
    resid = np.asarray(resid, dtype=np.float64)
    diff = resid[None, :] - coef * bank
    return np.einsum("ij,ij->i", diff, diff)


def mgf_exponents(z, x, t, power):
    """Per-row exponent of the adapted-process MGF identity.

    For each row, ``t * sum(-P z^2 + 2 x z + P) + 2 t^2/(1 + 2 t P) * (n P - sum x^2)``.
    """
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n = z.shape[1]
    lin = np.sum(-power * z * z + 2.0 * x * z, axis=1) + n * power
    quad = n * power - np.sum(x * x, axis=1)
    return t * lin + (2.0 * t * t / (1.0 + 2.0 * t * power)) * quad
