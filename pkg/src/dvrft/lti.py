"""Scalar discrete-time transfer functions in the forward shift operator q.

Coefficients are stored in descending powers of q and denominators are kept
monic, so two equal transfer functions have identical coefficient arrays.
All filtering uses zero initial conditions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

__all__ = [
    "DEFAULT_CANCEL_TOL",
    "ImproperTransferError",
    "UnstableInverseWarning",
    "RationalTF",
    "StateSpace",
    "tf",
    "filter_signal",
    "inverse_filter",
    "freq_response",
    "realize",
    "poly_trim",
    "poly_is_zero",
]

DEFAULT_CANCEL_TOL = 1e-9


class ImproperTransferError(ValueError):
    """A causal operation received a transfer function of negative relative degree."""


class UnstableInverseWarning(UserWarning):
    """Numerator root on/outside the unit circle; the finite-horizon inverse is still exact."""


def poly_trim(coeffs, tol: float = 0.0) -> np.ndarray:
    """Strip (near-)zero leading coefficients; the zero polynomial becomes [0.]."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    if c.size == 0:
        return np.zeros(1)
    cut = tol * np.max(np.abs(c))
    k = 0
    while k < c.size - 1 and abs(c[k]) <= cut:
        k += 1
    return c[k:].copy()


def poly_is_zero(coeffs) -> bool:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    return bool(np.all(c == 0.0))


def _poly_scale(coeffs, r: complex) -> float:
    """Backward-error scale Sum |c_k| m^{deg-k} with m = max(|r|, 1)."""
    return float(np.polyval(np.abs(coeffs), max(abs(r), 1.0)))


@dataclass(frozen=True, eq=False)
class RationalTF:
    """Rational function num(q)/den(q); den is monic after construction."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = poly_trim(self.num)
        den = poly_trim(self.den)
        if poly_is_zero(den):
            raise ZeroDivisionError("zero denominator polynomial")
        lead = den[0]
        den = den / lead
        num = num / lead
        if poly_is_zero(num):
            num = np.zeros(1)
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    # -- structure ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return poly_is_zero(self.num)

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    @property
    def relative_degree(self):
        """deg(den) - deg(num); +inf for the zero transfer function."""
        if self.is_zero:
            return math.inf
        return self.den_degree - self.num_degree

    def poles(self) -> np.ndarray:
        return np.roots(self.den) if self.den_degree > 0 else np.zeros(0, dtype=complex)

    def zeros(self) -> np.ndarray:
        if self.is_zero or self.num_degree == 0:
            return np.zeros(0, dtype=complex)
        return np.roots(self.num)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, RationalTF):
            return other
        if isinstance(other, (int, float)):
            return RationalTF(np.array([float(other)]), np.ones(1))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        num = np.polyadd(np.polymul(self.num, o.den), np.polymul(o.num, self.den))
        return RationalTF(num, np.polymul(self.den, o.den)).simplify()

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RationalTF(np.polymul(self.num, o.num), np.polymul(self.den, o.den)).simplify()

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_zero:
            raise ZeroDivisionError("division by the zero transfer function")
        return RationalTF(np.polymul(self.num, o.den), np.polymul(self.den, o.num)).simplify()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def simplify(self, tol: float = DEFAULT_CANCEL_TOL) -> "RationalTF":
        """Cancel common numerator/denominator roots within tol (relative).

        A denominator root r is cancelled when the numerator's relative
        residual at r is below tol; both polynomials are then deflated by
        synthetic division, which keeps the surviving coefficients accurate
        even for clustered roots.
        """
        if self.is_zero:
            return RationalTF(np.zeros(1), np.ones(1))
        if self.num_degree == 0 or self.den_degree == 0:
            return self
        num = np.array(self.num)
        den = np.array(self.den)
        den_roots = list(np.roots(den))
        changed = False
        while den_roots and len(num) > 1:
            scales = [_poly_scale(num, r) for r in den_roots]
            residuals = [abs(np.polyval(num, r)) / s for r, s in zip(den_roots, scales)]
            k = int(np.argmin(residuals))
            if residuals[k] > tol:
                break
            r = den_roots.pop(k)
            if abs(np.imag(r)) <= tol * max(1.0, abs(r)):
                factor = np.array([1.0, -np.real(r)])
            else:
                partner = min(
                    range(len(den_roots)),
                    key=lambda m: abs(den_roots[m] - np.conj(r)),
                    default=None,
                ) if den_roots else None
                if partner is None or abs(den_roots[partner] - np.conj(r)) > 1e-6 * max(1.0, abs(r)):
                    break  # unpaired complex root; cancelling it would break realness
                den_roots.pop(partner)
                factor = np.array([1.0, -2.0 * np.real(r), abs(r) ** 2])
            num_q, num_r = np.polydiv(num, factor)
            den_q, den_r = np.polydiv(den, factor)
            if (
                np.max(np.abs(num_r)) > 1e-6 * max(1.0, np.max(np.abs(num)))
                or np.max(np.abs(den_r)) > 1e-6 * max(1.0, np.max(np.abs(den)))
            ):
                break
            num, den = num_q, den_q
            changed = True
        if not changed:
            return self
        return RationalTF(num, den)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, z):
        """Evaluate at a point (or array) of the complex plane."""
        return np.polyval(self.num, z) / np.polyval(self.den, z)

    def freq_response(self, omega):
        """Evaluate on the unit circle at angle(s) omega."""
        return self(np.exp(1j * np.asarray(omega, dtype=float)))

    def close_to(self, other: "RationalTF", tol: float = 1e-9) -> bool:
        """Coefficient-wise equality after monic normalization."""
        if len(self.num) != len(other.num) or len(self.den) != len(other.den):
            return False
        return bool(
            np.allclose(self.num, other.num, atol=tol, rtol=tol)
            and np.allclose(self.den, other.den, atol=tol, rtol=tol)
        )

    def __repr__(self):
        return f"RationalTF({np.array2string(self.num, separator=', ')} / {np.array2string(self.den, separator=', ')})"


def tf(num, den=(1.0,)) -> RationalTF:
    """Shorthand constructor from coefficient sequences (descending powers of q)."""
    return RationalTF(np.asarray(num, dtype=float), np.asarray(den, dtype=float))


TF_ZERO = tf([0.0])
TF_ONE = tf([1.0])


def filter_signal(a: RationalTF, x) -> np.ndarray:
    """Apply a causal transfer function to a signal with zero initial conditions."""
    x = np.asarray(x, dtype=float)
    if a.is_zero:
        return np.zeros_like(x)
    rd = a.relative_degree
    if rd < 0:
        raise ImproperTransferError(f"cannot filter causally with relative degree {rd}")
    b = np.concatenate([np.zeros(rd), a.num])
    return _signal.lfilter(b, a.den, x)


def inverse_filter(a: RationalTF, x) -> np.ndarray:
    """Solve a(q) r = x for r on the data horizon.

    Uses `relative_degree(a)` samples of look-ahead (the data is offline), so
    the result is shorter than x by that amount. With zero initial conditions
    ``inverse_filter(a, filter_signal(a, x)) == x`` on the overlap.
    """
    if a.is_zero:
        raise ZeroDivisionError("cannot invert the zero transfer function")
    rd = a.relative_degree
    if rd < 0:
        raise ImproperTransferError(f"cannot invert a transfer function of relative degree {rd}")
    x = np.asarray(x, dtype=float)
    if len(x) <= rd:
        raise ValueError(f"horizon {len(x)} too short for a relative degree of {rd}")
    zmax = np.max(np.abs(a.zeros())) if a.num_degree > 0 else 0.0
    if zmax >= 1.0 - 1e-12:
        warnings.warn(
            f"inverse of a transfer function with a zero at magnitude {zmax:.6g}; "
            "the finite-horizon solve is exact but amplifies over long horizons",
            UnstableInverseWarning,
        )
    w = _signal.lfilter(a.den, a.num, x)
    return w[rd:]


def freq_response(a: RationalTF, omega):
    """num(e^{jw})/den(e^{jw})."""
    return a.freq_response(omega)


@dataclass(frozen=True)
class StateSpace:
    """Discrete-time realization x(t+1) = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def transfer_at(self, omega: float) -> complex:
        z = np.exp(1j * omega)
        if self.n_states == 0:
            return complex(self.D[0, 0])
        sol = np.linalg.solve(z * np.eye(self.n_states) - self.A, self.B)
        return complex((self.C @ sol + self.D)[0, 0])

    def simulate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        n = self.n_states
        x = np.zeros(n)
        y = np.zeros(len(u))
        for t in range(len(u)):
            y[t] = (self.C @ x + self.D[:, 0] * u[t])[0] if n else self.D[0, 0] * u[t]
            if n:
                x = self.A @ x + self.B[:, 0] * u[t]
        return y


def realize(a: RationalTF) -> StateSpace:
    """Controllable canonical realization of a proper transfer function."""
    rd = a.relative_degree
    if rd is not math.inf and rd < 0:
        raise ImproperTransferError(f"cannot realize relative degree {rd}")
    n = a.den_degree
    if a.is_zero:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.zeros((1, 1)))
    quot, rem = np.polydiv(a.num, a.den)
    d = float(quot[-1]) if a.num_degree == n else 0.0
    rem = poly_trim(rem if a.num_degree == n else a.num)
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.array([[d]]))
    A = np.eye(n, k=1)
    A[-1, :] = -a.den[1:][::-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = np.zeros((1, n))
    if not poly_is_zero(rem):
        C[0, : len(rem)] = rem[::-1]
    return StateSpace(A, B, C, np.array([[d]]))
