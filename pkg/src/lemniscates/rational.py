"""Rational functions kept in factored form and evaluated in the log domain."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedDocument
from .geometry import is_infinite

CHUNK = 1 << 22  # target matrix entries per evaluation block


def _merge(points, mults):
    """Combine repeated points, dropping zero multiplicities."""
    out = {}
    for p, k in zip(points, mults):
        if k:
            p = complex(p)
            out[p] = out.get(p, 0) + int(k)
    pts = np.array(list(out.keys()), dtype=complex)
    ks = np.array(list(out.values()), dtype=np.int64)
    return pts, ks


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """``r(z) = exp(log_scale) * prod (z - a)^k / prod (z - p)^l``, raised to ``exponent``.

    ``m`` is the discretisation parameter defining ``u_m = log|r| / m``.
    Only finite poles are stored; an excess of zero multiplicity is a pole at
    infinity.
    """

    zeros: np.ndarray
    zero_mult: np.ndarray
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    pole_mult: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    m: int = 1
    log_scale: complex = 0.0
    exponent: int = 1

    @classmethod
    def from_roots(cls, zeros=(), poles=(), zero_mult=None, pole_mult=None, m=1, log_scale=0.0):
        zeros = np.atleast_1d(np.asarray(zeros, dtype=complex))
        poles = [p for p in np.atleast_1d(np.asarray(poles, dtype=complex))]
        zm = np.ones(zeros.size, dtype=np.int64) if zero_mult is None else np.broadcast_to(zero_mult, zeros.shape)
        pm = np.ones(len(poles), dtype=np.int64) if pole_mult is None else np.broadcast_to(pole_mult, (len(poles),))
        keep = [i for i, p in enumerate(poles) if not is_infinite(p)]
        z, zk = _merge(zeros, zm)
        p, pk = _merge([poles[i] for i in keep], [pm[i] for i in keep])
        if np.intersect1d(z, p).size:
            raise ValueError("zeros and poles must be disjoint")
        return cls(z, zk, p, pk, int(m), complex(log_scale))

    # ---------------------------------------------------------------- bookkeeping
    @property
    def zero_degree(self) -> int:
        return int(self.zero_mult.sum()) * self.exponent

    @property
    def pole_degree(self) -> int:
        return int(self.pole_mult.sum()) * self.exponent

    @property
    def degree(self) -> int:
        return max(self.zero_degree, self.pole_degree)

    @property
    def infinity_order(self) -> int:
        """Pole order at infinity (negative for a zero there)."""
        return self.zero_degree - self.pole_degree

    def power(self, n: int) -> "RationalFunction":
        if n < 1:
            raise ValueError("power requires n >= 1")
        return RationalFunction(self.zeros, self.zero_mult, self.poles, self.pole_mult, self.m,
                                self.log_scale, self.exponent * n)

    def scaled(self, log_factor: complex) -> "RationalFunction":
        """``exp(log_factor) * r`` (the factor applies before any power)."""
        return RationalFunction(self.zeros, self.zero_mult, self.poles, self.pole_mult, self.m,
                                self.log_scale + log_factor / self.exponent, self.exponent)

    # ---------------------------------------------------------------- evaluation
    def _sum(self, z, fn):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros(flat.shape, dtype=complex if fn is _clog or fn is _dlog else float)
        pts = np.concatenate([self.zeros, self.poles])
        wts = np.concatenate([self.zero_mult, -self.pole_mult]).astype(float)
        if pts.size:
            step = max(1, CHUNK // pts.size)
            with np.errstate(divide="ignore", invalid="ignore"):
                for i in range(0, flat.size, step):
                    d = flat[i: i + step, None] - pts[None, :]
                    out[i: i + step] = fn(d) @ wts
        return out.reshape(z.shape)

    def log_abs(self, z):
        """``log|r(z)|`` with ``-inf`` at zeros and ``+inf`` at poles."""
        z = np.asarray(z, dtype=complex)
        fin = np.isfinite(z)
        val = np.empty(z.shape)
        with np.errstate(invalid="ignore"):
            base = self._sum(np.where(fin, z, 0), _labs)
        # a zero and a pole never coincide, so inf - inf cannot arise at a point
        zero_hit = np.isin(z, self.zeros)
        pole_hit = np.isin(z, self.poles)
        base = np.where(zero_hit, -np.inf, np.where(pole_hit, np.inf, base))
        val[...] = self.exponent * (base + self.log_scale.real)
        if (~fin).any():
            k = self.infinity_order
            val[~fin] = np.inf if k > 0 else (-np.inf if k < 0 else self.exponent * self.log_scale.real)
        return val if val.shape else float(val)

    def u_m(self, z):
        return self.log_abs(z) / self.m

    def complex_log(self, z):
        """``S(z)`` as a sum of principal logarithms, so ``exp(S) = r(z)``; ``Re S = -inf`` at zeros."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(invalid="ignore"):
            base = self._sum(z, _clog) + self.log_scale
        # complex products would turn -inf into nan, so scale the parts separately
        re = np.where(np.isin(z, self.zeros), -np.inf, np.where(np.isin(z, self.poles), np.inf, base.real))
        im = np.where(np.isin(z, self.zeros) | np.isin(z, self.poles), 0.0, base.imag)
        out = np.empty(z.shape, dtype=complex)
        out.real = self.exponent * re
        out.imag = self.exponent * im
        return out if out.shape else complex(out)

    def __call__(self, z):
        return np.exp(self.complex_log(z))

    def dlog(self, z):
        """Logarithmic derivative ``r'/r``."""
        return self.exponent * self._sum(z, _dlog)

    def grad_log_abs(self, z):
        """Gradient of ``log|r|`` as a complex number ``d/dx + i d/dy``."""
        return np.conj(self.dlog(z))

    def grad_u(self, z):
        """Gradient of ``u_m`` as an array ``[..., 2]`` of (d/dx, d/dy)."""
        g = self.grad_log_abs(z) / self.m
        return np.stack([g.real, g.imag], axis=-1)

    # ---------------------------------------------------------------- documents
    def to_dict(self) -> dict:
        return {
            "zeros": [{"re": float(p.real), "im": float(p.imag), "mult": int(k)}
                      for p, k in zip(self.zeros, self.zero_mult)],
            "poles": [{"re": float(p.real), "im": float(p.imag), "mult": int(k)}
                      for p, k in zip(self.poles, self.pole_mult)],
            "m": self.m,
            "log_scale": {"re": float(self.log_scale.real), "im": float(self.log_scale.imag)},
            "exponent": self.exponent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RationalFunction":
        try:
            zeros = [complex(z["re"], z["im"]) for z in doc["zeros"]]
            zm = [int(z["mult"]) for z in doc["zeros"]]
            poles = [complex(p["re"], p["im"]) for p in doc["poles"]]
            pm = [int(p["mult"]) for p in doc["poles"]]
            ls = doc.get("log_scale", {"re": 0.0, "im": 0.0})
            out = cls.from_roots(zeros, poles, zm, pm, int(doc.get("m", 1)), complex(ls["re"], ls["im"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDocument(f"bad rational-function document: {exc}") from None
        e = int(doc.get("exponent", 1))
        return out.power(e) if e != 1 else out

    @classmethod
    def from_json(cls, text: str) -> "RationalFunction":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"rational-function document is not JSON: {exc}") from None


def _labs(d):
    return np.log(np.abs(d))


def _clog(d):
    return np.log(d)


def _dlog(d):
    return 1.0 / d


def log_abs(r: RationalFunction, z):
    return r.log_abs(z)


def u_m_eval(r: RationalFunction, z):
    return r.u_m(z)


def complex_log_eval(r: RationalFunction, z):
    return r.complex_log(z)


def grad_u(r: RationalFunction, z):
    return r.grad_u(z)


def power(r: RationalFunction, n: int) -> RationalFunction:
    return r.power(n)


def monomial(k: int = 1, center: complex = 0.0) -> RationalFunction:
    """``(z - center)^k``."""
    return RationalFunction.from_roots([center], [], [k])

