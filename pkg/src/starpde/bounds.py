"""Explicit a priori constants and certificates for discrete solutions.

Every constant is a pure function of sup / Lipschitz norms of the data.
``W`` suffixes denote full W^{1,inf} norms (sup + best Lipschitz constant),
``lip`` suffixes the Lipschitz seminorm alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

UNIVERSAL_C = 1188.0


def admissibility_threshold(c_sup: float) -> float:
    """max(floor(|c|) + 1, |c|^2), the smallest admissible inverse step."""
    return max(math.floor(c_sup) + 1.0, c_sup**2)


def admissible_steps(c_sup: float, horizon: float) -> int:
    """Minimal number of steps on [0, horizon] whose inverse step is admissible."""
    return int(math.ceil(horizon * admissibility_threshold(c_sup) - 1e-12))


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _clean(v: float) -> float:
    return math.inf if math.isnan(v) else float(v)


def _expm1_over(rate: float, length: float) -> float:
    """(exp(rate * length) - 1) / rate, equal to ``length`` in the rate -> 0 limit."""
    if rate == 0.0:
        return length
    return _clean((_exp(rate * length) - 1.0) / rate)


def sampled_sup_lip(table, steps) -> tuple[float, float]:
    """Sup norm and a Lipschitz bound of a tabulated function.

    ``steps`` gives the node spacing per axis (None for axes that are not
    coordinates, such as the ray index). The multivariate Lipschitz bound is
    the sum over axes of the largest difference quotient, which dominates
    the Euclidean one.
    """
    arr = np.asarray(table, dtype=float)
    if len(steps) != arr.ndim:
        raise ValueError(f"need one step per axis ({arr.ndim}), got {len(steps)}")
    lip = 0.0
    for axis, h in enumerate(steps):
        if h is None or arr.shape[axis] < 2:
            continue
        lip += float(np.max(np.abs(np.diff(arr, axis=axis)))) / h
    return float(np.max(np.abs(arr))), lip


# -- elliptic / classical scheme ---------------------------------------------


def constant_C0(gamma_sup, lambda_floor, g_sup, f_sup, c_sup) -> float:
    """((|gamma| / lambda_floor) v |g| + |f|) e^{|c| + 1}, max taken before the sum."""
    if not lambda_floor > 0:
        raise ValueError("lambda_floor must be positive")
    return _clean((max(gamma_sup / lambda_floor, g_sup) + f_sup) * _exp(c_sup + 1.0))


def constant_C0_alt(gamma_sup, lambda_floor, g_sup, f_sup, c_sup) -> float:
    """The other reading: ((|gamma| / lambda_floor) v (|g| + |f|)) e^{|c| + 1}."""
    if not lambda_floor > 0:
        raise ValueError("lambda_floor must be positive")
    return _clean(max(gamma_sup / lambda_floor, g_sup + f_sup) * _exp(c_sup + 1.0))


def constant_Cg(a_sup, gxx_sup, b_sup, gx_sup, c_sup, g_sup, f_sup) -> float:
    return a_sup * gxx_sup + b_sup * gx_sup + c_sup * g_sup + f_sup


def constant_K(a_floor, alpha_ratio, C0, bW, cW, fW, universal=UNIVERSAL_C) -> float:
    return _clean((1.0 + alpha_ratio + C0 + universal) * (bW + cW + fW) / max(a_floor**3, 1.0))


def constant_C1(C0, lambda_W, gamma_W, lambda_floor, Cg, K) -> float:
    lead = (C0 * lambda_W + gamma_W) / lambda_floor
    return _clean((1.0 + max(lead, Cg)) * _exp(K))


def constant_Cprime(R, a_floor, C1, C0, b_sup, c_sup, f_sup, aW, bW) -> float:
    return _clean((R * C1 + C0 * (2 * b_sup + R * (c_sup + f_sup)) + 2 * aW * bW / a_floor) / a_floor)


def constant_C2(Cprime, R, b_sup, a_floor, C1, c_sup, C0, f_sup) -> float:
    rate = b_sup / a_floor
    # (e^{R|b|/a} - 1) / |b| = expm1(R * rate) / rate / a_floor, limit R / a_floor
    tail = _expm1_over(rate, R) / a_floor
    return _clean(Cprime * _exp(R * rate) + (C1 + c_sup * C0 + f_sup) * tail)


def constant_C3(a_floor, C1, b_sup, C2, c_sup, C0, f_sup) -> float:
    return _clean((C1 + b_sup * C2 + c_sup * C0 + f_sup) / a_floor)


def constant_Theta(u_sup, lambda_lip, gamma_lip, lambda_floor) -> float:
    return _clean((u_sup * lambda_lip + gamma_lip) / lambda_floor)


# -- local-time scheme --------------------------------------------------------


def constant_M0(g_sup, psi_sup, f_sup, phi_sup, dlg0_sup, r_sup, c_sup, T) -> float:
    s = g_sup + psi_sup + f_sup + phi_sup + 2.0 * dlg0_sup
    return _clean(s * _exp(r_sup + 1.0) * _exp(T * (c_sup + 1.0)))


def constant_M0_alt(g_sup, psi_sup, f_sup, phi_sup, dlg0_sup, r_sup, c_sup, T) -> float:
    """Variant without the |psi| term, as set at the end of the super-solution argument."""
    return constant_M0(g_sup, 0.0, f_sup, phi_sup, dlg0_sup, r_sup, c_sup, T)


def constant_M1(M0, r_lip, phi_lip, Mg, psi0_lip) -> float:
    return _clean(max(M0 * r_lip + phi_lip, Mg) + max(psi0_lip, Mg))


def constant_M4(a_floor, M0, M1, M2, aW, bW, cW, fW, I, alpha_sup, psi_sup) -> float:
    first = 2.0 / a_floor * (M2 * aW + M1 * aW * bW + M0 * aW * cW + aW * fW)
    return _clean(max(first, I * alpha_sup * M1 + psi_sup))


# -- norm collection -----------------------------------------------------------

CLASSICAL_NORMS = (
    "R", "T", "I", "a_floor", "alpha_floor", "lambda_floor",
    "a_sup", "a_W", "b_sup", "b_W", "c_sup", "c_W", "f_sup", "f_W",
    "alpha_sup", "alpha_W", "lambda_sup", "lambda_lip", "lambda_W",
    "gamma_sup", "gamma_lip", "gamma_W", "g_sup", "gx_sup", "gxx_sup",
)
LOCAL_NORMS = (
    "R", "T", "K", "I", "a_floor", "alpha_floor",
    "a_sup", "a_W", "b_sup", "b_W", "c_sup", "c_W", "f_sup", "f_W",
    "alpha_sup", "alpha_W", "r_sup", "r_lip", "phi_sup", "phi_lip",
    "psi_sup", "psi0_lip", "psix_sup", "g_sup", "gx_sup", "gxx_sup", "dlg0_sup",
)


class MissingNormError(KeyError):
    pass


def _need(norms: dict, *names):
    missing = [n for n in names if n not in norms or norms[n] is None]
    if missing:
        raise MissingNormError(f"missing norm(s): {', '.join(missing)}")
    return [float(norms[n]) for n in names]


@dataclass(frozen=True)
class ConstantSet:
    C_g: float | None = None
    K_const: float | None = None
    C0: float | None = None
    C0_alt: float | None = None
    C1: float | None = None
    C_prime: float | None = None
    C2: float | None = None
    C3: float | None = None
    Theta: float | None = None
    M_g: float | None = None
    M0: float | None = None
    M0_alt: float | None = None
    M1: float | None = None
    M2_used: float | None = None
    M4: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


def classical_constants(norms: dict) -> ConstantSet:
    """C0, C(g), K, C1, C', C2, C3 and Theta from the norms of classical data."""
    (R, a_floor, alpha_floor, lam_floor, a_sup, aW, b_sup, bW, c_sup, cW, f_sup, fW,
     alpha_sup, lamW, lam_lip, gam_sup, gamW, gam_lip, g_sup, gx, gxx) = _need(
        norms, "R", "a_floor", "alpha_floor", "lambda_floor", "a_sup", "a_W", "b_sup", "b_W",
        "c_sup", "c_W", "f_sup", "f_W", "alpha_sup", "lambda_W", "lambda_lip", "gamma_sup",
        "gamma_W", "gamma_lip", "g_sup", "gx_sup", "gxx_sup")
    C0 = constant_C0(gam_sup, lam_floor, g_sup, f_sup, c_sup)
    C0_alt = constant_C0_alt(gam_sup, lam_floor, g_sup, f_sup, c_sup)
    Cg = constant_Cg(a_sup, gxx, b_sup, gx, c_sup, g_sup, f_sup)
    K = constant_K(a_floor, alpha_sup / alpha_floor, C0, bW, cW, fW)
    C1 = constant_C1(C0, lamW, gamW, lam_floor, Cg, K)
    Cp = constant_Cprime(R, a_floor, C1, C0, b_sup, c_sup, f_sup, aW, bW)
    C2 = constant_C2(Cp, R, b_sup, a_floor, C1, c_sup, C0, f_sup)
    C3 = constant_C3(a_floor, C1, b_sup, C2, c_sup, C0, f_sup)
    # C0 stands in for sup|u| so Theta depends on data only
    Theta = constant_Theta(C0, lam_lip, gam_lip, lam_floor)
    return ConstantSet(C_g=Cg, K_const=K, C0=C0, C0_alt=C0_alt, C1=C1, C_prime=Cp, C2=C2,
                       C3=C3, Theta=Theta, inputs=dict(norms))


def local_time_constants(norms: dict, gradient_bound: float | None = None) -> ConstantSet:
    """M0, M1 and M4 for the local-time scheme.

    M4 needs a gradient bound M2 that has no closed form; pass
    ``gradient_bound`` (a declared or observed value). Without it, M4 is
    left undefined.
    """
    (T, I, a_floor, a_sup, aW, b_sup, bW, c_sup, cW, f_sup, fW, alpha_sup, r_sup, r_lip,
     phi_sup, phi_lip, psi_sup, psi0_lip, psix_sup, g_sup, gx, gxx, dlg0) = _need(
        norms, "T", "I", "a_floor", "a_sup", "a_W", "b_sup", "b_W", "c_sup", "c_W", "f_sup",
        "f_W", "alpha_sup", "r_sup", "r_lip", "phi_sup", "phi_lip", "psi_sup", "psi0_lip",
        "psix_sup", "g_sup", "gx_sup", "gxx_sup", "dlg0_sup")
    Mg = constant_Cg(a_sup, gxx, b_sup, gx, c_sup, g_sup, f_sup)
    M0 = constant_M0(g_sup, psi_sup, f_sup, phi_sup, dlg0, r_sup, c_sup, T)
    M0_alt = constant_M0_alt(g_sup, psi_sup, f_sup, phi_sup, dlg0, r_sup, c_sup, T)
    M1 = constant_M1(M0, r_lip, phi_lip, Mg, psi0_lip)
    M2 = norms.get("M2", gradient_bound)
    M4 = None
    if M2 is not None:
        M2 = max(float(M2), psix_sup)
        M4 = constant_M4(a_floor, M0, M1, M2, aW, bW, cW, fW, I, alpha_sup, psi_sup)
    return ConstantSet(M_g=Mg, M0=M0, M0_alt=M0_alt, M1=M1, M2_used=M2, M4=M4, inputs=dict(norms))


def constants_full(norms: dict, kind: str = "local_time", gradient_bound: float | None = None) -> ConstantSet:
    if kind == "classical":
        return classical_constants(norms)
    if kind == "local_time":
        return local_time_constants(norms, gradient_bound)
    raise ValueError(f"unknown kind {kind!r}")


# -- certificates -------------------------------------------------------------


@dataclass(frozen=True)
class CertificateEntry:
    name: str
    constant: float
    observed: float
    slack: float
    passed: bool
    note: str = ""

    def to_dict(self):
        return {f.name: _jsonable(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class CertificateReport:
    entries: tuple[CertificateEntry, ...]
    constants: ConstantSet
    reported: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> CertificateEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "entries": [e.to_dict() for e in self.entries],
            "constants": self.constants.to_dict(),
            "reported": {k: _jsonable(v) for k, v in self.reported.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
    if isinstance(v, np.integer):
        return int(v)
    return v


def _entry(name, constant, observed, slack, note="", atol=0.0):
    ok = observed <= constant * (1.0 + slack) + atol
    return CertificateEntry(name, float(constant), float(observed), float(slack), bool(ok), note)


# (observed key, constant attribute, entry name, note)
_CLASSICAL_BOUNDS = (
    ("sup", "C0", "sup |u^k| <= C0", ""),
    ("time_quotient", "C1", "max n|u^k - u^(k-1)| <= C1", ""),
    ("gradient", "C2", "max |d_x u^k| <= C2", "centred differences at interior nodes"),
)
_LOCAL_BOUNDS = (
    ("sup", "M0", "sup |u^p| <= M0", ""),
    ("junction_time_lip", "M1", "junction time-Lipschitz <= M1", ""),
    ("l_quotient", "M4", "max_{p<=n_l-2} n_l|u^(p+1) - u^p| <= M4", "level p = n_l-1 excluded"),
)


def certify(observed: dict, constants: ConstantSet, slack: float = 0.05,
            atol: float = 1e-9) -> CertificateReport:
    """Compare observed discrete norms with the constants.

    ``observed`` comes from :func:`starpde.rothe.observed_norms` (classical)
    or :func:`starpde.localtime.observed_norms` (local time); the keys
    present decide which bounds apply. An entry passes when
    ``observed <= constant * (1 + slack) + atol``; ``atol`` absorbs
    round-off in quantities whose bound is exactly zero.
    """
    entries = []
    reported = {}
    c = constants
    for key, attr, name, note in _CLASSICAL_BOUNDS + _LOCAL_BOUNDS:
        value = getattr(c, attr)
        if key in observed and value is not None:
            if attr in ("C0", "C1", "C2") and c.C0 is None:
                continue
            if attr in ("M0", "M1", "M4") and c.M0 is None:
                continue
            entries.append(_entry(name, value, observed[key], slack, note, atol))
    if "junction_quotient" in observed and c.Theta is not None:
        bound = max(c.Theta, c.C_g)
        entries.append(_entry("max n|u^k(0) - u^(k-1)(0)| <= Theta v C(g)", bound,
                              observed["junction_quotient"], slack, "", atol))
    if c.C0 is not None and c.C0_alt != c.C0 and "sup" in observed:
        reported["sup vs C0 (alternative precedence)"] = c.C0_alt
    if c.M0 is not None and c.M0_alt != c.M0 and "sup" in observed:
        reported["sup vs M0 (without |psi|)"] = c.M0_alt
    for key in ("l_quotient_last", "gradient_reported", "time_lip_reported"):
        if key in observed:
            reported[key] = observed[key]
    return CertificateReport(tuple(entries), constants, reported)


_NORM_SUFFIXES = ("_sup", "_W", "_lip")


def declared_norm_entries(declared: dict, sampled: dict, atol: float = 1e-9) -> list[CertificateEntry]:
    """One entry per declared sup/Lipschitz norm: the sampled value must not exceed it.

    Sampled Lipschitz quotients are lower bounds of the true seminorms, so a
    declared value below them is certainly wrong. Floors are not checked here.
    """
    out = []
    for key in sorted(declared):
        if key.endswith(_NORM_SUFFIXES) and key in sampled:
            out.append(_entry(f"declared {key} >= sampled", declared[key], sampled[key], 0.0,
                              "declared norm is too small for the data", atol))
    return out
