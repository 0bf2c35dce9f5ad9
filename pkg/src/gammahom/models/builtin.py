"""Built-in Lagrangians, addressable by string identifier."""

from __future__ import annotations

import configparser
import math
from pathlib import Path

import numpy as np

from ..errors import StructuralError
from .base import Lagrangian, QuadraticForm
from .cartan import cartan_noneven, cartan_norm, dominance_lagrangian, make_dominance_g

TWO_PI = 2.0 * math.pi


def _zeros_s(x, s, A):
    return np.zeros_like(s)


def squared_norm(m: int = 2, n_target: int = 1, scale: float = 1.0) -> Lagrangian:
    """``scale * |A|^2``."""
    return Lagrangian(
        name="dirichlet", m=m, n_target=n_target,
        eval=lambda x, s, A: scale * np.sum(A * A, axis=(1, 2)),
        growth=(scale, scale, 2.0),
        derivative_A=lambda x, s, A: 2.0 * scale * A, derivative_s=_zeros_s,
        depends_on_x=False, depends_on_s=False, quadratic_in_A=True,
    )


def make_counterexample_finsler(n_target: int = 3) -> Lagrangian:
    """``phi(A) = |A|^2 - (A21)^2/2 - (A22)^2/2 + (A21 + A22)^2/2 = |A|^2 + A21 A22`` (``m = 2``).

    ``A21, A22`` are the entries of the second row.  The cross term is bounded
    by ``|A|^2/2``, so ``|A|^2/2 <= phi <= 3|A|^2/2``.
    """
    if n_target < 2:
        raise StructuralError("the counterexample density needs N >= 2")

    def f(x, s, A):
        a21 = A[:, 1, 0]
        a22 = A[:, 1, 1]
        return np.sum(A * A, axis=(1, 2)) - 0.5 * a21 ** 2 - 0.5 * a22 ** 2 + 0.5 * (a21 + a22) ** 2

    def d_A(x, s, A):
        out = 2.0 * A
        out[:, 1, 0] += A[:, 1, 1]
        out[:, 1, 1] += A[:, 1, 0]
        return out

    return Lagrangian(
        name="finsler-asym", m=2, n_target=n_target, eval=f, growth=(0.5, 2.0, 2.0),
        derivative_A=d_A, derivative_s=_zeros_s, depends_on_x=False, depends_on_s=False,
        quadratic_in_A=True,
    )


def make_swap_anisotropic(n_target: int = 3) -> Lagrangian:
    """``|A|^2 + (A11)^2 / 2``: convex, with ``phi(e1|e2) = 5/2 > 2 = phi(e2|e1)``."""
    def f(x, s, A):
        return np.sum(A * A, axis=(1, 2)) + 0.5 * A[:, 0, 0] ** 2

    def d_A(x, s, A):
        out = 2.0 * A
        out[:, 0, 0] += A[:, 0, 0]
        return out

    return Lagrangian(
        name="finsler-swap", m=2, n_target=n_target, eval=f, growth=(1.0, 1.5, 2.0),
        derivative_A=d_A, derivative_s=_zeros_s, depends_on_x=False, depends_on_s=False,
        quadratic_in_A=True,
    )


def riemannian_iso(n_target: int = 2, m: int = 2, base: float = 1.5, amplitude: float = 1.0) -> Lagrangian:
    """``b(s) |A|^2`` with ``b(s) = base + amplitude * cos(2 pi s_1)``, periodic in ``s``."""
    lo, hi = base - abs(amplitude), base + abs(amplitude)
    if lo <= 0:
        raise StructuralError("coefficient must stay positive")

    def f(x, s, A):
        return (base + amplitude * np.cos(TWO_PI * s[:, 0])) * np.sum(A * A, axis=(1, 2))

    def d_A(x, s, A):
        return 2.0 * (base + amplitude * np.cos(TWO_PI * s[:, 0]))[:, None, None] * A

    def d_s(x, s, A):
        out = np.zeros_like(s)
        out[:, 0] = -TWO_PI * amplitude * np.sin(TWO_PI * s[:, 0]) * np.sum(A * A, axis=(1, 2))
        return out

    return Lagrangian(
        name="riemannian-iso", m=m, n_target=n_target, eval=f, growth=(lo, hi, 2.0),
        derivative_A=d_A, derivative_s=d_s, depends_on_x=False, depends_on_s=True,
    )


def layered_1d(a_low: float = 1.0, a_high: float = 2.0) -> Lagrangian:
    """``a(x) A^2`` with ``a = a_low`` on ``[0, 1/2)`` and ``a_high`` on ``[1/2, 1)``, period 1."""
    def coef(x):
        frac = x[:, 0] - np.floor(x[:, 0])
        return np.where(frac < 0.5, a_low, a_high)

    return Lagrangian(
        name="layered-1d", m=1, n_target=1,
        eval=lambda x, s, A: coef(x) * A[:, 0, 0] ** 2,
        growth=(min(a_low, a_high), max(a_low, a_high), 2.0),
        derivative_A=lambda x, s, A: 2.0 * coef(x)[:, None, None] * A, derivative_s=_zeros_s,
        smooth_away_from="x in Z/2 (coefficient jumps; no x-derivative is used)",
        depends_on_s=False, quadratic_in_A=True,
    )


def checkerboard(a_low: float = 1.0, a_high: float = 2.0) -> Lagrangian:
    """``a(x) |A|^2`` on ``R^2``, ``a`` alternating between half-unit squares (``N = 1``)."""
    def coef(x):
        cells = np.floor(2.0 * x[:, 0]) + np.floor(2.0 * x[:, 1])
        return np.where(np.mod(cells, 2.0) == 0.0, a_low, a_high)

    return Lagrangian(
        name="checkerboard", m=2, n_target=1,
        eval=lambda x, s, A: coef(x) * np.sum(A * A, axis=(1, 2)),
        growth=(min(a_low, a_high), max(a_low, a_high), 2.0),
        derivative_A=lambda x, s, A: 2.0 * coef(x)[:, None, None] * A, derivative_s=_zeros_s,
        smooth_away_from="square edges (no x-derivative is used)",
        depends_on_s=False, quadratic_in_A=True,
    )


def nonuap_indicator(m: int = 2, n_target: int = 2) -> Lagrangian:
    """``f = 1`` on ``s in Z^N`` and ``2`` elsewhere: periodic, not uniformly almost periodic."""
    def f(x, s, A):
        on_lattice = np.all(s == np.round(s), axis=1)
        return np.where(on_lattice, 1.0, 2.0)

    return Lagrangian(
        name="nonuap-indicator", m=m, n_target=n_target, eval=f, growth=(0.0, 2.0, 2.0),
        smooth_away_from="everywhere (indicator)", depends_on_x=False,
    )


def dominance_3norm() -> Lagrangian:
    return dominance_lagrangian(make_dominance_g(), name="dominance-3norm")


def cartan_noneven_lagrangian() -> Lagrangian:
    return cartan_noneven().associated_lagrangian(name="cartan-noneven")


def cartan_even_lagrangian() -> Lagrangian:
    return cartan_norm().associated_lagrangian(name="cartan-even")


BUILTIN_MODELS = {
    "finsler-asym": make_counterexample_finsler,
    "finsler-swap": make_swap_anisotropic,
    "dominance-3norm": dominance_3norm,
    "cartan-noneven": cartan_noneven_lagrangian,
    "cartan-even": cartan_even_lagrangian,
    "riemannian-iso": riemannian_iso,
    "checkerboard": checkerboard,
    "layered-1d": layered_1d,
    "nonuap-indicator": nonuap_indicator,
    "dirichlet": squared_norm,
}


def get_model(identifier: str) -> Lagrangian:
    """Built-in model by id, or a quadratic form loaded from a config file path."""
    if identifier in BUILTIN_MODELS:
        return BUILTIN_MODELS[identifier]()
    path = Path(identifier)
    if path.is_file():
        return load_quadratic_form(path).to_lagrangian(name=path.stem)
    raise KeyError(f"unknown model {identifier!r}; choose from {sorted(BUILTIN_MODELS)} or a file path")


def parse_matrix_literal(text: str) -> np.ndarray:
    """``"1 0; 0 1"`` or ``"1,0;0,1"`` -> 2-D array.  Rows separated by ``;``."""
    rows = [r for r in text.strip().split(";")]
    out = []
    for r in rows:
        toks = r.replace(",", " ").split()
        if not toks:
            raise ValueError(f"empty row in matrix literal {text!r}")
        out.append([float(t) for t in toks])
    if len({len(r) for r in out}) != 1:
        raise ValueError(f"ragged matrix literal {text!r}")
    return np.array(out, dtype=np.float64)


def load_quadratic_form(path) -> QuadraticForm:
    """Read a ``[form]`` section with keys ``a``, ``b`` and optional ``isotropic``.

    Example::

        [form]
        a = 1 0; 0 1
        b = 2 0; 0 1
    """
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    parser.read_string(text)
    if "form" not in parser:
        raise ValueError(f"{path}: missing [form] section")
    sec = parser["form"]
    unknown = set(sec) - {"a", "b", "isotropic"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return QuadraticForm(parse_matrix_literal(sec["a"]), parse_matrix_literal(sec["b"]),
                         isotropic=sec.getboolean("isotropic", fallback=False))
