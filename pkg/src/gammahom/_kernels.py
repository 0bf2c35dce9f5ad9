"""Gather/scatter kernels between nodal fields and cellwise quantities.

Every solver iteration spends its time here: nodal values are gathered into
per-cell gradients and midpoint values, and per-cell partial derivatives are
scattered back onto the nodes (the adjoint map).  Two implementations exist:

* numba ``@njit`` loops for ``m = 1`` and ``m = 2``
* pure numpy slicing for any ``m``

Set ``GAMMAHOM_DISABLE_NUMBA=1`` in the environment to force the numpy path.
Both paths produce identical results up to floating-point summation order.
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return decorator


def _env_disabled():
    return os.environ.get("GAMMAHOM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = NUMBA_AVAILABLE and not _env_disabled()


# =============================================================================
# numpy path (any dimension)
# =============================================================================

def _avg_along(arr, axis):
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (arr[tuple(lo)] + arr[tuple(hi)])


def _avg_along_adjoint(arr, axis, out):
    lo = [slice(None)] * out.ndim
    hi = [slice(None)] * out.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] += 0.5 * arr
    out[tuple(hi)] += 0.5 * arr


def gather_numpy(nodal, h):
    """Cell gradients and corner averages from a nodal array.

    ``nodal`` has shape ``(n+1,)*m + (N,)``.  Returns ``(grad, mid)`` with
    shapes ``(n,)*m + (N, m)`` and ``(n,)*m + (N,)``.
    """
    m = nodal.ndim - 1
    grads = []
    for k in range(m):
        d = np.diff(nodal, axis=k) / h
        for j in range(m):
            if j != k:
                d = _avg_along(d, j)
        grads.append(d)
    mid = nodal
    for j in range(m):
        mid = _avg_along(mid, j)
    return np.stack(grads, axis=-1), mid


def scatter_numpy(dA, ds, h):
    """Adjoint of :func:`gather_numpy`.

    ``dA`` has shape ``(n,)*m + (N, m)`` and ``ds`` shape ``(n,)*m + (N,)``
    (``ds`` may be ``None``).  Returns the nodal array of shape
    ``(n+1,)*m + (N,)``.
    """
    m = dA.shape[-1]
    n_cells = dA.shape[:m]
    ncomp = dA.shape[m]
    out = np.zeros(tuple(c + 1 for c in n_cells) + (ncomp,))
    for k in range(m):
        term = dA[..., k]
        # undo the averaging over the other axes in reverse order
        for j in reversed([j for j in range(m) if j != k]):
            grown = list(term.shape)
            grown[j] += 1
            tmp = np.zeros(grown)
            _avg_along_adjoint(term, j, tmp)
            term = tmp
        lo = [slice(None)] * out.ndim
        hi = [slice(None)] * out.ndim
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        out[tuple(lo)] -= term / h
        out[tuple(hi)] += term / h
    if ds is not None:
        term = ds
        for j in reversed(range(m)):
            grown = list(term.shape)
            grown[j] += 1
            tmp = np.zeros(grown)
            _avg_along_adjoint(term, j, tmp)
            term = tmp
        out += term
    return out


# =============================================================================
# numba path (m = 1, 2)
# =============================================================================

@njit(cache=True)
def _gather_1d(nodal, h):
    n = nodal.shape[0] - 1
    ncomp = nodal.shape[1]
    grad = np.empty((n, ncomp, 1))
    mid = np.empty((n, ncomp))
    for i in range(n):
        for c in range(ncomp):
            a = nodal[i, c]
            b = nodal[i + 1, c]
            grad[i, c, 0] = (b - a) / h
            mid[i, c] = 0.5 * (a + b)
    return grad, mid


@njit(cache=True)
def _scatter_1d(dA, ds, h):
    n = dA.shape[0]
    ncomp = dA.shape[1]
    out = np.zeros((n + 1, ncomp))
    for i in range(n):
        for c in range(ncomp):
            g = dA[i, c, 0] / h
            s = 0.5 * ds[i, c]
            out[i, c] += s - g
            out[i + 1, c] += s + g
    return out


@njit(cache=True)
def _gather_2d(nodal, h):
    n0 = nodal.shape[0] - 1
    n1 = nodal.shape[1] - 1
    ncomp = nodal.shape[2]
    grad = np.empty((n0, n1, ncomp, 2))
    mid = np.empty((n0, n1, ncomp))
    for i in range(n0):
        for j in range(n1):
            for c in range(ncomp):
                u00 = nodal[i, j, c]
                u10 = nodal[i + 1, j, c]
                u01 = nodal[i, j + 1, c]
                u11 = nodal[i + 1, j + 1, c]
                grad[i, j, c, 0] = 0.5 * ((u10 - u00) / h + (u11 - u01) / h)
                grad[i, j, c, 1] = 0.5 * ((u01 - u00) / h + (u11 - u10) / h)
                mid[i, j, c] = 0.5 * (0.5 * (u00 + u10) + 0.5 * (u01 + u11))
    return grad, mid


@njit(cache=True)
def _scatter_2d(dA, ds, h):
    n0 = dA.shape[0]
    n1 = dA.shape[1]
    ncomp = dA.shape[2]
    out = np.zeros((n0 + 1, n1 + 1, ncomp))
    for i in range(n0):
        for j in range(n1):
            for c in range(ncomp):
                gx = 0.5 * dA[i, j, c, 0] / h
                gy = 0.5 * dA[i, j, c, 1] / h
                s = 0.25 * ds[i, j, c]
                out[i, j, c] += s - gx - gy
                out[i + 1, j, c] += s + gx - gy
                out[i, j + 1, c] += s - gx + gy
                out[i + 1, j + 1, c] += s + gx + gy
    return out


# =============================================================================
# dispatch
# =============================================================================

def gather(nodal, h, use_numba=None):
    """Dispatch to the numba kernel when enabled and ``m <= 2``."""
    if use_numba is None:
        use_numba = USE_NUMBA
    nodal = np.ascontiguousarray(nodal, dtype=np.float64)
    m = nodal.ndim - 1
    if use_numba and NUMBA_AVAILABLE and m == 1:
        return _gather_1d(nodal, float(h))
    if use_numba and NUMBA_AVAILABLE and m == 2:
        return _gather_2d(nodal, float(h))
    return gather_numpy(nodal, h)


def scatter(dA, ds, h, use_numba=None):
    if use_numba is None:
        use_numba = USE_NUMBA
    dA = np.ascontiguousarray(dA, dtype=np.float64)
    m = dA.shape[-1]
    if use_numba and NUMBA_AVAILABLE and m in (1, 2):
        if ds is None:
            ds = np.zeros(dA.shape[:-1])
        ds = np.ascontiguousarray(ds, dtype=np.float64)
        if m == 1:
            return _scatter_1d(dA, ds, float(h))
        return _scatter_2d(dA, ds, float(h))
    return scatter_numpy(dA, ds, h)
