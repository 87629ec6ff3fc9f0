"""Minimal dense reverse-mode automatic differentiation on float64 arrays.

A `Tensor` wraps a numpy float64 array. Operations executed while a `Tape`
is active record one node each (inputs + a local vector-Jacobian rule);
`Tape.backward` replays the nodes in reverse recorded order, which is a
reverse topological order by construction, and accumulates gradients
additively so shared subexpressions are handled correctly.

Scope is deliberately small: what the bilinear/ODE model stack and the
topological loss need, in 64-bit precision. No GPU, no mixed precision,
broadcasting only as far as numpy's rules carry the ops below. A tape is
confined to a single thread and is meant to be discarded after backward.
"""

from __future__ import annotations

import threading

import numpy as np

from .exceptions import NumericError, ShapeError

_tls = threading.local()


def _active_tape():
    return getattr(_tls, "tape", None)


class Tensor:
    """Dense float64 tensor with an optional gradient buffer.

    The array is treated as immutable once wrapped; only the gradient
    buffer is mutated (additively, by backward passes and `zero_grad`).
    """

    __slots__ = ("array", "_grad", "tape_node", "requires_grad")

    def __init__(self, array, requires_grad: bool = False):
        arr = np.asarray(array, dtype=np.float64)
        self.array = arr
        self._grad = None
        self.tape_node = None
        self.requires_grad = bool(requires_grad)

    # -- spec'd views ---------------------------------------------------
    @property
    def shape(self):
        return self.array.shape

    @property
    def ndim(self):
        return self.array.ndim

    @property
    def size(self):
        return self.array.size

    @property
    def data(self):
        """Flat view of the underlying storage."""
        return self.array.reshape(-1)

    @property
    def grad(self):
        """Flat view of the accumulated gradient, or None."""
        return None if self._grad is None else self._grad.reshape(-1)

    @property
    def grad_array(self):
        """Gradient with the tensor's own shape, or None."""
        return self._grad

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self._grad is None:
            self._grad = np.zeros_like(self.array)
        self._grad += g.reshape(self.array.shape)

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        return float(self.array.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.array)

    def __repr__(self):
        return f"Tensor(shape={self.array.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    """One recorded operation: parent tensors plus its VJP rule."""

    __slots__ = ("op", "parents", "vjp", "out")

    def __init__(self, op, parents, vjp, out):
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.out = out


class Tape:
    """Per-forward-pass operation record. Use as a context manager.

    nodes are appended in execution order, so walking them backwards is a
    valid reverse topological order of the computation DAG.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._prev = None

    def __enter__(self):
        self._prev = _active_tape()
        _tls.tape = self
        return self

    def __exit__(self, *exc):
        _tls.tape = self._prev
        self._prev = None
        return False

    def _record(self, op, parents, vjp, out: Tensor) -> None:
        node = _Node(op, parents, vjp, out)
        out.tape_node = node
        self.nodes.append(node)

    def backward(self, output: Tensor, write_grad: bool = True) -> dict:
        """Accumulate d(output)/d(tensor) for every tensor feeding `output`.

        Returns a dict keyed by id(tensor). When `write_grad` is set, the
        gradient is also added into the `.grad` buffer of every
        `requires_grad` leaf. Each recorded node is visited at most once.
        """
        if output.tape_node is None:
            # output independent of any recorded op: only itself gets a grad
            grads = {id(output): np.ones_like(output.array)}
            if write_grad and output.requires_grad:
                output.accumulate_grad(grads[id(output)])
            return grads

        # restrict the walk to ancestors of `output`
        needed = set()
        stack = [output.tape_node]
        while stack:
            node = stack.pop()
            if id(node) in needed:
                continue
            needed.add(id(node))
            for p in node.parents:
                if isinstance(p, Tensor) and p.tape_node is not None:
                    stack.append(p.tape_node)

        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.array)}
        for node in reversed(self.nodes):
            if id(node) not in needed:
                continue
            g_out = grads.get(id(node.out))
            if g_out is None:
                continue
            for parent, g in zip(node.parents, node.vjp(g_out)):
                if g is None or not isinstance(parent, Tensor):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = np.array(g, dtype=np.float64, copy=True)
        if write_grad:
            seen = set()
            for node in self.nodes:
                for p in node.parents:
                    pid = id(p)
                    if (isinstance(p, Tensor) and p.requires_grad
                            and p.tape_node is None and pid in grads
                            and pid not in seen):
                        p.accumulate_grad(grads[pid])
                        seen.add(pid)
        return grads


def _tracked(*xs) -> bool:
    return any(isinstance(x, Tensor) and (x.requires_grad or x.tape_node is not None)
               for x in xs)


def _make(op, parents, vjp, value) -> Tensor:
    out = Tensor(value)
    tape = _active_tape()
    if tape is not None and _tracked(*parents):
        tape._record(op, parents, vjp, out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, s in enumerate(shape):
        if s == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# -- elementwise and structural ops -------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.array + b.array
    except ValueError as e:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from e
    return _make("add", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
                 value)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.array - b.array
    except ValueError as e:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}") from e
    return _make("sub", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
                 value)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make("neg", (a,), lambda g: (-g,), -a.array)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.array * b.array
    except ValueError as e:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from e
    return _make("mul", (a, b),
                 lambda g: (_unbroadcast(g * b.array, a.shape),
                            _unbroadcast(g * a.array, b.shape)),
                 value)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.array / b.array
    except ValueError as e:
        raise ShapeError(f"div: incompatible shapes {a.shape} and {b.shape}") from e
    return _make("div", (a, b),
                 lambda g: (_unbroadcast(g / b.array, a.shape),
                            _unbroadcast(-g * a.array / (b.array ** 2), b.shape)),
                 value)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    value = a.array @ b.array
    return _make("matmul", (a, b),
                 lambda g: (g @ b.array.T, a.array.T @ g),
                 value)


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make("square", (a,), lambda g: (2.0 * a.array * g,), a.array ** 2)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    value = np.sqrt(a.array)
    return _make("sqrt", (a,), lambda g: (g * 0.5 / value,), value)


def exp(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.array)
    return _make("exp", (a,), lambda g: (g * value,), value)


def log(a) -> Tensor:
    a = as_tensor(a)
    value = np.log(a.array)
    return _make("log", (a,), lambda g: (g / a.array,), value)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    value = _sigmoid(a.array)
    return _make("sigmoid", (a,), lambda g: (g * value * (1.0 - value),), value)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def silu(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.array)
    return _make("silu", (a,),
                 lambda g: (g * (s * (1.0 + a.array * (1.0 - s))),),
                 a.array * s)


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed stably; derivative is sigmoid(x)."""
    a = as_tensor(a)
    value = np.logaddexp(0.0, a.array)
    return _make("softplus", (a,), lambda g: (g * _sigmoid(a.array),), value)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    value = a.array.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make("sum", (a,), vjp, value)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    value = np.concatenate([t.array for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(np.take(g, range(offsets[i], offsets[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return _make("concat", tuple(tensors), vjp, value)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make("reshape", (a,),
                 lambda g: (g.reshape(a.shape),),
                 a.array.reshape(shape))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError("transpose: rank-2 tensors only")
    return _make("transpose", (a,), lambda g: (g.T,), a.array.T)


# -- SVD ---------------------------------------------------------------

_JACOBI_MAX_SWEEPS = 60
_JACOBI_TOL = 1e-14


def _jacobi_svd(a: np.ndarray):
    """One-sided Jacobi SVD of a 2-d array, economy shapes.

    Rotates column pairs until all columns are pairwise orthogonal, then
    reads singular values off as column norms. Accurate to close to machine
    precision for the matrix sizes this package touches (<= 256 x 256).
    """
    m, n = a.shape
    if m < n:
        u, s, v = _jacobi_svd(a.T)
        return v, s, u
    b = a.astype(np.float64, copy=True)
    v = np.eye(n)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                bp = b[:, p]
                bq = b[:, q]
                alpha = bp @ bp
                beta = bq @ bq
                gamma = bp @ bq
                denom = np.sqrt(alpha * beta)
                if denom == 0.0 or abs(gamma) <= _JACOBI_TOL * denom:
                    continue
                off = max(off, abs(gamma) / denom)
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s_rot = c * t
                new_p = c * bp - s_rot * bq
                new_q = s_rot * bp + c * bq
                b[:, p] = new_p
                b[:, q] = new_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s_rot * vq
                v[:, q] = s_rot * vp + c * vq
        if off < _JACOBI_TOL:
            break
    sigma = np.sqrt((b * b).sum(axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    b = b[:, order]
    v = v[:, order]
    u = np.zeros((m, n))
    tiny = max(m, n) * np.finfo(np.float64).eps * (sigma[0] if sigma.size else 0.0)
    for i in range(n):
        if sigma[i] > tiny and sigma[i] > 0.0:
            u[:, i] = b[:, i] / sigma[i]
        else:
            # orthonormal filler for a null column
            cand = np.zeros(m)
            for j in range(m):
                cand[:] = 0.0
                cand[j] = 1.0
                cand -= u[:, :i] @ (u[:, :i].T @ cand)
                nrm = np.linalg.norm(cand)
                if nrm > 0.5:
                    u[:, i] = cand / nrm
                    break
    return u, sigma, v


def svd(m):
    """Economy SVD, m = U diag(S) V^T with S non-negative descending.

    Accepts a rank-2 Tensor or array. S carries a gradient rule
    (dS_i = u_i v_i^T); at repeated singular values the rule symmetrically
    averages over the repeated group, a documented subgradient choice.
    U and V are returned as constants (not differentiable).
    """
    t = as_tensor(m)
    a = t.array
    if a.ndim != 2:
        raise ShapeError("svd: rank-2 input required")
    if not np.all(np.isfinite(a)):
        raise NumericError("svd: non-finite entries")
    u, s, v = _jacobi_svd(a)

    def vjp(g):
        # group repeated singular values, average their rank-1 directions
        grad = np.zeros_like(a)
        k = len(s)
        i = 0
        scale = max(s[0], 1.0) if k else 1.0
        while i < k:
            j = i + 1
            while j < k and abs(s[j] - s[i]) <= 1e-12 * scale:
                j += 1
            block = np.zeros_like(a)
            for r in range(i, j):
                block += np.outer(u[:, r], v[:, r])
            block /= (j - i)
            for r in range(i, j):
                grad += g[r] * block
            i = j
        return (grad,)

    s_t = _make("svd_s", (t,), vjp, s)
    return Tensor(u), s_t, Tensor(v)
