"""Model stack: bilinear fusion, neural ODE flow, topology-aware loss terms.

The forward path fuses two modality vectors through a bilinear kernel,
evolves the fused state with a learned vector field, and reads the task
output off the final state. Alongside the losses live the diagnostics
that the detection machinery consumes: spectral entanglement entropy of
a state, the loop-to-component tension of a state cloud, and a
gradient-norm health monitor for the topological term.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, as_tensor
from .exceptions import (
    DegenerateDataError,
    InsufficientPointsError,
    NumericError,
    ParameterError,
    ShapeError,
    StiffnessError,
)
from .ph import PointCloud, compute_persistence, rips_filtration
from .ph.gradients import diagram_gradients
from .ph.reduction import PersistenceDiagram

EPS_MIN_DEFAULT = 1e-4
LAMBDA_DEFAULT = 1.0
ALPHA_DEFAULT = 0.1
_STIFF_H_MIN = 1e-12


def tucker_rank_floor(d1: int, d2: int) -> int:
    """Smallest factor rank the low-rank fusion mode accepts by default.

    A quarter of the full interaction dimension: below this the factors
    can squeeze out exactly the cross-modal structure the model exists
    to build, so runs must opt in explicitly to go lower.
    """
    return math.ceil(0.25 * min(d1, d2) ** 2)


class ModelParams:
    """All trainable tensors of one model instance.

    mode "full" keeps the complete (d1, d2, dim) fusion kernel; mode
    "tucker" keeps factors (d1, r), (d2, r), (r, dim) and never
    materializes the outer product. The vector field is a two-hidden-
    layer MLP from (dim+1) to dim, time appended as an input column.
    """

    def __init__(self, d1, d2, dim, hidden, out_dim=1, mode="full",
                 rank=None, seed=0, allow_low_rank=False):
        for name, v in (("d1", d1), ("d2", d2), ("dim", dim),
                        ("hidden", hidden), ("out_dim", out_dim)):
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ParameterError(f"{name} must be a positive integer")
        if mode not in ("full", "tucker"):
            raise ParameterError(f"unknown fusion mode {mode!r}")
        self.d1, self.d2, self.dim = int(d1), int(d2), int(dim)
        self.hidden, self.out_dim = int(hidden), int(out_dim)
        self.mode = mode
        self.seed = int(seed)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 29]))

        if mode == "tucker":
            floor = tucker_rank_floor(d1, d2)
            if rank is None:
                rank = floor
            if not isinstance(rank, (int, np.integer)) or rank < 1:
                raise ParameterError("rank must be a positive integer")
            if rank < floor and not allow_low_rank:
                raise ParameterError(
                    f"tucker rank {rank} is below the floor {floor}; ranks "
                    "this low can project out the cross-modal interaction, "
                    "pass allow_low_rank=True to override")
            self.rank = int(rank)
            self.factor_x = _param(rng, (d1, self.rank), 1.0 / math.sqrt(d1))
            self.factor_y = _param(rng, (d2, self.rank), 1.0 / math.sqrt(d2))
            self.core = _param(rng, (self.rank, dim),
                               1.0 / math.sqrt(self.rank))
        else:
            self.rank = None
            self.kernel = _param(rng, (d1, d2, dim), 1.0 / math.sqrt(d1 * d2))

        self.w1 = _param(rng, (dim + 1, hidden), math.sqrt(2.0 / (dim + 1)))
        self.b1 = _param(rng, (hidden,), 0.0)
        self.w2 = _param(rng, (hidden, hidden), math.sqrt(2.0 / hidden))
        self.b2 = _param(rng, (hidden,), 0.0)
        self.w3 = _param(rng, (hidden, dim), math.sqrt(2.0 / hidden))
        self.b3 = _param(rng, (dim,), 0.0)
        self.head_w = _param(rng, (dim, out_dim), 1.0 / math.sqrt(dim))
        self.head_b = _param(rng, (out_dim,), 0.0)

    def named_parameters(self):
        names = (("factor_x", "factor_y", "core") if self.mode == "tucker"
                 else ("kernel",))
        names = names + ("w1", "b1", "w2", "b2", "w3", "b3",
                         "head_w", "head_b")
        return [(n, getattr(self, n)) for n in names]

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    @property
    def n_params(self) -> int:
        return sum(t.size for t in self.parameters())

    def config(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "dim": self.dim,
                "hidden": self.hidden, "out_dim": self.out_dim,
                "mode": self.mode, "rank": self.rank, "seed": self.seed}

    def clone(self) -> "ModelParams":
        """Independent copy (fresh arrays, fresh gradient buffers)."""
        other = ModelParams(self.d1, self.d2, self.dim, self.hidden,
                            self.out_dim, mode=self.mode, rank=self.rank,
                            seed=self.seed, allow_low_rank=True)
        for (_, src), (_, dst) in zip(self.named_parameters(),
                                      other.named_parameters()):
            dst.array = src.array.copy()
        return other

    def __repr__(self):
        return (f"ModelParams(mode={self.mode!r}, dims=({self.d1},{self.d2})"
                f"->{self.dim}, n_params={self.n_params})")


def _param(rng, shape, scale) -> Tensor:
    if scale == 0.0:
        return Tensor(np.zeros(shape), requires_grad=True)
    return Tensor(rng.normal(0.0, scale, shape), requires_grad=True)


# ---------------------------------------------------------------- fusion

def entangle(x, y, params: ModelParams) -> Tensor:
    """Bilinear fusion z0 = K(x (x) y), batched or single-vector.

    Full mode forms the outer product and projects it down; tucker mode
    contracts through the factors without ever building the product.
    Both are linear in each argument and differentiable end to end.
    """
    xt, yt = as_tensor(x), as_tensor(y)
    single = xt.ndim == 1
    if single != (yt.ndim == 1):
        raise ShapeError("entangle: x and y must both be vectors or both batches")
    if single:
        xt = ad.reshape(xt, (1, xt.size))
        yt = ad.reshape(yt, (1, yt.size))
    if xt.ndim != 2 or yt.ndim != 2 or xt.shape[0] != yt.shape[0]:
        raise ShapeError(f"entangle: bad input shapes {x.shape} / {y.shape}")
    n = xt.shape[0]
    if xt.shape[1] != params.d1 or yt.shape[1] != params.d2:
        raise ShapeError(
            f"entangle: inputs ({xt.shape[1]}, {yt.shape[1]}) do not match "
            f"model dims ({params.d1}, {params.d2})")

    if params.mode == "full":
        outer = ad.mul(ad.reshape(xt, (n, params.d1, 1)),
                       ad.reshape(yt, (n, 1, params.d2)))
        flat = ad.reshape(outer, (n, params.d1 * params.d2))
        z = ad.matmul(flat, ad.reshape(params.kernel,
                                       (params.d1 * params.d2, params.dim)))
    else:
        u = ad.matmul(xt, params.factor_x)
        v = ad.matmul(yt, params.factor_y)
        z = ad.matmul(ad.mul(u, v), params.core)
    return ad.reshape(z, (params.dim,)) if single else z


def ode_field(params: ModelParams, z: Tensor, t: float) -> Tensor:
    """The learned vector field dz/dt at time t, batch (n, dim) in and out."""
    n = z.shape[0]
    tcol = Tensor(np.full((n, 1), float(t)))
    h = ad.concat([z, tcol], axis=1)
    h = ad.silu(ad.add(ad.matmul(h, params.w1), params.b1))
    h = ad.silu(ad.add(ad.matmul(h, params.w2), params.b2))
    return ad.add(ad.matmul(h, params.w3), params.b3)


def task_head(params: ModelParams, z: Tensor) -> Tensor:
    return ad.add(ad.matmul(z, params.head_w), params.head_b)


# ------------------------------------------------------------ integration

@dataclass
class ODEResult:
    zT: Tensor
    trajectory: list
    t_grid: np.ndarray
    n_evals: int
    method: str


def _resolve_field(params):
    if isinstance(params, ModelParams):
        return lambda z, t: ode_field(params, z, t)
    if callable(params):
        return params
    raise ParameterError("params must be ModelParams or a callable field")


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or len(t) < 2:
        raise ParameterError("t_grid must be 1-D with at least two times")
    if t[0] != 0.0:
        raise ParameterError("t_grid must start at 0")
    if not np.all(np.diff(t) > 0):
        raise ParameterError("t_grid must be strictly increasing")
    return t


def ode_integrate(z0, params, t_grid, method: str = "rk4",
                  atol: float = 1e-6, rtol: float = 1e-4) -> ODEResult:
    """Integrate the state from 0 to t_grid[-1], reporting every grid time.

    rk4 takes one classic fixed step per grid interval. dopri runs an
    embedded 4(5) adaptive pair over the whole span and fills grid times
    from cubic interpolation inside accepted steps, so smooth fields
    cost far fewer evaluations than the fixed grid. Gradients follow the
    unrolled arithmetic of whichever scheme ran (step-size control reads
    plain values and stays off the tape).
    """
    t = _check_grid(t_grid)
    f = _resolve_field(params)
    zt = as_tensor(z0)
    single = zt.ndim == 1
    if single:
        zt = ad.reshape(zt, (1, zt.size))
    if zt.ndim != 2:
        raise ShapeError(f"ode_integrate: state must be a vector or batch, "
                         f"got shape {zt.shape}")
    if method == "rk4":
        traj, evals = _rk4(f, zt, t)
    elif method == "dopri":
        traj, evals = _dopri(f, zt, t, atol, rtol)
    else:
        raise ParameterError(f"unknown method {method!r}")
    if single:
        traj = [ad.reshape(z, (z.size,)) for z in traj]
    return ODEResult(traj[-1], traj, t, evals, method)


def _rk4(f, z, t):
    traj = [z]
    evals = 0
    for k in range(len(t) - 1):
        h = float(t[k + 1] - t[k])
        t0 = float(t[k])
        k1 = f(z, t0)
        k2 = f(ad.add(z, ad.mul(k1, h / 2.0)), t0 + h / 2.0)
        k3 = f(ad.add(z, ad.mul(k2, h / 2.0)), t0 + h / 2.0)
        k4 = f(ad.add(z, ad.mul(k3, h)), t0 + h)
        evals += 4
        incr = ad.add(ad.add(k1, ad.mul(ad.add(k2, k3), 2.0)), k4)
        z = ad.add(z, ad.mul(incr, h / 6.0))
        traj.append(z)
    return traj, evals


# Dormand-Prince 4(5) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)


def _dopri(f, z, t, atol, rtol):
    t_end = float(t[-1])
    segments = []  # (t0, t1, z0, z1, f0, f1) for dense output
    evals = 0
    now = 0.0
    k1 = f(z, 0.0)
    evals += 1
    h = t_end / 10.0
    while now < t_end:
        h = min(h, t_end - now)
        if h < _STIFF_H_MIN:
            raise StiffnessError(
                f"adaptive step fell below {_STIFF_H_MIN:g} at t={now:.6g}; "
                "the field is too stiff for this integrator")
        ks = [k1]
        for stage in range(1, 7):
            zs = z
            for a, kj in zip(_DP_A[stage], ks):
                if a != 0.0:
                    zs = ad.add(zs, ad.mul(kj, a * h))
            ks.append(f(zs, now + _DP_C[stage] * h))
            evals += 1
        # 5th-order solution; stage 7 evaluates the field there (FSAL)
        z_new = z
        for b, kj in zip(_DP_B5, ks):
            if b != 0.0:
                z_new = ad.add(z_new, ad.mul(kj, b * h))
        err = np.zeros_like(z.array)
        for b5, b4, kj in zip(_DP_B5, _DP_B4, ks):
            err = err + (b5 - b4) * h * kj.array
        scale = atol + rtol * np.maximum(np.abs(z.array), np.abs(z_new.array))
        with np.errstate(invalid="ignore", over="ignore"):
            ratio = float(np.sqrt(np.mean((err / scale) ** 2)))
        if math.isfinite(ratio) and ratio <= 1.0:
            segments.append((now, now + h, z, z_new, ks[0], ks[6]))
            z = z_new
            k1 = ks[6]  # first-same-as-last
            now = now + h
            grow = 5.0 if ratio == 0.0 else min(5.0, 0.9 * ratio ** -0.2)
            h = h * grow
        else:
            shrink = 0.2 if not math.isfinite(ratio) else \
                max(0.2, 0.9 * ratio ** -0.2)
            h = h * shrink

    traj = [segments[0][2]]
    si = 0
    for tk in t[1:]:
        while segments[si][1] < tk - 1e-12 * max(1.0, t_end):
            si += 1
        t0, t1, za, zb, fa, fb = segments[si]
        if abs(tk - t1) <= 1e-12 * max(1.0, t_end):
            traj.append(zb)
            continue
        hseg = t1 - t0
        s = (tk - t0) / hseg
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        zk = ad.add(ad.add(ad.mul(za, h00), ad.mul(fa, h10 * hseg)),
                    ad.add(ad.mul(zb, h01), ad.mul(fb, h11 * hseg)))
        traj.append(zk)
    return traj, evals


# -------------------------------------------------------------- losses

@dataclass
class TopoTerm:
    """One topology-loss evaluation: tape scalar, raw gradient, diagram."""
    loss: Tensor
    grad: np.ndarray
    diagram: PersistenceDiagram


def topo_term(z_batch, lam: float = LAMBDA_DEFAULT,
              eps_min: float = EPS_MIN_DEFAULT, max_dim: int = 1) -> TopoTerm:
    """topo_loss plus the pieces a training loop logs anyway.

    Returns the loss tensor together with d(loss)/d(coords) and the
    persistence diagram from the same computation, so monitoring does
    not pay for a second reduction.
    """
    if lam < 0.0 or eps_min < 0.0:
        raise ParameterError("lam and eps_min must be nonnegative")
    if max_dim not in (1, 2):
        raise ParameterError("max_dim must be 1 or 2")
    zt = as_tensor(z_batch)
    if zt.ndim != 2:
        raise ShapeError(f"topo_loss: expected (n, d) batch, got {zt.shape}")
    if zt.shape[0] < 4:
        raise InsufficientPointsError(
            f"topo_loss needs at least 4 points, got {zt.shape[0]}; the "
            "diagram of a smaller batch is degenerate")
    pc = PointCloud(zt.array)
    pd = compute_persistence(rips_filtration(pc, max_dim=max_dim))
    grads = diagram_gradients(pd, pc, eps_min=eps_min)
    value = 0.0
    dcoords = np.zeros_like(zt.array)
    for i, g in grads.items():
        life = float(pd.deaths[i] - pd.births[i])
        sign = 1.0 if int(pd.dims[i]) == 0 else -lam
        value += sign * life * life
        dcoords += (2.0 * sign * life) * g
    loss = ad._make("topo_loss", (zt,), lambda g: (g * dcoords,),
                    np.float64(value))
    return TopoTerm(loss, dcoords, pd)


def topo_loss(z_batch, lam: float = LAMBDA_DEFAULT,
              eps_min: float = EPS_MIN_DEFAULT, max_dim: int = 1) -> Tensor:
    """Connectivity-minus-loops penalty over a batch of states.

    Sum of squared component lifetimes minus lam times the sum of
    squared loop (and, with max_dim=2, void) lifetimes; features shorter
    than eps_min contribute neither value nor gradient. Pulls the state
    cloud together while rewarding persistent cycles.
    """
    return topo_term(z_batch, lam=lam, eps_min=eps_min, max_dim=max_dim).loss


def total_loss(task_loss, topo=None, alpha: float = ALPHA_DEFAULT) -> Tensor:
    """task + alpha * topo; alpha=0 (or no topo term) is the plain task loss."""
    if alpha < 0.0:
        raise ParameterError("alpha must be nonnegative")
    task = as_tensor(task_loss)
    if alpha == 0.0 or topo is None:
        return task
    return ad.add(task, ad.mul(as_tensor(topo), alpha))


# ---------------------------------------------------------- diagnostics

def ns_projection(dim: int, d1: int, d2: int, seed: int = 0) -> np.ndarray:
    """Fixed orthonormal map from a dim-vector to the d1*d2 grid.

    Sampled once per experiment seed and then reused, so the entropy
    diagnostic is comparable across steps of one run.
    """
    dd = d1 * d2
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 31, dim, dd]))
    g = rng.normal(size=(max(dim, dd), min(dim, dd)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]
    return q.T if dim >= dd else q


def ns_entropy(z, d1: int, d2: int, projection=None) -> float:
    """Entanglement entropy of a fused state, in nats.

    Reshapes the state to d1 x d2, takes its singular values, and
    returns the Shannon entropy of the normalized squared spectrum.
    Zero iff the state is a pure outer product; at most ln min(d1, d2).
    """
    arr = z.array if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    arr = arr.reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NumericError("ns_entropy: state has non-finite entries")
    dd = d1 * d2
    if arr.size != dd:
        if projection is None:
            raise ShapeError(
                f"state has {arr.size} entries, grid needs {dd}; configure "
                "a fixed projection (ns_projection) for this model")
        projection = np.asarray(projection, dtype=np.float64)
        if projection.shape != (dd, arr.size):
            raise ShapeError(
                f"projection shape {projection.shape} does not map "
                f"{arr.size} -> {dd}")
        arr = projection @ arr
    if not np.any(arr):
        raise DegenerateDataError(
            "ns_entropy is undefined for the all-zero state")
    s = np.linalg.svd(arr.reshape(d1, d2), compute_uv=False)
    p = s * s
    p = p / p.sum()
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())


def structural_tension(pd: PersistenceDiagram) -> float:
    """Ratio of total loop persistence to total component persistence.

    Finite features only; the denominator is cushioned by 1e-8 so a
    loop-free cloud gives exactly 0 and nothing divides by zero.
    """
    b0 = float(pd.lifetimes(0).sum())
    b1 = float(pd.lifetimes(1).sum())
    return b1 / (b0 + 1e-8)


def cloud_tension(points, max_dim: int = 1) -> float:
    """structural_tension of the Rips diagram of a raw point cloud."""
    pd = compute_persistence(rips_filtration(PointCloud(points),
                                             max_dim=max_dim))
    return structural_tension(pd)


# ------------------------------------------------------- alpha schedule

class AlphaSchedule:
    """Weight schedule for the topological term.

    constant: always alpha0. linear: decays from alpha0 to floor over
    total_steps. step: stays at its current value but halves (never
    below floor) every time the observed entanglement entropy exceeds
    the upper guard threshold, so an already-entangled model stops
    being pushed.
    """

    def __init__(self, alpha0: float = ALPHA_DEFAULT, decay_mode: str = "constant",
                 floor: float = 0.0, total_steps: int = 1000,
                 kappa_star: float | None = None,
                 kappa_double_star: float | None = None):
        if not (alpha0 >= floor >= 0.0):
            raise ParameterError("need alpha0 >= floor >= 0")
        if decay_mode not in ("constant", "linear", "step"):
            raise ParameterError(f"unknown decay_mode {decay_mode!r}")
        if decay_mode == "step" and kappa_double_star is None:
            raise ParameterError(
                "step mode needs the upper guard threshold kappa_double_star")
        if total_steps < 1:
            raise ParameterError("total_steps must be positive")
        self.alpha0 = float(alpha0)
        self.decay_mode = decay_mode
        self.floor = float(floor)
        self.total_steps = int(total_steps)
        self.kappa_star = kappa_star
        self.kappa_double_star = kappa_double_star
        self._current = float(alpha0)

    def value(self, step: int, ns: float | None = None) -> float:
        if self.decay_mode == "constant":
            return self.alpha0
        if self.decay_mode == "linear":
            frac = min(1.0, max(0, step) / self.total_steps)
            return self.alpha0 + (self.floor - self.alpha0) * frac
        if ns is not None and ns > self.kappa_double_star:
            self._current = max(self.floor, self._current / 2.0)
        return self._current


# ------------------------------------------------------ gradient health

@dataclass
class GradientHealthLog:
    norms: np.ndarray
    medians: np.ndarray
    flags: np.ndarray
    window_fraction: np.ndarray
    remediation: bool
    remediation_step: int | None
    window: int = 100
    flag_factor: float = 10.0
    fraction_threshold: float = 0.05

    @property
    def n_flags(self) -> int:
        return int(self.flags.sum())


def gradient_health(step_norms, window: int = 100, flag_factor: float = 10.0,
                    fraction_threshold: float = 0.05) -> GradientHealthLog:
    """Spike monitor for the topological gradient norms.

    A step is flagged when its norm exceeds flag_factor times the median
    of the trailing window (the step itself included, so a constant
    series never flags). window_fraction counts flags in the trailing
    window against the full window length; once it passes
    fraction_threshold the log carries a remediation signal, meaning the
    run should lower the topological weight or raise the lifetime floor.
    """
    norms = np.asarray(step_norms, dtype=np.float64).reshape(-1)
    if len(norms) == 0:
        raise ParameterError("gradient_health needs at least one step")
    if not np.all(np.isfinite(norms)) or np.any(norms < 0):
        raise NumericError("gradient norms must be finite and nonnegative")
    n = len(norms)
    medians = np.empty(n)
    flags = np.zeros(n, dtype=bool)
    frac = np.empty(n)
    for i in range(n):
        lo = max(0, i - window + 1)
        medians[i] = np.median(norms[lo:i + 1])
        flags[i] = norms[i] > flag_factor * medians[i]
        frac[i] = flags[lo:i + 1].sum() / window
    hot = np.nonzero(frac > fraction_threshold)[0]
    return GradientHealthLog(
        norms=norms, medians=medians, flags=flags, window_fraction=frac,
        remediation=len(hot) > 0,
        remediation_step=int(hot[0]) if len(hot) else None,
        window=window, flag_factor=flag_factor,
        fraction_threshold=fraction_threshold)


# ---------------------------------------------------------- checkpoints

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(params: ModelParams, path, extra_config=None) -> None:
    """Flat float64 parameter dump plus a JSON sidecar describing it."""
    named = params.named_parameters()
    flat = np.concatenate([t.array.reshape(-1) for _, t in named])
    cfg = params.config()
    if extra_config:
        cfg = {**cfg, **dict(extra_config)}
    sidecar = {
        "format": "model-checkpoint-v1",
        "shapes": [[n, list(t.shape)] for n, t in named],
        "n_params": params.n_params,
        "seed": params.seed,
        "config": cfg,
        "config_hash": config_hash(cfg),
    }
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(flat.astype("<f8").tobytes())
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Rebuild (ModelParams, sidecar) from a dump written by save_checkpoint."""
    path = str(path)
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    if sidecar.get("format") != "model-checkpoint-v1":
        raise ParameterError(f"{path}: not a model checkpoint")
    cfg = sidecar["config"]
    params = ModelParams(cfg["d1"], cfg["d2"], cfg["dim"], cfg["hidden"],
                         cfg["out_dim"], mode=cfg["mode"], rank=cfg["rank"],
                         seed=cfg["seed"], allow_low_rank=True)
    flat = np.fromfile(path, dtype="<f8")
    if flat.size != params.n_params:
        raise ParameterError(
            f"{path}: holds {flat.size} values, model wants {params.n_params}")
    if not np.all(np.isfinite(flat)):
        raise NumericError(f"{path}: checkpoint contains non-finite values")
    at = 0
    for (name, shape), (_, t) in zip(sidecar["shapes"],
                                     params.named_parameters()):
        size = int(np.prod(shape))
        t.array = flat[at:at + size].reshape(shape)
        at += size
    return params, sidecar
