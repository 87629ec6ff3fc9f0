"""Deterministic synthetic two-modality datasets with controlled entanglement.

Each sample carries two hidden fair bits. Modality x encodes the first
bit, modality y the second, and the learning target is their XOR (plus
noise), so no additive function of the two modalities can beat chance
unless `entanglement` > 0 leaks the interaction bit into the features.
Everything is a pure function of (seed, family_id, n, entanglement).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .exceptions import ParameterError
from .optim import Adam

FEATURE_DIM = 64
LABEL_NOISE = 0.1     # keeps Bayes accuracy of the binarized target ~1
DISTRACTOR_SCALE = 0.3
OOD_ANGLE_PER_UNIT = 0.25  # radians of basis rotation per unit of shift

# Stream tags keep basis draws and sample draws on unrelated substreams.
_BASIS_STREAM = 7
_PROBE_STREAM = 11

_FAMILY_RE = re.compile(r"^xor(\d+)$")


@dataclass
class SyntheticDataset:
    """Two feature blocks, a continuous target, and the hidden bits.

    latent holds one row per sample: (first bit, second bit, XOR).
    labels = XOR bit + N(0, 0.1) noise.
    """
    x: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    latent: np.ndarray
    seed: int
    family_id: str
    entanglement: float

    @property
    def n(self) -> int:
        return self.x.shape[0]


def _family_index(family_id) -> int:
    if isinstance(family_id, str) and family_id.startswith("graph"):
        raise ParameterError(
            "family_id 'graph*' is a reserved slot for a graph-community "
            "generator that is not implemented")
    m = _FAMILY_RE.match(family_id) if isinstance(family_id, str) else None
    if m is None:
        raise ParameterError(
            f"unknown family_id {family_id!r}; expected 'xor<k>'")
    return int(m.group(1))


def family_bases(family_id):
    """The family's two orthonormal 64x64 encoding bases (x, then y).

    Bases depend only on the family, never on a dataset seed, so every
    dataset of one family lives in the same feature frame.
    """
    idx = _family_index(family_id)
    rng = np.random.default_rng(np.random.SeedSequence([_BASIS_STREAM, idx]))
    out = []
    for _ in range(2):
        g = rng.normal(size=(FEATURE_DIM, FEATURE_DIM))
        q, r = np.linalg.qr(g)
        out.append(q * np.sign(np.diag(r))[None, :])  # unique sign choice
    return out[0], out[1]


def generate(family_id, n, seed, entanglement) -> SyntheticDataset:
    """Draw a dataset of `n` samples from one encoding family.

    The latent cell counts are stratified (each of the four bit pairs
    appears floor(n/4) or one more time), so the XOR target is balanced
    to within 1/(2n) for every seed. Feature layout per modality: one
    basis direction carries the own bit at +-1, a second carries the
    XOR bit at +-entanglement, the remaining 62 carry distractor noise.

    Sample draws depend only on (seed, n), not on the family, so two
    families generated with equal seeds pose the identical task in two
    unrelated feature frames. That is what makes transfer pairs matched.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ParameterError("n must be a positive integer")
    ent = float(entanglement)
    if not (0.0 <= ent <= 1.0) or not math.isfinite(ent):
        raise ParameterError("entanglement must lie in [0, 1]")
    qx, qy = family_bases(family_id)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n)]))

    cells = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int8)
    counts = np.full(4, n // 4)
    counts[: n % 4] += 1
    ab = np.repeat(cells, counts, axis=0)
    ab = ab[rng.permutation(n)]
    a, b = ab[:, 0], ab[:, 1]
    c = a ^ b

    coef_x = np.zeros((n, FEATURE_DIM))
    coef_x[:, 0] = 2.0 * a - 1.0
    coef_x[:, 1] = ent * (2.0 * c - 1.0)
    coef_x[:, 2:] = rng.normal(0.0, DISTRACTOR_SCALE, (n, FEATURE_DIM - 2))
    coef_y = np.zeros((n, FEATURE_DIM))
    coef_y[:, 0] = 2.0 * b - 1.0
    coef_y[:, 1] = ent * (2.0 * c - 1.0)
    coef_y[:, 2:] = rng.normal(0.0, DISTRACTOR_SCALE, (n, FEATURE_DIM - 2))

    labels = c + rng.normal(0.0, LABEL_NOISE, n)
    latent = np.stack([a, b, c], axis=1).astype(np.int8)
    return SyntheticDataset(coef_x @ qx.T, coef_y @ qy.T, labels, latent,
                            int(seed), family_id, ent)


# ---------------------------------------------------------------- probes

def _mlp_params(rng, d_in: int, hidden: int):
    w1 = ad.Tensor(rng.normal(0.0, 1.0 / math.sqrt(d_in), (d_in, hidden)),
                   requires_grad=True)
    b1 = ad.Tensor(np.zeros(hidden), requires_grad=True)
    w2 = ad.Tensor(rng.normal(0.0, 1.0 / math.sqrt(hidden), (hidden, 1)),
                   requires_grad=True)
    b2 = ad.Tensor(np.zeros(1), requires_grad=True)
    return [w1, b1, w2, b2]


def _mlp_logit(params, features: np.ndarray):
    w1, b1, w2, b2 = params
    h = ad.silu(ad.add(ad.matmul(ad.Tensor(features), w1), b1))
    return ad.add(ad.matmul(h, w2), b2)


def separable_ceiling(ds: SyntheticDataset, hidden: int = 32,
                      steps: int = 300, lr: float = 0.01) -> float:
    """Held-out accuracy of the best additive model f(x) + g(y).

    Trains one MLP probe per modality, combined only by summing their
    logits, on the even-index half; reports accuracy on the odd-index
    half. For an XOR target with no leakage this cannot beat chance, so
    the returned value is the separable-approach ceiling.
    """
    if ds.n < 200:
        raise ParameterError("separable_ceiling needs n >= 200")
    t = (np.asarray(ds.labels, dtype=np.float64) > 0.5).astype(np.float64)
    tr = np.arange(0, ds.n, 2)
    te = np.arange(1, ds.n, 2)
    t_tr, t_te = t[tr], t[te]
    if t_tr.min() == t_tr.max():
        p = float(t_te.mean())
        return max(p, 1.0 - p)

    rng = np.random.default_rng(
        np.random.SeedSequence([ds.seed, _PROBE_STREAM, ds.n]))
    px = _mlp_params(rng, FEATURE_DIM, hidden)
    py = _mlp_params(rng, FEATURE_DIM, hidden)
    params = px + py
    opt = Adam(params, lr=lr)
    x_tr, y_tr = ds.x[tr], ds.y[tr]
    tcol = t_tr[:, None]
    for _ in range(steps):
        with ad.Tape() as tape:
            z = ad.add(_mlp_logit(px, x_tr), _mlp_logit(py, y_tr))
            # logistic loss in its softplus form, stable for any logit
            loss = ad.mean(ad.sub(ad.softplus(z), ad.mul(z, tcol)))
            tape.backward(loss)
        opt.step()
        opt.zero_grad()
    z_te = ad.add(_mlp_logit(px, ds.x[te]), _mlp_logit(py, ds.y[te])).array
    return float(np.mean((z_te[:, 0] > 0.0) == (t_te > 0.5)))


# ------------------------------------------------------- transfer / ood

def transfer_pair(seed):
    """Two family ids with the same latent semantics, unrelated bases."""
    s = int(seed)
    if s < 0:
        raise ParameterError("transfer_pair seed must be nonnegative")
    return f"xor{2 * s}", f"xor{2 * s + 1}"


def ood_variant(ds: SyntheticDataset, shift) -> SyntheticDataset:
    """Scaled and rotated copy of a dataset, labels untouched.

    Feature magnitudes grow by (1 + shift); the feature frame rotates
    by OOD_ANGLE_PER_UNIT * shift radians in each coordinate pair, so a
    model frozen on the clean frame sees progressively misaligned
    inputs as shift grows.
    """
    s = float(shift)
    if not (s >= 0.0 and math.isfinite(s)):
        raise ParameterError("shift must be finite and >= 0")
    if s == 0.0:
        return replace(ds, x=ds.x.copy(), y=ds.y.copy(),
                       labels=ds.labels.copy(), latent=ds.latent.copy())
    theta = OOD_ANGLE_PER_UNIT * s
    scale = 1.0 + s
    return replace(ds, x=scale * _paired_rotation(ds.x, theta),
                   y=scale * _paired_rotation(ds.y, theta),
                   labels=ds.labels.copy(), latent=ds.latent.copy())


def _paired_rotation(m: np.ndarray, theta: float) -> np.ndarray:
    out = np.array(m, dtype=np.float64)
    even = out[:, 0::2].copy()
    odd = out[:, 1::2].copy()
    c, s = math.cos(theta), math.sin(theta)
    out[:, 0::2] = c * even - s * odd
    out[:, 1::2] = s * even + c * odd
    return out


# ------------------------------------------------------------ exports

def dataset_to_csv(ds: SyntheticDataset, path_or_file) -> None:
    """One row per sample: x features, y features, label."""
    header = ([f"x{i}" for i in range(FEATURE_DIM)]
              + [f"y{i}" for i in range(FEATURE_DIM)]
              + ["label"])
    body = np.concatenate([ds.x, ds.y, ds.labels[:, None]], axis=1)
    if hasattr(path_or_file, "write"):
        np.savetxt(path_or_file, body, delimiter=",", comments="",
                   header=",".join(header), fmt="%.17g")
    else:
        with open(path_or_file, "w") as fh:
            np.savetxt(fh, body, delimiter=",", comments="",
                       header=",".join(header), fmt="%.17g")


def save_dataset(ds: SyntheticDataset, path) -> None:
    """Compact binary: one JSON header line, then raw little-endian data."""
    header = {
        "format": "synthetic-dataset-v1",
        "n": ds.n,
        "feature_dim": FEATURE_DIM,
        "family_id": ds.family_id,
        "seed": ds.seed,
        "entanglement": ds.entanglement,
        "arrays": [["x", [ds.n, FEATURE_DIM], "<f8"],
                   ["y", [ds.n, FEATURE_DIM], "<f8"],
                   ["labels", [ds.n], "<f8"],
                   ["latent", [ds.n, 3], "|i1"]],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        for name, _, code in header["arrays"]:
            fh.write(np.ascontiguousarray(
                getattr(ds, name)).astype(code).tobytes())


def load_dataset(path) -> SyntheticDataset:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != "synthetic-dataset-v1":
            raise ParameterError(f"{path}: not a synthetic-dataset file")
        arrays = {}
        for name, shape, code in header["arrays"]:
            dt = np.dtype(code)
            count = int(np.prod(shape))
            buf = fh.read(dt.itemsize * count)
            if len(buf) != dt.itemsize * count:
                raise ParameterError(f"{path}: truncated array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype=dt).reshape(shape).copy()
    return SyntheticDataset(arrays["x"], arrays["y"], arrays["labels"],
                            arrays["latent"], int(header["seed"]),
                            header["family_id"],
                            float(header["entanglement"]))
