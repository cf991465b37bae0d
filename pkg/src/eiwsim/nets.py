"""Minimal dense-network toolkit: manual backprop, Adam, gradient checking.

Architectures are fixed stacks of dense layers (relu / tanh / identity),
optionally with residual skips on same-width hidden layers.  No autodiff
graph: backward() recomputes the forward pass and applies the chain rule
layer by layer.  All parameters live in plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, FileFormatError, TrainingError

RELU = "relu"
TANH = "tanh"
IDENTITY = "identity"
_ACTS = (RELU, TANH, IDENTITY)

# capacity tiers standing in for backbones of different sizes
TIERS = {
    "small": ([32], False),
    "medium": ([128, 128], False),
    "large": ([256, 256, 256], True),
}


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    act: str
    residual: bool = False


@dataclass
class Net:
    layers: list[Layer]

    @property
    def n_params(self) -> int:
        return sum(l.w.size + l.b.size for l in self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    def descriptor(self) -> str:
        dims = [self.in_dim] + [l.w.shape[0] for l in self.layers]
        acts = ",".join(l.act for l in self.layers)
        res = ",".join("1" if l.residual else "0" for l in self.layers)
        return f"dims={','.join(str(d) for d in dims)} acts={acts} res={res}"

    def copy(self) -> "Net":
        return Net([Layer(l.w.copy(), l.b.copy(), l.act, l.residual)
                    for l in self.layers])

    def assert_finite(self) -> None:
        for l in self.layers:
            if not (np.isfinite(l.w).all() and np.isfinite(l.b).all()):
                raise TrainingError("non-finite network parameters")


def build_net(in_dim: int, hidden: list[int], out_dim: int, seed: int,
              hidden_act: str = TANH, residual: bool = False) -> Net:
    """Glorot-uniform hidden weights; zero output weights and all-zero biases."""
    from . import rng

    dims = [in_dim] + list(hidden) + [out_dim]
    if any(d < 1 for d in dims):
        raise ConfigError(f"invalid layer dims {dims}")
    if hidden_act not in _ACTS:
        raise ConfigError(f"unknown nonlinearity '{hidden_act}'")
    gen = rng.stream(seed, "net-init")
    layers: list[Layer] = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        last = i == len(dims) - 2
        if last:
            w = np.zeros((fan_out, fan_in))
        else:
            a = np.sqrt(6.0 / (fan_in + fan_out))
            w = gen.uniform(-a, a, size=(fan_out, fan_in))
        res = residual and not last and fan_in == fan_out
        layers.append(Layer(w, np.zeros(fan_out),
                            IDENTITY if last else hidden_act, res))
    return Net(layers)


def build_tier_net(tier: str, in_dim: int, out_dim: int, seed: int) -> Net:
    if tier not in TIERS:
        raise ConfigError(f"unknown tier '{tier}' (choose from {sorted(TIERS)})")
    hidden, residual = TIERS[tier]
    return build_net(in_dim, hidden, out_dim, seed, residual=residual)


def _apply_act(z: np.ndarray, act: str) -> np.ndarray:
    if act == RELU:
        return np.maximum(z, 0.0)
    if act == TANH:
        return np.tanh(z)
    return z


def forward(net: Net, x: np.ndarray) -> np.ndarray:
    """Accepts (d,) or (n, d); returns matching shape."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.in_dim:
        raise ContractError(f"input dim {h.shape[1]} != net input {net.in_dim}")
    for l in net.layers:
        z = h @ l.w.T + l.b
        a = _apply_act(z, l.act)
        h = a + h if l.residual else a
    return h[0] if single else h


def backward(net: Net, x: np.ndarray, output_grad: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact reverse-mode gradients, summed over the batch dimension.

    output_grad is dL/d(output) with the same shape forward() returns.
    Returns [(dW, db), ...] aligned with net.layers.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(output_grad, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    g = g[None, :] if single else g
    if h.shape[1] != net.in_dim:
        raise ContractError("input dim mismatch in backward")
    if g.shape != (h.shape[0], net.out_dim):
        raise ContractError("output_grad shape mismatch in backward")

    inputs = []
    acts = []
    for l in net.layers:
        inputs.append(h)
        z = h @ l.w.T + l.b
        a = _apply_act(z, l.act)
        acts.append(a if l.act == TANH else z)
        h = a + h if l.residual else a

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        l = net.layers[i]
        if l.act == RELU:
            dz = g * (acts[i] > 0.0)
        elif l.act == TANH:
            dz = g * (1.0 - acts[i] ** 2)
        else:
            dz = g
        grads[i] = (dz.T @ inputs[i], dz.sum(axis=0))
        gx = dz @ l.w
        g = gx + g if l.residual else gx
    return grads


# ---------------------------------------------------------------- optimizer

@dataclass
class OptState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def opt_step(net: Net, grads: list[tuple[np.ndarray, np.ndarray]],
             opt: OptState) -> tuple[Net, OptState]:
    """One Adam step in place; deterministic parameter order (layer, w then b)."""
    flat_params = []
    flat_grads = []
    for l, (dw, db) in zip(net.layers, grads):
        flat_params.extend([l.w, l.b])
        flat_grads.extend([dw, db])
    for g in flat_grads:
        if not np.isfinite(g).all():
            raise TrainingError("non-finite gradient")
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in flat_params]
        opt.v = [np.zeros_like(p) for p in flat_params]
    opt.t += 1
    bc1 = 1.0 - opt.beta1 ** opt.t
    bc2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(flat_params, flat_grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
    return net, opt


# ---------------------------------------------------------------- utilities

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def finite_diff_check(net: Net, x: np.ndarray, tolerance: float = 1e-4,
                      step: float = 1e-4, seed: int = 0) -> dict:
    """Central-difference check of backward() on scalar f = output . v.

    Returns {'max_rel_error': float, 'passed': bool}.  Only for small nets.
    """
    from . import rng

    if net.n_params > 10_000:
        raise ContractError("finite_diff_check limited to <= 10,000 parameters")
    gen = rng.stream(seed, "fd-probe")
    v = gen.standard_normal(net.out_dim)
    analytic = backward(net, x, v)

    max_rel = 0.0
    for l, (dw, db) in zip(net.layers, analytic):
        for arr, grad in ((l.w, dw), (l.b, db)):
            flat = arr.ravel()
            gflat = grad.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                fp = float(forward(net, x) @ v)
                flat[j] = orig - step
                fm = float(forward(net, x) @ v)
                flat[j] = orig
                num = (fp - fm) / (2.0 * step)
                rel = abs(gflat[j] - num) / max(1e-6, abs(gflat[j]), abs(num))
                max_rel = max(max_rel, rel)
    return {"max_rel_error": max_rel, "passed": max_rel <= tolerance}


# ---------------------------------------------------------------- checkpoints

NET_HEADER = "eiw-net v1"


def save_net(net: Net, path: str) -> None:
    """Versioned text checkpoint: header, descriptor, one line per array."""
    lines = [NET_HEADER, net.descriptor()]
    for l in net.layers:
        for arr in (l.w, l.b):
            lines.append(" ".join(f"{v:.17g}" for v in arr.ravel()))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_net(path: str) -> Net:
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != NET_HEADER:
        raise FileFormatError(f"{path}: missing '{NET_HEADER}' header")
    try:
        fields = dict(part.split("=") for part in lines[1].split())
        dims = [int(d) for d in fields["dims"].split(",")]
        acts = fields["acts"].split(",")
        res = [r == "1" for r in fields["res"].split(",")]
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}: bad descriptor line") from exc
    layers = []
    row = 2
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = np.array(lines[row].split(), dtype=np.float64).reshape(fan_out, fan_in)
        b = np.array(lines[row + 1].split(), dtype=np.float64)
        if b.shape != (fan_out,):
            raise FileFormatError(f"{path}: bias length mismatch at layer {i}")
        layers.append(Layer(w, b, acts[i], res[i]))
        row += 2
    return Net(layers)
