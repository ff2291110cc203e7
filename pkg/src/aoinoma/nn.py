"""Small dense networks with hand-rolled reverse-mode gradients.

Float64 multilayer perceptrons with ReLU hidden layers and either an
identity or an elementwise-logistic output. Besides plain
forward/backward, the module provides tangent (directional-derivative)
propagation through both passes, which is what the exact meta-gradient
mode needs: a Hessian-vector product is the tangent of the gradient.

Optimizers: bias-corrected Adam for single-task training, plain gradient
descent for the meta inner loop, and Polyak soft updates for targets.

Parameter snapshots serialize to a small versioned binary container: a
magic tag, format version, a JSON architecture header, then the layer
tensors as row-major little-endian float64.
"""

import json
import struct

import numpy as np

MAGIC = b"AONM"
FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Dense net: ReLU hidden layers, identity or sigmoid output."""

    def __init__(self, sizes, output="identity", rng=None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("identity", "sigmoid"):
            raise ValueError("output must be 'identity' or 'sigmoid'")
        self.sizes = tuple(int(s) for s in sizes)
        self.output = output
        self.weights = []
        self.biases = []
        rng = rng or np.random.default_rng()
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.output = self.output
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def forward(self, x):
        return forward_cached(self, x)[0]

    def __call__(self, x):
        return self.forward(x)


def zeros_like_grads(net):
    return ([np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases])


def forward_cached(net, x):
    """Run the net; cache inputs and pre-activations for backward."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if a.shape[1] != net.sizes[0]:
        raise ValueError(f"input width {a.shape[1]} != {net.sizes[0]}")
    acts, zs = [a], []
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        zs.append(z)
        if l < last:
            a = np.maximum(z, 0.0)
        elif net.output == "sigmoid":
            a = _sigmoid(z)
        else:
            a = z
        acts.append(a)
    return a, (acts, zs)


def backward(net, cache, upstream):
    """Exact reverse-mode gradients given d(loss)/d(output).

    Returns ((dW list, db list), d(loss)/d(input)).
    """
    acts, zs = cache
    g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    last = net.n_layers - 1
    if net.output == "sigmoid":
        y = acts[-1]
        g = g * y * (1.0 - y)
    gw = [None] * net.n_layers
    gb = [None] * net.n_layers
    for l in range(last, -1, -1):
        gw[l] = acts[l].T @ g
        gb[l] = g.sum(axis=0)
        g = g @ net.weights[l].T
        if l > 0:
            g = g * (zs[l - 1] > 0.0)
    return (gw, gb), g


def backward_with_tangent(net, x, upstream, direction, x_tangent=None,
                          upstream_tangent=None):
    """Backward pass plus its directional derivative along ``direction``.

    ``direction`` is a (dW list, db list) tangent of the parameters (or
    None for a pure input tangent). The returned gradient tangent is the
    Hessian-vector product when upstream is the (constant or linearized)
    loss gradient at the output. Also returns the input-gradient and its
    tangent for chaining through composed networks.
    """
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    da = np.zeros_like(a) if x_tangent is None else np.atleast_2d(
        np.asarray(x_tangent, dtype=np.float64))
    dw_dir, db_dir = direction if direction is not None else zeros_like_grads(net)

    # forward with tangents
    acts, zs, dacts, dzs = [a], [], [da], []
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        dz = da @ w + a @ dw_dir[l] + db_dir[l]
        zs.append(z)
        dzs.append(dz)
        if l < last:
            mask = z > 0.0
            a, da = z * mask, dz * mask
        elif net.output == "sigmoid":
            a = _sigmoid(z)
            da = a * (1.0 - a) * dz
        else:
            a, da = z, dz
        acts.append(a)
        dacts.append(da)

    g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    dg = np.zeros_like(g) if upstream_tangent is None else np.atleast_2d(
        np.asarray(upstream_tangent, dtype=np.float64))
    if net.output == "sigmoid":
        y, dy = acts[-1], dacts[-1]
        sp = y * (1.0 - y)                       # sigma'
        dsp = (1.0 - 2.0 * y) * dy               # tangent of sigma'
        g, dg = g * sp, dg * sp + g * dsp
    gw = [None] * net.n_layers
    gb = [None] * net.n_layers
    dgw = [None] * net.n_layers
    dgb = [None] * net.n_layers
    for l in range(last, -1, -1):
        gw[l] = acts[l].T @ g
        dgw[l] = dacts[l].T @ g + acts[l].T @ dg
        gb[l] = g.sum(axis=0)
        dgb[l] = dg.sum(axis=0)
        g_prev = g @ net.weights[l].T
        dg_prev = dg @ net.weights[l].T + g @ dw_dir[l].T
        if l > 0:
            mask = zs[l - 1] > 0.0
            g_prev = g_prev * mask
            dg_prev = dg_prev * mask             # ReLU has zero curvature a.e.
        g, dg = g_prev, dg_prev
    return (gw, gb), (dgw, dgb), g, dg


def forward_with_tangent(net, x, direction, x_tangent=None):
    """Output and its directional derivative along a parameter/input tangent."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    da = np.zeros_like(a) if x_tangent is None else np.atleast_2d(
        np.asarray(x_tangent, dtype=np.float64))
    dw_dir, db_dir = direction if direction is not None else zeros_like_grads(net)
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        dz = da @ w + a @ dw_dir[l] + db_dir[l]
        if l < last:
            mask = z > 0.0
            a, da = z * mask, dz * mask
        elif net.output == "sigmoid":
            a = _sigmoid(z)
            da = a * (1.0 - a) * dz
        else:
            a, da = z, dz
    return a, da


# -- parameter arithmetic ----------------------------------------------------

def grad_axpy(net, grads, scale):
    """New net with parameters net + scale * grads."""
    out = net.copy()
    gw, gb = grads
    for l in range(out.n_layers):
        out.weights[l] += scale * gw[l]
        out.biases[l] += scale * gb[l]
    return out


def grad_combine(grad_list, weights=None):
    """Elementwise weighted sum of gradient structures."""
    if not grad_list:
        raise ValueError("empty gradient list")
    if weights is None:
        weights = [1.0 / len(grad_list)] * len(grad_list)
    gw_out = [np.zeros_like(g) for g in grad_list[0][0]]
    gb_out = [np.zeros_like(g) for g in grad_list[0][1]]
    for (gw, gb), wgt in zip(grad_list, weights):
        for l in range(len(gw_out)):
            gw_out[l] += wgt * gw[l]
            gb_out[l] += wgt * gb[l]
    return gw_out, gb_out


def grad_scale(grads, scale):
    gw, gb = grads
    return [scale * g for g in gw], [scale * g for g in gb]


def sgd_step(net, grads, lr):
    """Plain gradient-descent step (meta inner loop)."""
    return grad_axpy(net, grads, -lr)


class AdamState:
    def __init__(self, net):
        self.m = zeros_like_grads(net)
        self.v = zeros_like_grads(net)
        self.t = 0


def adam_step(net, grads, state, lr):
    """Bias-corrected Adam update, in place on ``net``."""
    state.t += 1
    b1c = 1.0 - ADAM_BETA1 ** state.t
    b2c = 1.0 - ADAM_BETA2 ** state.t
    gw, gb = grads
    for group, params, gs in (("w", net.weights, gw), ("b", net.biases, gb)):
        ms = state.m[0] if group == "w" else state.m[1]
        vs = state.v[0] if group == "w" else state.v[1]
        for l, g in enumerate(gs):
            ms[l] *= ADAM_BETA1
            ms[l] += (1.0 - ADAM_BETA1) * g
            vs[l] *= ADAM_BETA2
            vs[l] += (1.0 - ADAM_BETA2) * g * g
            params[l] -= lr * (ms[l] / b1c) / (np.sqrt(vs[l] / b2c) + ADAM_EPS)
    return net


def soft_update(target, online, tau):
    """target <- tau * online + (1 - tau) * target, elementwise, in place."""
    if target.sizes != online.sizes or target.output != online.output:
        raise ValueError("architecture mismatch in soft update")
    for l in range(target.n_layers):
        target.weights[l] *= (1.0 - tau)
        target.weights[l] += tau * online.weights[l]
        target.biases[l] *= (1.0 - tau)
        target.biases[l] += tau * online.biases[l]
    return target


# -- flatten helpers (finite-difference checks, norms) ------------------------

def flatten_params(net):
    return np.concatenate([w.ravel() for w in net.weights] +
                          [b.ravel() for b in net.biases])


def set_flat_params(net, flat):
    idx = 0
    for w in net.weights:
        w[...] = flat[idx:idx + w.size].reshape(w.shape)
        idx += w.size
    for b in net.biases:
        b[...] = flat[idx:idx + b.size].reshape(b.shape)
        idx += b.size
    if idx != flat.size:
        raise ValueError("flat vector size mismatch")
    return net


def flatten_grads(grads):
    gw, gb = grads
    return np.concatenate([g.ravel() for g in gw] + [g.ravel() for g in gb])


def unflatten_like(net, flat):
    dup = net.copy()
    set_flat_params(dup, np.asarray(flat, dtype=np.float64))
    return ([w for w in dup.weights], [b for b in dup.biases])


# -- serialization ------------------------------------------------------------

def save_nets(path, nets):
    """Write named networks into one versioned binary container."""
    header = {"nets": [{"name": name, "sizes": list(net.sizes),
                        "output": net.output} for name, net in nets.items()]}
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for net in nets.values():
            for w, b in zip(net.weights, net.biases):
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_nets(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a parameter container")
        version, = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        hlen, = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        nets = {}
        for spec in header["nets"]:
            net = Mlp(spec["sizes"], output=spec["output"])
            for l, (fan_in, fan_out) in enumerate(zip(net.sizes[:-1], net.sizes[1:])):
                w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
                net.weights[l] = w.reshape(fan_in, fan_out).astype(np.float64).copy()
                b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
                net.biases[l] = b.astype(np.float64).copy()
            nets[spec["name"]] = net
        return nets
