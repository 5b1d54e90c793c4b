"""Independent reference implementations used as test oracles.

Nothing here calls the engine's kernels, rasters or cost model; the graph
IR is only read for its structure.  Numerics run in float64.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

# --------------------------------------------------------------------------
# per-op references


def ref_unary(kind, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(all="ignore"):
        return {
            "neg": lambda: -x,
            "square": lambda: x * x,
            "sqrt": lambda: np.sqrt(x),
            "exp": lambda: np.exp(x),
            "sigmoid": lambda: 1.0 / (1.0 + np.exp(-x)),
            "tanh": lambda: np.tanh(x),
            "relu": lambda: np.where(x > 0, x, 0.0),
        }[kind]()


def ref_binary(kind, a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    with np.errstate(all="ignore"):
        return {"add": a + b, "sub": a - b, "mul": a * b, "div": a / b, "max": np.maximum(a, b)}[kind]


def ref_reduce_sum(x, axis):
    x = np.asarray(x, dtype=np.float64)
    out_shape = x.shape[:axis] + x.shape[axis + 1:]
    out = np.zeros(out_shape)
    for idx in itertools.product(*(range(d) for d in x.shape)):
        out[idx[:axis] + idx[axis + 1:]] += x[idx]
    return out


def ref_matmul(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            out[i, j] = sum(a[i, k] * b[k, j] for k in range(a.shape[1]))
    return out


def ref_conv2d(x, w, stride=1, pad=0):
    x, w = np.asarray(x, dtype=np.float64), np.asarray(w, dtype=np.float64)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = (h + 2 * pad - kh) // stride + 1, (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for b_, oc, i, j in itertools.product(range(n), range(o), range(ho), range(wo)):
        acc = 0.0
        for ci, di, dj in itertools.product(range(c), range(kh), range(kw)):
            y, xx = i * stride + di - pad, j * stride + dj - pad
            if 0 <= y < h and 0 <= xx < wd:
                acc += x[b_, ci, y, xx] * w[oc, ci, di, dj]
        out[b_, oc, i, j] = acc
    return out


def ref_raster(raster, sources):
    """Per-coordinate loop over every region; unwritten slots stay zero."""
    flat = [np.asarray(s, dtype=np.float64).reshape(-1) for s in sources]
    out = np.zeros(math.prod(raster.out_shape))
    for r in raster.regions:
        for coord in itertools.product(*(range(d) for d in r.size)):
            s = r.src_view.offset + sum(a * b for a, b in zip(r.src_view.strides, coord))
            d = r.dst_view.offset + sum(a * b for a, b in zip(r.dst_view.strides, coord))
            out[d] = flat[r.src][s]
    return out.reshape(raster.out_shape)


def ref_transform(kind, params, inputs):
    """Naive semantics of each transform kind, straight from numpy."""
    x = inputs[0]
    if kind in ("transpose", "permute"):
        perm = params.get("perm")
        return np.transpose(x, perm if perm is not None else None).copy()
    if kind == "slice":
        index = tuple(slice(b, d if s == -1 else b + s)
                      for b, s, d in zip(params["begin"], params["size"], x.shape))
        return x[index].copy()
    if kind == "concat":
        return np.concatenate(inputs, axis=params.get("axis", 0))
    if kind == "reshape":
        return np.reshape(x, params["shape"]).copy()
    if kind == "broadcast":
        return np.broadcast_to(x, params["shape"]).copy()
    raise KeyError(kind)


def ref_elu(x, alpha=1.0):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, x, alpha * (np.exp(np.minimum(x, 0)) - 1))


def ref_avg_pool(x, kernel=2, stride=None, pad=0):
    kh, kw = (kernel, kernel) if np.isscalar(kernel) else kernel
    stride = stride if stride is not None else (kh, kw)
    sh, sw = (stride, stride) if np.isscalar(stride) else stride
    ph, pw = (pad, pad) if np.isscalar(pad) else pad
    x = np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    n, c, h, w = x.shape
    ho, wo = (h - kh) // sh + 1, (w - kw) // sw + 1
    out = np.zeros((n, c, ho, wo))
    for i in range(ho):
        for j in range(wo):
            out[:, :, i, j] = x[:, :, i * sh:i * sh + kh, j * sw:j * sw + kw].mean(axis=(2, 3))
    return out


def ref_layer_norm(x, gamma=None, beta=None, eps=1e-5):
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    y = (x - mean) / np.sqrt(var + eps)
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y


def ref_lstm_cell(x, h, c, w, u, b):
    """Standard LSTM cell, written one scalar at a time; gate order i, f, g, o."""
    x, h, c, w, u, b = (np.asarray(v, dtype=np.float64) for v in (x, h, c, w, u, b))
    batch, hidden = h.shape
    h2, c2 = np.zeros_like(h), np.zeros_like(c)

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    for n in range(batch):
        for k in range(hidden):
            z = []
            for gate in range(4):
                col = gate * hidden + k
                z.append(b[col] + sum(x[n, m] * w[m, col] for m in range(x.shape[1]))
                         + sum(h[n, m] * u[m, col] for m in range(hidden)))
            i, f, g, o = sig(z[0]), sig(z[1]), math.tanh(z[2]), sig(z[3])
            c2[n, k] = f * c[n, k] + i * g
            h2[n, k] = o * math.tanh(c2[n, k])
    return h2, c2


# --------------------------------------------------------------------------
# whole-graph interpreter

UNARY = ("neg", "square", "sqrt", "exp", "sigmoid", "tanh", "relu")
BINARY = ("add", "sub", "mul", "div", "max")
TRANSFORMS = ("transpose", "permute", "slice", "concat", "reshape", "broadcast")


def _order(graph):
    produced = {t: op for op in graph.operators for t in op.outputs}
    done, order = set(), []

    def visit(op):
        if op.id in done:
            return
        for t in op.inputs:
            if t in produced:
                visit(produced[t])
        done.add(op.id)
        order.append(op)

    for op in graph.operators:
        visit(op)
    return order


def interpret(graph, feeds, max_iterations=10_000):
    """Evaluate ``graph`` op by op in float64, including control flow."""
    env = {k: np.asarray(d.data, dtype=np.float64) for k, d in graph.tensors.items() if d.data is not None}
    env.update({k: np.asarray(v, dtype=np.float64) for k, v in feeds.items()})
    for op in _order(graph):
        args = [env[t] for t in op.inputs]
        a = op.attrs
        k = op.kind
        if k in UNARY:
            outs = [ref_unary(k, args[0])]
        elif k in BINARY:
            outs = [ref_binary(k, *args)]
        elif k == "reduce_sum":
            outs = [ref_reduce_sum(args[0], a.get("axis", 0))]
        elif k == "matmul":
            outs = [ref_matmul(*args)]
        elif k == "conv2d":
            outs = [ref_conv2d(*args, a.get("stride", 1), a.get("pad", 0))]
        elif k == "raster":
            outs = [ref_raster(a["raster"], args)]
        elif k in TRANSFORMS:
            outs = [ref_transform(k, a, args)]
        elif k == "elu":
            outs = [ref_elu(args[0], a.get("alpha", 1.0))]
        elif k == "avg-pool2d":
            outs = [ref_avg_pool(args[0], a.get("kernel", 2), a.get("stride"), a.get("pad", 0))]
        elif k == "layer-norm":
            outs = [ref_layer_norm(*args, eps=a.get("eps", 1e-5))]
        elif k == "lstm-cell":
            outs = list(ref_lstm_cell(*args))
        elif k == "if":
            branch = op.subgraphs["then" if args[0].reshape(-1)[0] != 0 else "else"]
            outs = _call(branch, args[1:], max_iterations)
        elif k == "while":
            carried, steps = args, 0
            while _call(op.subgraphs["cond"], carried, max_iterations)[0].reshape(-1)[0] != 0:
                steps += 1
                assert steps <= max_iterations
                carried = _call(op.subgraphs["body"], carried, max_iterations)
            outs = carried
        else:
            raise KeyError(k)
        env.update(zip(op.outputs, outs))
    return {t: env[t] for t in graph.outputs}


def _call(sub, args, cap):
    outs = interpret(sub, dict(zip(sub.inputs, args)), cap)
    return [outs[t] for t in sub.outputs]


def rel_error(actual, expected) -> float:
    """Max abs difference scaled by the reference magnitude (floored at 1)."""
    actual, expected = np.asarray(actual, dtype=np.float64), np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        return math.inf
    if actual.size == 0:
        return 0.0
    return float(np.max(np.abs(actual - expected)) / max(1.0, float(np.max(np.abs(expected)))))


# --------------------------------------------------------------------------
# search oracles


def brute_tile(a, e, b, n_r):
    """Brute-force tile search over every feasible pair with exact arithmetic."""
    feasible = [(t_e, t_b) for t_e in range(1, e + 1) for t_b in range(1, b + 1)
                if t_e * t_b + t_e + t_b <= n_r]
    if not feasible:
        return None

    def key(p):
        t_e, t_b = p
        return (Fraction(e, t_e) * Fraction(b, t_b) * (a * t_e + a * t_b + t_e * t_b), t_e, t_b)

    return min(feasible, key=key)


def _strassen_q(a, e, b, cutoff):
    levels = 0
    while min(a, e, b) > cutoff:
        a, e, b = -(-a // 2), -(-e // 2), -(-b // 2)
        levels += 1
    return 7 ** levels * a * e * b


def brute_op_cost(kind, sizes, spec):
    """Minimum cost over every variant and every parameter value, or None."""
    if spec.ops is not None and kind not in spec.ops:
        return None
    power = (16 if spec.fp16 else 8) * spec.frequency * 1e9 if spec.kind == "cpu" else spec.flops
    qs = []
    if kind == "matmul":
        a, e, b = sizes
        qs.append(a * e * b)
        if spec.kind == "cpu":
            qs += [a * e * b for t_e in range(1, min(e, spec.registers) + 1)
                   for t_b in range(1, min(b, spec.registers) + 1)
                   if t_e * t_b + t_e + t_b <= spec.registers]
            c = 1
            while c < min(a, e, b):
                qs.append(_strassen_q(a, e, b, c))
                c *= 2
    elif kind == "conv2d":
        n, c, h, w, o, kh, kw, s, p = sizes
        ho, wo = (h + 2 * p - kh) // s + 1, (w + 2 * p - kw) // s + 1
        qs.append(n * o * c * ho * wo * kh * kw)
        if (kh, kw, s) == (3, 3, 1):
            qs += [n * o * c * -(-ho // m) * -(-wo // m) * (m + 2) ** 2 for m in (2, 6)]
    elif kind in UNARY + BINARY:
        qs.append(-(-sizes[0] // spec.simd_width))
    else:
        qs.append(sizes[0])
    return min(q / power + spec.schedule_cost for q in qs)


def brute_select(workloads, catalog):
    """Index of the cheapest backend able to run every workload (first on ties)."""
    best, best_cost = None, None
    for i, spec in enumerate(catalog):
        costs = [brute_op_cost(w.kind, w.sizes, spec) for w in workloads]
        if any(c is None for c in costs):
            continue
        total = sum(costs)
        if best is None or total < best_cost:
            best, best_cost = i, total
    return best, best_cost
