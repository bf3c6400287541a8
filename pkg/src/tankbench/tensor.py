"""Dense float64 tensors with a dynamic tape for reverse-mode gradients.

Every op builds a node holding its parents and a backward rule mapping the
output gradient to one gradient per parent. ``Tensor.backward`` walks the
graph in reverse topological order and accumulates into ``.grad``.

Broadcasting is restricted to leading dimensions: the smaller operand's
shape must equal the trailing dims of the larger one.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar, got shape {self.shape}")
        topo = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            g = node.grad
            if node._backward is None or g is None:
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                p.grad = pg if p.grad is None else p.grad + pg
            # free intermediate state, keep leaf grads
            node.grad = None
            node._parents = ()
            node._backward = None

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)

    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)
    def sum(self, axis=None, keepdims=False): return tsum(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)


class Parameter(Tensor):
    """A named leaf tensor that receives gradients."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def _toposort(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_broadcast(op: str, a: tuple, b: tuple) -> None:
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    if big[len(big) - len(small):] != small:
        raise ShapeError(f"{op}: incompatible shapes {a} and {b}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    return g.reshape((-1,) + shape).sum(axis=0) if lead > 0 else g


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim and a.ndim:
        _check_broadcast("add", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim and a.ndim:
        _check_broadcast("sub", a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        c = float(b)
        a = as_tensor(a)
        return _node(a.data * c, (a,), lambda g: (g * c,))
    if not isinstance(a, Tensor) and np.ndim(a) == 0:
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a.shape, b.shape)
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _node(x.data * mask, (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return _node(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: (g * (1.0 - t * t),))


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)
    return _node(e, (x,), lambda g: (g * e,))


def sqrt(x: Tensor) -> Tensor:
    r = np.sqrt(x.data)
    return _node(r, (x,), lambda g: (g * 0.5 / r,))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def _sigmoid_(v: np.ndarray) -> np.ndarray:
    v *= 0.5
    np.tanh(v, out=v)
    v += 1.0
    v *= 0.5
    return v


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _node(x.data * keep, (x,), lambda g: (g * keep,))


# -- shape ops --------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot reshape {old} to {tuple(shape)}") from e
    return _node(out, (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    return _node(np.swapaxes(x.data, a, b), (x,), lambda g: (np.swapaxes(g, a, b),))


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ref = list(xs[0].shape)
    ax = axis % len(ref)
    for x in xs[1:]:
        s = list(x.shape)
        if len(s) != len(ref) or s[:ax] + s[ax + 1:] != ref[:ax] + ref[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {tuple(ref)} and {tuple(s)} on axis {axis}")
    splits = np.cumsum([x.shape[ax] for x in xs])[:-1]
    return _node(np.concatenate([x.data for x in xs], axis=ax), xs,
                 lambda g: tuple(np.split(g, splits, axis=ax)))


def getitem(x: Tensor, idx) -> Tensor:
    shape = x.shape

    fancy = any(isinstance(i, (list, np.ndarray)) for i in (idx if isinstance(idx, tuple) else (idx,)))

    def back(g):
        full = np.zeros(shape)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] += g
        return (full,)

    return _node(x.data[idx], (x,), back)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(x.data.sum(axis=axis, keepdims=keepdims), (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis, keepdims), 1.0 / n)


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` for [..., n, k] @ [k, m] or equal-leading-dims batched operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or (
            b.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return _node(ad @ bd, (a, b), back)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` over the last axis of ``x``; ``w`` is [in, out]."""
    if x.shape[-1] != w.shape[0] or (b is not None and b.shape != (w.shape[1],)):
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}"
                         + (f" / bias {b.shape}" if b is not None else ""))
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is not None:
        out = out + b.data

    def back(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ wd.T
        gw = xd.reshape(-1, xd.shape[-1]).T @ g2
        return (gx, gw) if b is None else (gx, gw, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, back)


# -- normalization / attention ---------------------------------------------

def softmax(x: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; positions where ``mask`` is False get weight exactly 0."""
    if mask is not None:
        z = np.where(mask, x.data, -np.inf)
        z -= z.max(axis=axis, keepdims=True)
    else:
        z = x.data - x.data.max(axis=axis, keepdims=True)
    s = np.exp(z, out=z)
    s /= s.sum(axis=axis, keepdims=True)

    def back(g):
        tmp = g * s
        total = tmp.sum(axis=axis, keepdims=True)
        np.subtract(g, total, out=tmp)
        tmp *= s
        return (tmp,)

    return _node(s, (x,), back)


def layer_norm(x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None,
               eps: float = 1e-9) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat
    if gamma is not None:
        out = out * gamma.data + beta.data
    n = xd.shape[-1]

    def back(g):
        gh = g if gamma is None else g * gamma.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        if gamma is None:
            return (gx,)
        g2 = g.reshape(-1, n)
        return gx, (g2 * xhat.reshape(-1, n)).sum(axis=0), g2.sum(axis=0)

    parents = (x,) if gamma is None else (x, gamma, beta)
    return _node(out, parents, back)


# -- sequence primitives ----------------------------------------------------

def _lag_columns(xd: np.ndarray, k: int, dilation: int) -> np.ndarray:
    B, L, C = xd.shape
    pad = (k - 1) * dilation
    xp = np.concatenate([np.zeros((B, pad, C)), xd], axis=1) if pad else xd
    # column j holds the input lagged by j * dilation steps
    return np.stack([xp[:, pad - j * dilation: pad - j * dilation + L] for j in range(k)], axis=2)


def causal_conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, dilation: int = 1) -> Tensor:
    """Causal dilated convolution over time.

    ``x`` is [B, L, C_in], ``w`` is [k, C_in, C_out] where ``w[j]`` multiplies
    the input ``j * dilation`` steps in the past. The input is zero-padded on
    the left so the output has length L and never reads future steps.
    """
    if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ShapeError(f"causal_conv1d: input {x.shape} incompatible with kernel {w.shape}")
    if b is not None and b.shape != (w.shape[2],):
        raise ShapeError(f"causal_conv1d: bias {b.shape} incompatible with kernel {w.shape}")
    k, cin, cout = w.shape
    B, L, _ = x.shape
    cols = _lag_columns(x.data, k, dilation).reshape(B * L, k * cin)
    wm = w.data.reshape(k * cin, cout)
    out = cols @ wm
    if b is not None:
        out += b.data
    pad = (k - 1) * dilation

    def back(g):
        g2 = g.reshape(B * L, cout)
        gw = (cols.T @ g2).reshape(k, cin, cout)
        gcols = (g2 @ wm.T).reshape(B, L, k, cin)
        gxp = np.zeros((B, L + pad, cin))
        for j in range(k):
            gxp[:, pad - j * dilation: pad - j * dilation + L] += gcols[:, :, j]
        gx = gxp[:, pad:]
        return (gx, gw) if b is None else (gx, gw, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out.reshape(B, L, cout), parents, back)


def gru_scan(xp: Tensor, h0: Tensor, wh: Tensor, bh: Tensor) -> Tensor:
    """Run a GRU recurrence over precomputed input projections.

    ``xp`` is [B, L, 3H] (input contributions to the reset, update and
    candidate gates, in that order), ``h0`` is [B, H], ``wh`` is [H, 3H] and
    ``bh`` is [3H]. Returns all hidden states [B, L, H]::

        r = sigmoid(xr + h Wr + br)
        z = sigmoid(xz + h Wz + bz)
        n = tanh(xn + r * (h Wn + bn))
        h' = (1 - z) * n + z * h
    """
    B, L, H3 = xp.shape
    H = H3 // 3
    if H3 != 3 * H or h0.shape != (B, H) or wh.shape != (H, H3) or bh.shape != (H3,):
        raise ShapeError(f"gru_scan: shapes xp {xp.shape}, h0 {h0.shape}, "
                         f"wh {wh.shape}, bh {bh.shape} are inconsistent")
    xd, W, bias = xp.data, wh.data, bh.data
    hs = np.empty((B, L, H))
    RZ = np.empty((L, B, 2 * H)); N = np.empty((L, B, H)); HN = np.empty((L, B, H))
    h = h0.data
    for t in range(L):
        hp = h @ W
        hp += bias
        x_t = xd[:, t]
        rz = RZ[t]
        np.add(x_t[:, :2 * H], hp[:, :2 * H], out=rz)
        _sigmoid_(rz)
        hn = hp[:, 2 * H:]
        n = N[t]
        np.multiply(rz[:, :H], hn, out=n)
        n += x_t[:, 2 * H:]
        np.tanh(n, out=n)
        HN[t] = hn
        h = n + rz[:, H:] * (h - n)
        hs[:, t] = h
    h0d = h0.data

    def back(g):
        gxp = np.empty((B, L, H3))
        dhp_all = np.empty((L, B, H3))
        dh = np.zeros((B, H))
        WT = W.T
        for t in range(L - 1, -1, -1):
            h_prev = hs[:, t - 1] if t > 0 else h0d
            r, z, n, hn = RZ[t, :, :H], RZ[t, :, H:], N[t], HN[t]
            dh += g[:, t]
            gx = gxp[:, t]
            dn = gx[:, 2 * H:]
            np.multiply(dh, 1.0 - z, out=dn)
            dn *= 1.0 - n * n
            np.multiply(dh, (h_prev - n) * z * (1.0 - z), out=gx[:, H:2 * H])
            np.multiply(dn * hn, r * (1.0 - r), out=gx[:, :H])
            dhp = dhp_all[t]
            dhp[:] = gx
            dhp[:, 2 * H:] *= r
            dh *= z
            dh += dhp @ WT
        hprev_all = np.concatenate([h0d[:, None], hs[:, :-1]], axis=1)
        gW = hprev_all.reshape(-1, H).T @ dhp_all.transpose(1, 0, 2).reshape(-1, H3)
        gb = dhp_all.sum(axis=(0, 1))
        return gxp, dh, gW, gb

    return _node(hs, (xp, h0, wh, bh), back)


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean of squared differences over all elements."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if pred.shape != t.shape:
        raise ShapeError(f"mse_loss: pred shape {pred.shape} != target shape {t.shape}")
    diff = pred.data - t
    n = diff.size
    tt = target if isinstance(target, Tensor) else Tensor(t)

    def back(g):
        gp = g * (2.0 / n) * diff
        return gp, -gp

    return _node(np.array(np.mean(diff * diff)), (pred, tt), back)


def parameters_of(tensors: Iterable[Tensor]) -> list[Parameter]:
    return [t for t in tensors if isinstance(t, Parameter)]
