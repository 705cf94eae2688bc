"""Small fully connected networks with hand-written backprop.

A :class:`Mlp` holds ``stack`` independent networks of identical shape so
that all agents of a game are evaluated with one batched matmul per layer.
Inputs are ``(stack, batch, in)``; a 2-D input is treated as stack 1.
"""

from __future__ import annotations

import numpy as np

HIDDEN = (64, 64, 64)


class Mlp:
    def __init__(self, sizes, stack: int = 1, out_bound: float | None = None, rng=None,
                 dtype=np.float64, final_scale: float = 3e-3, zero: bool = False):
        self.sizes = tuple(int(k) for k in sizes)
        self.stack = int(stack)
        self.out_bound = out_bound
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng() if rng is None else rng
        self.params = []
        last = len(self.sizes) - 2
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if zero:
                W = np.zeros((self.stack, fan_in, fan_out))
            elif k == last:
                W = rng.uniform(-final_scale, final_scale, (self.stack, fan_in, fan_out))
            else:
                W = rng.normal(0.0, np.sqrt(2.0 / fan_in), (self.stack, fan_in, fan_out))
            self.params.append(W.astype(self.dtype))
            self.params.append(np.zeros((self.stack, 1, fan_out), dtype=self.dtype))

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    def _promote(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.n_in:
            raise ValueError(f"expected input (..., {self.n_in}), got shape {x.shape}")
        if x.shape[0] not in (1, self.stack):
            raise ValueError(f"input stack {x.shape[0]} does not match network stack {self.stack}")
        return x

    def forward(self, x, keep: bool = False):
        h = self._promote(x)
        acts, pre = [h], []
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            pre.append(z)
            if k < n_layers - 1:
                h = np.maximum(z, 0.0)
                acts.append(h)
            elif self.out_bound is not None:
                h = self.out_bound * np.tanh(z)
            else:
                h = z
        if keep:
            return h, (acts, pre, h)
        return h

    __call__ = forward

    def backward(self, cache, gy, g_pre=None):
        """Gradients of ``sum(gy * y)`` w.r.t. every parameter and the input.

        ``g_pre``, if given, is added to the gradient at the output
        pre-activation (before the tanh squashing of a bounded network).
        """
        acts, pre, y = cache
        g = np.asarray(gy, dtype=self.dtype)
        if self.out_bound is not None:
            g = g * (self.out_bound - y * y / self.out_bound)
        if g_pre is not None:
            g = g + g_pre
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        for k in range(n_layers - 1, -1, -1):
            a = acts[k]
            gW = np.swapaxes(a, 1, 2) @ g
            if gW.shape[0] != self.stack:
                gW = np.broadcast_to(gW, (self.stack,) + gW.shape[1:])
            grads[2 * k] = gW
            gb = g.sum(axis=1, keepdims=True)
            grads[2 * k + 1] = np.broadcast_to(gb, (self.stack,) + gb.shape[1:]) if gb.shape[0] != self.stack else gb
            g = g @ np.swapaxes(self.params[2 * k], 1, 2)
            if k > 0:
                g = g * (pre[k - 1] > 0)
        return grads, g

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.sizes, new.stack, new.out_bound, new.dtype = self.sizes, self.stack, self.out_bound, self.dtype
        new.params = [p.copy() for p in self.params]
        return new

    def state(self) -> list:
        return [p.copy() for p in self.params]

    def load_state(self, params) -> None:
        if len(params) != len(self.params) or any(a.shape != b.shape for a, b in zip(params, self.params)):
            raise ValueError("parameter shapes do not match")
        self.params = [np.array(p, dtype=self.dtype) for p in params]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)


def mlp_forward(net: Mlp, x):
    return net.forward(x)


def mlp_backward(net: Mlp, x, upstream):
    """Returns ``(parameter_grads, input_grad)`` for upstream gradient ``upstream``."""
    _, cache = net.forward(x, keep=True)
    return net.backward(cache, upstream)


class Adam:
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        """In-place descent step on the bound parameter list."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """``target <- tau * online + (1 - tau) * target``, in place."""
    if len(target.params) != len(online.params):
        raise ValueError("networks differ in depth")
    for t, o in zip(target.params, online.params):
        if t.shape != o.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {o.shape}")
    for t, o in zip(target.params, online.params):
        t *= 1.0 - tau
        t += tau * o
    return target


def gradient_check(net: Mlp, x, rng, h: float = 1e-5, n_probe: int = 20) -> float:
    """Worst relative error between analytic and central-difference gradients.

    The scalar probed is ``sum(w * net(x))`` for a random ``w``; ``n_probe``
    random coordinates of each parameter array and of ``x`` are tested.
    """
    x = net._promote(x).astype(np.float64)
    y = net.forward(x)
    w = rng.standard_normal(y.shape)
    grads, gx = mlp_backward(net, x, w)

    def f():
        return float(np.sum(w * net.forward(x)))

    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(abs(a) + abs(b), 1e-8)

    for p, g in zip(net.params, grads):
        for _ in range(n_probe):
            idx = tuple(rng.integers(0, s) for s in p.shape)
            old = p[idx]
            p[idx] = old + h
            up = f()
            p[idx] = old - h
            down = f()
            p[idx] = old
            worst = max(worst, rel((up - down) / (2 * h), g[idx]))
    for _ in range(n_probe):
        idx = tuple(rng.integers(0, s) for s in x.shape)
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        worst = max(worst, rel((up - down) / (2 * h), gx[idx]))
    return worst
