"""Hot numeric kernels: dense-net passes, optimizer updates, grid advance.

Every kernel exists twice: a numba-jitted variant and a pure-numpy twin with
identical semantics. The jitted path is used when numba imports cleanly unless
the environment variable DEEPCARS_NUMBA=0 forces the fallback. Benchmarks may
flip `NUMBA_ENABLED` at runtime to compare both paths.

Network parameters travel as one flat float64 vector `theta` plus an int64
`dims` array [n_in, h1, ..., n_out]; layer k occupies a row-major (out x in)
weight block followed by its bias block.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("DEEPCARS_NUMBA", "1") != "0"


def total_params(dims) -> int:
    """Length of the flat parameter vector for the given layer dims."""
    dims = np.asarray(dims, dtype=np.int64)
    return int(sum(dims[k + 1] * (dims[k] + 1) for k in range(len(dims) - 1)))


def layer_offsets(dims):
    """Per-layer (weight_start, bias_start, end) offsets into the flat vector."""
    offs = []
    pos = 0
    dims = np.asarray(dims, dtype=np.int64)
    for k in range(len(dims) - 1):
        n_in, n_out = int(dims[k]), int(dims[k + 1])
        offs.append((pos, pos + n_out * n_in, pos + n_out * (n_in + 1)))
        pos += n_out * (n_in + 1)
    return offs


# ---------------------------------------------------------------------------
# pure-numpy kernels


def mlp_forward_np(theta, dims, x):
    a = x
    n_layers = len(dims) - 1
    pos = 0
    for k in range(n_layers):
        n_in, n_out = dims[k], dims[k + 1]
        w = theta[pos : pos + n_out * n_in].reshape(n_out, n_in)
        b = theta[pos + n_out * n_in : pos + n_out * (n_in + 1)]
        a = a @ w.T + b
        if k != n_layers - 1:
            a = np.maximum(a, 0.0)
        pos += n_out * (n_in + 1)
    return a


def mlp_backward_np(theta, dims, x, dout):
    n_layers = len(dims) - 1
    # hidden activations (post-relu); the output layer itself is not needed
    hidden = []
    a = x
    pos = 0
    for k in range(n_layers - 1):
        n_in, n_out = dims[k], dims[k + 1]
        w = theta[pos : pos + n_out * n_in].reshape(n_out, n_in)
        b = theta[pos + n_out * n_in : pos + n_out * (n_in + 1)]
        a = np.maximum(a @ w.T + b, 0.0)
        hidden.append(a)
        pos += n_out * (n_in + 1)

    grad = np.zeros_like(theta)
    offs = layer_offsets(dims)
    delta = dout
    for k in range(n_layers - 1, -1, -1):
        w0, b0, _ = offs[k]
        n_in, n_out = dims[k], dims[k + 1]
        a_prev = x if k == 0 else hidden[k - 1]
        grad[w0:b0] = (delta.T @ a_prev).ravel()
        grad[b0 : b0 + n_out] = delta.sum(axis=0)
        if k > 0:
            w = theta[w0:b0].reshape(n_out, n_in)
            delta = (delta @ w) * (hidden[k - 1] > 0.0)
    return grad


def adam_update_np(theta, grad, m, v, step, lr, beta1, beta2, eps):
    m[:] = beta1 * m + (1.0 - beta1) * grad
    v[:] = beta2 * v + (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def sgd_update_np(theta, grad, lr):
    theta -= lr * grad


def advance_np(grid, ego_lane):
    """Shift traffic one row toward the ego; returns (passed, collided) car counts.

    Called after the ego's lateral move. A car leaving the grid from the ego's
    own cell is a collision (the ego slid into it), any other leaving car has
    been passed, and a car arriving on the ego cell is a collision.
    """
    leaving = grid[-1].copy()
    passed = int(leaving.sum())
    collided = 0
    if leaving[ego_lane]:
        passed -= 1
        collided += 1
    grid[1:] = grid[:-1].copy()
    grid[0] = 0
    if grid[-1, ego_lane]:
        collided += 1
    return passed, collided


# ---------------------------------------------------------------------------
# numba kernels

if HAVE_NUMBA:

    @njit(cache=True, fastmath=True)
    def mlp_forward_nb(theta, dims, x):
        bsz = x.shape[0]
        n_layers = dims.shape[0] - 1
        a = x
        pos = 0
        for k in range(n_layers):
            n_in = dims[k]
            n_out = dims[k + 1]
            out = np.empty((bsz, n_out))
            for i in range(bsz):
                for j in range(n_out):
                    s = theta[pos + n_out * n_in + j]
                    w0 = pos + j * n_in
                    for t in range(n_in):
                        s += theta[w0 + t] * a[i, t]
                    if k != n_layers - 1 and s < 0.0:
                        s = 0.0
                    out[i, j] = s
            a = out
            pos += n_out * (n_in + 1)
        return a

    @njit(cache=True, fastmath=True)
    def mlp_backward_nb(theta, dims, x, dout):
        bsz = x.shape[0]
        n_layers = dims.shape[0] - 1
        pos_arr = np.empty(n_layers, np.int64)
        act_arr = np.empty(n_layers, np.int64)
        p = 0
        ao = 0
        for k in range(n_layers):
            pos_arr[k] = p
            act_arr[k] = ao
            p += dims[k + 1] * (dims[k] + 1)
            if k < n_layers - 1:
                ao += dims[k + 1]
        hidden = np.empty((bsz, ao))

        # forward through the hidden stack only
        for k in range(n_layers - 1):
            n_in = dims[k]
            n_out = dims[k + 1]
            pos = pos_arr[k]
            off = act_arr[k]
            for i in range(bsz):
                for j in range(n_out):
                    s = theta[pos + n_out * n_in + j]
                    w0 = pos + j * n_in
                    if k == 0:
                        for t in range(n_in):
                            s += theta[w0 + t] * x[i, t]
                    else:
                        prev = act_arr[k - 1]
                        for t in range(n_in):
                            s += theta[w0 + t] * hidden[i, prev + t]
                    if s < 0.0:
                        s = 0.0
                    hidden[i, off + j] = s

        grad = np.zeros_like(theta)
        delta = dout.copy()
        for k in range(n_layers - 1, -1, -1):
            n_in = dims[k]
            n_out = dims[k + 1]
            pos = pos_arr[k]
            new_delta = np.zeros((bsz, n_in))
            for i in range(bsz):
                for j in range(n_out):
                    d = delta[i, j]
                    if d != 0.0:
                        w0 = pos + j * n_in
                        if k == 0:
                            for t in range(n_in):
                                grad[w0 + t] += d * x[i, t]
                        else:
                            prev = act_arr[k - 1]
                            for t in range(n_in):
                                grad[w0 + t] += d * hidden[i, prev + t]
                                new_delta[i, t] += d * theta[w0 + t]
                        grad[pos + n_out * n_in + j] += d
            if k > 0:
                prev = act_arr[k - 1]
                for i in range(bsz):
                    for t in range(n_in):
                        if hidden[i, prev + t] <= 0.0:
                            new_delta[i, t] = 0.0
            delta = new_delta
        return grad

    @njit(cache=True)
    def adam_update_nb(theta, grad, m, v, step, lr, beta1, beta2, eps):
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        for i in range(theta.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
            theta[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)

    @njit(cache=True)
    def sgd_update_nb(theta, grad, lr):
        for i in range(theta.shape[0]):
            theta[i] -= lr * grad[i]

    @njit(cache=True)
    def advance_nb(grid, ego_lane):
        rows = grid.shape[0]
        lanes = grid.shape[1]
        passed = 0
        collided = 0
        for l in range(lanes):
            if grid[rows - 1, l] != 0:
                if l == ego_lane:
                    collided += 1
                else:
                    passed += 1
        for r in range(rows - 1, 0, -1):
            for l in range(lanes):
                grid[r, l] = grid[r - 1, l]
        for l in range(lanes):
            grid[0, l] = 0
        if grid[rows - 1, ego_lane] != 0:
            collided += 1
        return passed, collided

else:  # pragma: no cover
    mlp_forward_nb = mlp_forward_np
    mlp_backward_nb = mlp_backward_np
    adam_update_nb = adam_update_np
    sgd_update_nb = sgd_update_np
    advance_nb = advance_np


# ---------------------------------------------------------------------------
# dispatchers (read NUMBA_ENABLED at call time so benchmarks can toggle it)


def mlp_forward(theta, dims, x):
    if NUMBA_ENABLED:
        return mlp_forward_nb(theta, dims, x)
    return mlp_forward_np(theta, dims, x)


def mlp_backward(theta, dims, x, dout):
    if NUMBA_ENABLED:
        return mlp_backward_nb(theta, dims, x, dout)
    return mlp_backward_np(theta, dims, x, dout)


def adam_update(theta, grad, m, v, step, lr, beta1, beta2, eps):
    if NUMBA_ENABLED:
        adam_update_nb(theta, grad, m, v, step, lr, beta1, beta2, eps)
    else:
        adam_update_np(theta, grad, m, v, step, lr, beta1, beta2, eps)


def sgd_update(theta, grad, lr):
    if NUMBA_ENABLED:
        sgd_update_nb(theta, grad, lr)
    else:
        sgd_update_np(theta, grad, lr)


def advance(grid, ego_lane):
    if NUMBA_ENABLED:
        return advance_nb(grid, ego_lane)
    return advance_np(grid, ego_lane)
