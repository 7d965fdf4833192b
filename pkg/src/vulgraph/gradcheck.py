"""Central-difference verification of every differentiable operation.

Each case builds a small random input, pushes it through one operation (or a
composite), scalarizes with a fixed random weighting, and compares the
reverse-mode gradient against two-sided finite differences.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, rows

TOLERANCE = 1e-4
_EPS = 1e-6


def _max_rel_err(build, arrays) -> float:
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    build(*tensors).backward()

    def value(parts) -> float:
        return float(build(*[Tensor(p) for p in parts]).data)

    worst = 0.0
    for which, base in enumerate(arrays):
        numeric = np.zeros_like(base)
        flat = numeric.reshape(-1)
        for i in range(base.size):
            for sign, slot in ((1.0, 0), (-1.0, 1)):
                work = [a.copy() for a in arrays]
                work[which].reshape(-1)[i] += sign * _EPS
                if slot == 0:
                    hi = value(work)
                else:
                    lo = value(work)
            flat[i] = (hi - lo) / (2 * _EPS)
        analytic = tensors[which].grad
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst


def _cases(seed: int):
    gen = np.random.default_rng(seed)

    def r(*shape):
        return gen.uniform(-1.5, 1.5, size=shape)

    def away_from_zero(*shape):
        return gen.uniform(0.1, 1.5, size=shape) * gen.choice([-1.0, 1.0], size=shape)

    def positive(*shape):
        return gen.uniform(0.2, 2.0, size=shape)

    w34 = gen.uniform(-1.0, 1.0, size=(3, 4))
    w32 = gen.uniform(-1.0, 1.0, size=(3, 2))
    w43 = gen.uniform(-1.0, 1.0, size=(4, 3))
    w3 = gen.uniform(-1.0, 1.0, size=(3,))
    w4 = gen.uniform(-1.0, 1.0, size=(4,))
    w64 = gen.uniform(-1.0, 1.0, size=(6, 4))
    w12 = gen.uniform(-1.0, 1.0, size=(12,))

    def s(t, w):
        return (t * Tensor(w)).sum()

    cases = [
        ("add", lambda a, b: s(a + b, w34), [r(3, 4), r(3, 4)]),
        ("add_broadcast_row", lambda a, b: s(a + b, w34), [r(3, 4), r(4)]),
        ("sub", lambda a, b: s(a - b, w34), [r(3, 4), r(3, 4)]),
        ("neg", lambda a: s(-a, w34), [r(3, 4)]),
        ("mul", lambda a, b: s(a * b, w34), [r(3, 4), r(3, 4)]),
        ("div", lambda a, b: s(a / b, w34), [r(3, 4), away_from_zero(3, 4) * 2]),
        ("maximum", lambda a, b: s(a.maximum(b), w34), [r(3, 4), r(3, 4)]),
        ("pow_cube", lambda a: s(a.pow_scalar(3.0), w34), [r(3, 4)]),
        ("pow_sqrt", lambda a: s(a.pow_scalar(0.5), w34), [positive(3, 4)]),
        ("sigmoid", lambda a: s(a.sigmoid(), w34), [r(3, 4)]),
        ("tanh", lambda a: s(a.tanh(), w34), [r(3, 4)]),
        ("relu", lambda a: s(a.relu(), w34), [away_from_zero(3, 4)]),
        ("exp", lambda a: s(a.exp(), w34), [r(3, 4)]),
        ("log", lambda a: s(a.log(), w34), [positive(3, 4)]),
        ("softmax_last", lambda a: s(a.softmax(axis=-1), w34), [r(3, 4)]),
        ("softmax_rows", lambda a: s(a.softmax(axis=0), w34), [r(3, 4)]),
        ("matmul", lambda a, b: s(a.matmul(b), w32), [r(3, 4), r(4, 2)]),
        ("transpose", lambda a: s(a.transpose(), w43), [r(3, 4)]),
        ("reshape", lambda a: s(a.reshape(12), w12), [r(3, 4)]),
        ("index_row", lambda a: s(a[1], w4), [r(3, 4)]),
        ("index_cell", lambda a: a[2, 1] * Tensor(np.array(1.7)), [r(3, 4)]),
        ("slice_rows", lambda a: s(a[0:2], w34[:2]), [r(3, 4)]),
        ("sum_all", lambda a: a.sum() * Tensor(np.array(0.9)), [r(3, 4)]),
        ("sum_axis0", lambda a: s(a.sum(axis=0), w4), [r(3, 4)]),
        ("sum_keepdims", lambda a: s(a.sum(axis=1, keepdims=True), w3.reshape(3, 1)), [r(3, 4)]),
        ("mean", lambda a: s(a.mean(axis=1), w3), [r(3, 4)]),
        ("amax_rows", lambda a: s(a.amax_rows(), w4), [r(3, 4)]),
        ("concat_rows", lambda a, b: s(concat([a, b], axis=0), w64), [r(2, 4), r(4, 4)]),
        ("gather_repeated_rows", lambda a: s(rows(a, np.array([0, 2, 2])), w34), [r(4, 4)]),
        (
            "composite_mlp",
            lambda x, w1, w2: (rows(x, np.array([0, 1, 1])).matmul(w1).tanh().matmul(w2))
            .softmax(axis=-1)[0, 1]
            .log()
            * Tensor(np.array(-1.0)),
            [r(3, 4), r(4, 5), r(5, 2)],
        ),
    ]
    return cases


def run_gradcheck(seed: int = 0) -> list[dict]:
    """One row per operation: name, measured error, pass/fail."""
    out = []
    for name, build, arrays in _cases(seed):
        err = _max_rel_err(build, arrays)
        out.append({"op": name, "max_rel_err": err, "pass": bool(err < TOLERANCE)})
    return out


def all_passed(results) -> bool:
    return all(row["pass"] for row in results)
