"""Random-variable arithmetic over Monte-Carlo sample vectors with a
reverse-mode differentiation tape.

A :class:`SampleValue` carries either a single scalar (a deterministic
quantity) or a vector with one entry per simulated path.  Arithmetic
broadcasts deterministic operands against per-path operands without
perturbing them.  Values created through :meth:`Tape.variable` are
recorded: every downstream elementary operation appends a node holding
its parents and local partial derivatives, and one reverse sweep yields
the derivative of a statistic of any output with respect to all recorded
inputs simultaneously.

Scalars are kept as plain Python floats internally so that deterministic
pipelines avoid numpy dispatch overhead; per-path data are 1-d float64
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SampleValue",
    "Tape",
    "Statistic",
    "apply_elementwise",
    "expectation",
    "expected_shortfall",
    "exp",
    "log",
    "lincomb",
    "maximum",
    "minimum",
]

_LN2 = math.log(2.0)


def _as_samples(value):
    """Coerce a number or 1-d sequence into the internal sample carrier."""
    if isinstance(value, SampleValue):
        return value.samples
    if isinstance(value, (int, float, np.floating, np.integer)):
        return float(value)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    if arr.ndim != 1:
        raise ValueError(f"samples must be a scalar or a 1-d path vector, got shape {arr.shape}")
    return arr


def _paths(samples):
    return samples.shape[0] if isinstance(samples, np.ndarray) else None


def _check_paths(a, b, op):
    pa, pb = _paths(a), _paths(b)
    if pa is not None and pb is not None and pa != pb:
        raise ValueError(f"path-count mismatch in '{op}': {pa} vs {pb}")


def _domain_error(samples, bad_mask, message):
    if isinstance(samples, float):
        raise ValueError(f"{message} (deterministic value {samples})")
    idx = int(np.flatnonzero(bad_mask)[0])
    raise ValueError(f"{message} on path {idx} (value {samples[idx]})")


class SampleValue:
    """A scalar (deterministic) or per-path vector quantity.

    ``tape``/``node`` identify the node recorded for differentiation; both
    are unset for plain constants.
    """

    __slots__ = ("samples", "tape", "node")

    def __init__(self, samples, tape=None, node=-1):
        if not isinstance(samples, (float, np.ndarray)):
            samples = _as_samples(samples)
        self.samples = samples
        self.tape = tape
        self.node = node

    # -- introspection ---------------------------------------------------

    @property
    def is_stochastic(self):
        return isinstance(self.samples, np.ndarray)

    @property
    def paths(self):
        return _paths(self.samples)

    @property
    def recorded(self):
        return self.tape is not None

    def to_array(self, paths=None):
        """Samples as an array, broadcasting a deterministic value to `paths`."""
        if isinstance(self.samples, np.ndarray):
            return self.samples
        n = 1 if paths is None else paths
        return np.full(n, self.samples)

    def __repr__(self):
        if self.is_stochastic:
            body = f"paths={self.paths}, mean={float(np.mean(self.samples)):.6g}"
        else:
            body = f"{self.samples:.6g}"
        tag = f", node={self.node}" if self.recorded else ""
        return f"SampleValue({body}{tag})"

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        return lincomb([(1.0, self), (1.0, _wrap(other))])

    __radd__ = __add__

    def __sub__(self, other):
        return lincomb([(1.0, self), (-1.0, _wrap(other))])

    def __rsub__(self, other):
        return lincomb([(-1.0, self), (1.0, _wrap(other))])

    def __mul__(self, other):
        return _mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _div(self, _wrap(other))

    def __rtruediv__(self, other):
        return _div(_wrap(other), self)

    def __pow__(self, other):
        return _pow(self, _wrap(other))

    def __neg__(self):
        return lincomb([(-1.0, self)])


def _wrap(value):
    return value if isinstance(value, SampleValue) else SampleValue(value)


def _tape_of(*operands):
    tape = None
    for sv in operands:
        if sv.tape is not None:
            if tape is None:
                tape = sv.tape
            elif tape is not sv.tape:
                raise ValueError("operands were recorded on different tapes")
    return tape


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------


def lincomb(terms, const=0.0):
    """Linear combination ``sum(coef * value) + const`` as one tape node.

    Coefficients are constants (never differentiated); they may be floats or
    per-path vectors.  Off-tape operands fold into the constant so that the
    recorded node keeps only differentiable parents.
    """
    total = const if isinstance(const, (float, np.ndarray)) else _as_samples(const)
    parents = []
    coeffs = []
    tape = None
    for coef, sv in terms:
        if isinstance(coef, SampleValue):
            if coef.tape is not None:
                raise ValueError("lincomb coefficients must be constants")
            coef = coef.samples
        sv = _wrap(sv)
        _check_paths(coef, sv.samples, "lincomb")
        _check_paths(total, sv.samples, "lincomb")
        contrib = coef * sv.samples
        total = total + contrib
        if sv.tape is not None:
            if tape is None:
                tape = sv.tape
            elif tape is not sv.tape:
                raise ValueError("operands were recorded on different tapes")
            parents.append(sv.node)
            coeffs.append(coef)
    if tape is None:
        return SampleValue(total)
    node = tape._append(tuple(parents), tuple(coeffs), total)
    return SampleValue(total, tape, node)


def _mul(a, b):
    _check_paths(a.samples, b.samples, "mul")
    if a.tape is None:
        return lincomb([(a.samples, b)])
    if b.tape is None:
        return lincomb([(b.samples, a)])
    tape = _tape_of(a, b)
    value = a.samples * b.samples
    node = tape._append((a.node, b.node), (b.samples, a.samples), value)
    return SampleValue(value, tape, node)


def _div(a, b):
    _check_paths(a.samples, b.samples, "div")
    bs = b.samples
    if isinstance(bs, float):
        if bs == 0.0:
            _domain_error(bs, None, "division by zero")
    else:
        bad = bs == 0.0
        if bad.any():
            _domain_error(bs, bad, "division by zero")
    if b.tape is None:
        inv = 1.0 / bs
        return lincomb([(inv, a)])
    value = a.samples / bs
    tape = _tape_of(a, b)
    if a.tape is None:
        node = tape._append((b.node,), (-value / bs,), value)
        return SampleValue(value, tape, node)
    node = tape._append((a.node, b.node), (1.0 / bs, -value / bs), value)
    return SampleValue(value, tape, node)


def exp(x):
    x = _wrap(x)
    if isinstance(x.samples, float):
        value = math.exp(x.samples)
    else:
        value = np.exp(x.samples)
    if x.tape is None:
        return SampleValue(value)
    node = x.tape._append((x.node,), (value,), value)
    return SampleValue(value, x.tape, node)


def log(x):
    x = _wrap(x)
    xs = x.samples
    if isinstance(xs, float):
        if xs <= 0.0:
            _domain_error(xs, None, "log of non-positive sample")
        value = math.log(xs)
    else:
        bad = xs <= 0.0
        if bad.any():
            _domain_error(xs, bad, "log of non-positive sample")
        value = np.log(xs)
    if x.tape is None:
        return SampleValue(value)
    node = x.tape._append((x.node,), (1.0 / xs,), value)
    return SampleValue(value, x.tape, node)


def _pow(a, b):
    base = a.samples
    if b.tape is None and isinstance(b.samples, float):
        k = b.samples
        if not (k == round(k) and k >= 0):
            if isinstance(base, float):
                if base < 0.0:
                    _domain_error(base, None, f"pow base out of domain for exponent {k}")
            else:
                bad = base < 0.0
                if bad.any():
                    _domain_error(base, bad, f"pow base out of domain for exponent {k}")
        if isinstance(base, float):
            value = base**k
        else:
            value = np.power(base, k)
        if a.tape is None:
            return SampleValue(value)
        # partial at base 0 with k < 1 would be infinite; clip to 0 so the
        # subgradient stays finite (callers floor such bases anyway)
        if isinstance(base, float):
            partial = k * base ** (k - 1.0) if (k != 0.0 and (base != 0.0 or k >= 1.0)) else 0.0
        else:
            if k == 0.0:
                partial = 0.0
            else:
                with np.errstate(divide="ignore"):
                    partial = k * np.power(base, k - 1.0)
                partial = np.where(np.isfinite(partial), partial, 0.0)
        node = a.tape._append((a.node,), (partial,), value)
        return SampleValue(value, a.tape, node)
    # general exponent: a**b = exp(b*log(a)), domain a > 0
    return exp(_mul(b, log(a)))


def _select(a, b, mask, op):
    """Record min/max with subgradient of the selected branch (ties pick a)."""
    value = np.where(mask, a.samples, b.samples) if isinstance(mask, np.ndarray) else (a.samples if mask else b.samples)
    if isinstance(value, np.ndarray) and value.ndim == 0:
        value = float(value)
    tape = _tape_of(a, b)
    if tape is None:
        return SampleValue(value)
    if isinstance(mask, np.ndarray):
        wa = mask.astype(float)
        wb = 1.0 - wa
    else:
        wa = 1.0 if mask else 0.0
        wb = 1.0 - wa
    parents = []
    coeffs = []
    if a.tape is not None:
        parents.append(a.node)
        coeffs.append(wa)
    if b.tape is not None:
        parents.append(b.node)
        coeffs.append(wb)
    node = tape._append(tuple(parents), tuple(coeffs), value)
    return SampleValue(value, tape, node)


def minimum(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_paths(a.samples, b.samples, "min")
    return _select(a, b, a.samples <= b.samples, "min")


def maximum(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_paths(a.samples, b.samples, "max")
    return _select(a, b, a.samples >= b.samples, "max")


_ELEMENTARY = {
    "+": lambda args: args[0] + args[1],
    "-": lambda args: args[0] - args[1],
    "*": lambda args: args[0] * args[1],
    "/": lambda args: args[0] / args[1],
    "pow": lambda args: args[0] ** args[1],
    "exp": lambda args: exp(args[0]),
    "log": lambda args: log(args[0]),
    "min": lambda args: minimum(args[0], args[1]),
    "max": lambda args: maximum(args[0], args[1]),
}


def apply_elementwise(op, args):
    """Apply one elementary operation per path.

    ``op`` is one of ``+ - * / pow exp log min max``; unary operations take a
    one-element argument list.
    """
    if op not in _ELEMENTARY:
        raise ValueError(f"unknown elementary operation {op!r}")
    args = [_wrap(a) for a in args]
    n_expected = 1 if op in ("exp", "log") else 2
    if len(args) != n_expected:
        raise ValueError(f"operation {op!r} takes {n_expected} argument(s), got {len(args)}")
    return _ELEMENTARY[op](args)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def expectation(x):
    """Equally weighted mean over paths; identity for deterministic input."""
    xs = x.samples if isinstance(x, SampleValue) else _as_samples(x)
    if isinstance(xs, float):
        return xs
    return float(np.mean(xs))


def _tail_indices(xs, alpha, tail):
    k = math.ceil(alpha * xs.shape[0])
    order = np.argsort(xs, kind="stable")
    return order[:k] if tail == "left" else order[-k:]


def expected_shortfall(x, alpha, tail="left"):
    """Mean of the ``ceil(alpha*P)`` smallest (left) or largest (right) samples.

    ``alpha = 1`` reduces to the expectation, evaluated with the same
    summation order as :func:`expectation`.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if tail not in ("left", "right"):
        raise ValueError(f"tail must be 'left' or 'right', got {tail!r}")
    xs = x.samples if isinstance(x, SampleValue) else _as_samples(x)
    if isinstance(xs, float) or alpha == 1.0:
        return expectation(x)
    return float(np.mean(xs[_tail_indices(xs, alpha, tail)]))


@dataclass(frozen=True)
class Statistic:
    """Statistic applied to a sample vector: expectation or tail mean."""

    kind: str = "expectation"
    alpha: float = 1.0
    tail: str = "left"

    def __post_init__(self):
        if self.kind not in ("expectation", "expected-shortfall"):
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tail not in ("left", "right"):
            raise ValueError(f"tail must be 'left' or 'right', got {self.tail!r}")

    def evaluate(self, x):
        if self.kind == "expectation":
            return expectation(x)
        return expected_shortfall(x, self.alpha, self.tail)

    def weights(self, samples):
        """Per-path weights w such that the statistic equals sum(w * x).

        For the tail mean the weights fix the currently selected paths
        (subgradient of the order statistic).
        """
        if isinstance(samples, float):
            return 1.0
        n = samples.shape[0]
        if self.kind == "expectation" or self.alpha == 1.0:
            return np.full(n, 1.0 / n)
        idx = _tail_indices(samples, self.alpha, self.tail)
        w = np.zeros(n)
        w[idx] = 1.0 / idx.shape[0]
        return w


EXPECTATION = Statistic()


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------


class Tape:
    """Recorded elementary operations in topological order.

    Each node stores its parent handles and the local partial derivative
    with respect to each parent (a float or per-path vector).  Inputs are
    designated through :meth:`variable`.  The tape is confined to one
    evaluation context; rebuild it per objective evaluation.
    """

    def __init__(self):
        self._parents = []
        self._coeffs = []
        self._values = []
        self._inputs = []

    def __len__(self):
        return len(self._values)

    @property
    def inputs(self):
        return tuple(self._inputs)

    def _append(self, parents, coeffs, value):
        self._parents.append(parents)
        self._coeffs.append(coeffs)
        self._values.append(value)
        return len(self._values) - 1

    def variable(self, value):
        """Register an independent input and return its recorded value."""
        samples = _as_samples(value)
        node = self._append((), (), samples)
        self._inputs.append(node)
        return SampleValue(samples, self, node)

    def value_of(self, node):
        return self._values[node]

    # -- reverse sweep ---------------------------------------------------

    def _sweep(self, out_node, seed):
        """Backpropagate ``seed`` from ``out_node``; returns adjoint list.

        Stops as soon as no pending adjoints remain below the cursor, so
        sweeps from early outputs stay cheap.
        """
        adj = [None] * len(self._values)
        adj[out_node] = seed
        pending = 1
        values = self._values
        parents = self._parents
        coeffs = self._coeffs
        for i in range(out_node, -1, -1):
            a = adj[i]
            if a is None:
                continue
            pending -= 1
            for p, c in zip(parents[i], coeffs[i]):
                contrib = a * c
                if isinstance(contrib, np.ndarray) and isinstance(values[p], float):
                    contrib = float(contrib.sum())
                if adj[p] is None:
                    adj[p] = contrib
                    pending += 1
                else:
                    adj[p] = adj[p] + contrib
            if pending == 0:
                break
        return adj

    def _reduced(self, adjoint):
        if adjoint is None:
            return 0.0
        if isinstance(adjoint, np.ndarray):
            return float(adjoint.sum())
        return float(adjoint)

    def gradient(self, output, statistic=None, inputs=None):
        """d(statistic(output))/d(input) for every requested input.

        Returns a map node-handle -> scalar.  ``statistic`` defaults to the
        expectation; for a deterministic output the statistic is the
        identity.  Per-path inputs receive the sum of their per-path
        adjoints (the derivative under a common shift of all paths).
        """
        wanted = self._inputs if inputs is None else [self._node_of(i) for i in inputs]
        if output.tape is None:
            return {n: 0.0 for n in wanted}
        if output.tape is not self:
            raise ValueError("output was not recorded on this tape")
        stat = statistic if statistic is not None else EXPECTATION
        seed = stat.weights(output.samples)
        adj = self._sweep(output.node, seed)
        return {n: self._reduced(adj[n]) for n in wanted}

    def pathwise_adjoints(self, output, inputs=None):
        """Per-path derivatives of the path sum of ``output`` w.r.t. inputs.

        Seeding the reverse sweep with one on every path makes the raw
        adjoint of a per-path input exactly the pathwise derivative along
        its own path.
        """
        wanted = self._inputs if inputs is None else [self._node_of(i) for i in inputs]
        if output.tape is None:
            return {n: 0.0 for n in wanted}
        seed = np.ones_like(output.samples) if isinstance(output.samples, np.ndarray) else 1.0
        adj = self._sweep(output.node, seed)
        return {n: (0.0 if adj[n] is None else adj[n]) for n in wanted}

    def _node_of(self, handle):
        if isinstance(handle, SampleValue):
            if handle.tape is not self:
                raise ValueError("handle not on tape")
            return handle.node
        node = int(handle)
        if not 0 <= node < len(self._values):
            raise ValueError(f"handle {node} not on tape")
        return node

    # -- tangent sweep ---------------------------------------------------

    def tangents(self, wrt):
        """Directional derivatives of every node w.r.t. one input (seed 1).

        A single forward pass over the recorded partials; convenient when
        one perturbation fans out into many observed responses.  Entries
        are ``None`` where the tangent is identically zero.
        """
        node = self._node_of(wrt)
        tan = [None] * len(self._values)
        tan[node] = 1.0
        parents = self._parents
        coeffs = self._coeffs
        for i in range(node + 1, len(self._values)):
            total = None
            for p, c in zip(parents[i], coeffs[i]):
                t = tan[p]
                if t is None:
                    continue
                contrib = c * t
                total = contrib if total is None else total + contrib
            tan[i] = total
        return tan

    def tangent_of(self, tangents, value):
        """Read a node's tangent from a :meth:`tangents` result as a float/array."""
        if isinstance(value, SampleValue) and value.tape is None:
            return 0.0 if not isinstance(value.samples, np.ndarray) else np.zeros_like(value.samples)
        t = tangents[self._node_of(value)]
        if t is None:
            return 0.0 if not isinstance(value.samples, np.ndarray) else np.zeros_like(value.samples)
        return t
