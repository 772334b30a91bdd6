"""Bucket elimination and weighted mini-bucket bounds.

Exact elimination multiplies every factor mentioning the next variable
of the order and sums that variable out; the table guard protects
against accidentally exact-solving a high-width model.

The bounded variant caps how many variables a bucket may touch.  When
the factors mentioning a variable do not fit together under the cap,
they are split across mini-buckets and the variable is summed out of
each one separately with a power sum

    wsum_w(psi) = (sum_x |psi(x)|^(1/w))^w,

computed in the log domain.  Hoelder's inequality makes the product of
the per-mini-bucket power sums an upper bound on the true sum whenever
the weights of one variable are positive and add to 1; the reverse
pattern (a single weight above 1, the rest negative, still summing
to 1) yields a lower bound on nonnegative models.  A mini-bucket with
weight 1 is an ordinary sum of magnitudes, so a tree without splits
reproduces exact elimination on nonnegative factors.

The tree records, for every original factor and every variable of its
scope, which mini-bucket consumed that (factor, variable) incidence.
That assignment defines the split model the bound is literally an exact
sum over, and it is what the brute-force oracle re-enumerates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    IboundTooSmall,
    NumericalUnderflow,
    WidthExceeded,
    ZeroWeight,
)
from .factors import expand_to, signed_sum_axes, SignedLog

BE_ENTRY_GUARD = 2 ** 24


class EliminationOrder(tuple):
    """A permutation of all variable ids, first-eliminated first."""

    def __new__(cls, ids):
        ids = tuple(int(v) for v in ids)
        if len(set(ids)) != len(ids):
            raise ValueError("elimination order repeats a variable")
        return super().__new__(cls, ids)


def _lse_axis(a, axis):
    """logsumexp over one axis, tolerating +-inf entries."""
    m = np.max(a, axis=axis, keepdims=True)
    if np.isfinite(m).all():
        s = np.exp(a - m).sum(axis=axis)
        return np.log(s) + np.squeeze(m, axis=axis)
    return logsumexp(a, axis=axis)


def wsum(logmag, w, axis):
    """Log of the weighted power sum of magnitudes along ``axis``.

    Signs are dropped by definition: the operation acts on |psi|.
    The weight may be negative (reverse pattern); zero is undefined.
    """
    if w == 0.0:
        raise ZeroWeight("power-sum weight must be nonzero")
    logmag = np.asarray(logmag, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return w * _lse_axis(logmag / w, axis)


def _primal_adjacency(g):
    adj = [set() for _ in range(g.num_vars)]
    for f in g.factors:
        for i, u in enumerate(f.scope):
            for v in f.scope[i + 1:]:
                adj[u].add(v)
                adj[v].add(u)
    return adj


def induced_width(g, order):
    """Largest bucket scope size minus one when eliminating in order."""
    adj = _primal_adjacency(g)
    alive = [True] * g.num_vars
    width = 0
    for v in order:
        nbrs = [u for u in adj[v] if alive[u]]
        width = max(width, len(nbrs))
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
        alive[v] = False
    return width


def default_order(g):
    """Greedy min-fill order, smallest variable id on ties.

    As a guard for highly regular inputs where greedy fill stumbles,
    the identity order is simulated as well and returned instead if it
    achieves a strictly smaller induced width.
    """
    adj = _primal_adjacency(g)
    remaining = set(range(g.num_vars))
    order = []
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = [u for u in adj[v] if u in remaining]
            fill = 0
            for i, a in enumerate(nbrs):
                for b in nbrs[i + 1:]:
                    if b not in adj[a]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = [u for u in adj[best] if u in remaining]
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
        remaining.remove(best)
        order.append(best)
    minfill = EliminationOrder(order)
    identity = EliminationOrder(range(g.num_vars))
    if induced_width(g, identity) < induced_width(g, minfill):
        return identity
    return minfill


def run_be(g, order, entry_guard=BE_ENTRY_GUARD):
    """Exact log partition function by bucket elimination.

    Returns a SignedLog so models whose transformed tables carry
    negative entries still evaluate exactly (signed log-domain sums).
    """
    order = EliminationOrder(order)
    if set(order) != set(range(g.num_vars)):
        raise ValueError("order must cover every variable exactly once")
    pos = {v: k for k, v in enumerate(order)}
    buckets = [[] for _ in order]
    for f in g.factors:
        if f.arity == 0:
            raise ValueError("empty-scope factor")
        buckets[min(pos[v] for v in f.scope)].append(f)
    const_sign, const_log = 1.0, 0.0
    cards = g.cards
    for k, v in enumerate(order):
        group = buckets[k]
        if not group:
            # variable in no remaining factor: free sum over its states
            const_log += np.log(cards[v])
            continue
        union = sorted({u for f in group for u in f.scope})
        entries = int(np.prod([cards[u] for u in union]))
        if entries > entry_guard:
            raise WidthExceeded(len(union) - 1, entry_guard)
        shape = tuple(cards[u] for u in union)
        sign = np.ones(shape)
        logmag = np.zeros(shape)
        for f in group:
            sign = sign * expand_to(f.sign, f.scope, union)
            logmag = logmag + expand_to(f.logmag, f.scope, union)
        ax = union.index(v)
        out_sign, out_log = signed_sum_axes(sign, logmag, ax)
        rest = [u for u in union if u != v]
        if not rest:
            const_sign *= float(out_sign)
            const_log += float(out_log)
            if const_sign == 0.0:
                return SignedLog(0.0, -np.inf)
            continue
        from .factors import Factor

        nf = Factor(tuple(rest), tuple(cards[u] for u in rest), out_sign, out_log)
        buckets[min(pos[u] for u in rest)].append(nf)
    return SignedLog(const_sign, const_log)


@dataclass(frozen=True)
class MiniBucket:
    """One elimination step of one copy of a variable."""

    index: int
    var: int
    copy: int
    scope: tuple          # sorted variable ids, includes var
    factor_ids: tuple     # original factors first consumed here
    children: tuple       # mini-bucket indices whose messages feed here
    parent: int | None
    weight: float


@dataclass(frozen=True)
class MiniBucketTree:
    """Static structure of a bounded elimination run.

    ``factor_incidence[fid]`` maps each variable of factor fid's scope
    (in scope order) to the mini-bucket that summed that variable out of
    the chain containing the factor; together these assignments define
    the split model.  ``initial_weights`` carries the per-mini-bucket
    starting weights for the tree's direction; evaluation may override
    them (the structure never changes during weight optimization).
    """

    cards: tuple
    order: EliminationOrder
    ibound: int
    direction: str
    buckets: tuple
    factor_bucket: tuple      # fid -> consuming mini-bucket index
    factor_incidence: tuple   # fid -> tuple of mini-bucket indices
    initial_weights: tuple

    @property
    def splits(self):
        """Original variable id -> indices of the mini-buckets that copy it."""
        reg = {}
        for b in self.buckets:
            reg.setdefault(b.var, []).append(b.index)
        return {v: tuple(ks) for v, ks in reg.items()}

    @property
    def num_split_vars(self):
        return len(self.buckets)

    @property
    def roots(self):
        return tuple(b.index for b in self.buckets if b.parent is None)

    def with_direction_weights(self, weights):
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(self.buckets):
            raise ValueError("one weight per mini-bucket required")
        buckets = tuple(
            MiniBucket(b.index, b.var, b.copy, b.scope, b.factor_ids,
                       b.children, b.parent, weights[b.index])
            for b in self.buckets
        )
        return MiniBucketTree(self.cards, self.order, self.ibound,
                              self.direction, buckets, self.factor_bucket,
                              self.factor_incidence, weights)


def lower_weights(r):
    """Reverse-pattern start: one weight above 1, the rest at -1/2."""
    if r == 1:
        return [1.0]
    return [1.0 + 0.5 * (r - 1)] + [-0.5] * (r - 1)


def build_minibucket_tree(g, order, ibound, direction="upper"):
    """Plan a bounded elimination of ``g`` along ``order``.

    A mini-bucket may touch at most ibound + 1 variables (width ibound),
    so ibound at or above the induced width of the order produces no
    splits.  Every factor must fit in one mini-bucket.  Oversized
    buckets are split by first-fit over clusters sorted by descending
    scope size (ties by creation); on a degree-2 model at most two
    clusters ever mention a variable, so at most two mini-buckets arise
    per variable.  Starting weights are uniform (upper) or the reverse
    pattern from ``lower_weights`` (lower).
    """
    if direction not in ("upper", "lower"):
        raise ValueError(f"unknown direction {direction!r}")
    order = EliminationOrder(order)
    if set(order) != set(range(g.num_vars)):
        raise ValueError("order must cover every variable exactly once")
    ibound = int(ibound)
    capacity = ibound + 1
    for fid, f in enumerate(g.factors):
        if f.arity > capacity:
            raise IboundTooSmall(fid, f.arity, ibound)

    # clusters: (scope frozenset, kind, id, ancestry factor ids, creation idx)
    clusters = []
    for fid, f in enumerate(g.factors):
        clusters.append({
            "scope": frozenset(f.scope), "kind": "factor", "id": fid,
            "anc": frozenset((fid,)), "created": fid,
        })
    created = len(clusters)
    buckets = []
    parents = {}
    factor_bucket = [None] * g.num_factors
    incidence = [dict() for _ in range(g.num_factors)]
    fscopes = [set(f.scope) for f in g.factors]

    for v in order:
        group = [c for c in clusters if v in c["scope"]]
        if not group:
            raise ValueError(f"variable {v} appears in no factor")
        group.sort(key=lambda c: (-len(c["scope"]), c["created"]))
        bins = []
        for c in group:
            for b in bins:
                if len(b["scope"] | c["scope"]) <= capacity:
                    b["scope"] |= c["scope"]
                    b["members"].append(c)
                    break
            else:
                bins.append({"scope": set(c["scope"]), "members": [c]})
        r_v = len(bins)
        if direction == "upper":
            ws = [1.0 / r_v] * r_v
        else:
            ws = lower_weights(r_v)
        for r, b in enumerate(bins):
            idx = len(buckets)
            scope = tuple(sorted(b["scope"]))
            fids = tuple(c["id"] for c in b["members"] if c["kind"] == "factor")
            children = tuple(c["id"] for c in b["members"] if c["kind"] == "msg")
            anc = frozenset().union(*(c["anc"] for c in b["members"]))
            for fid in fids:
                factor_bucket[fid] = idx
            for fid in anc:
                if v in fscopes[fid]:
                    incidence[fid][v] = idx
            for ch in children:
                parents[ch] = idx
            buckets.append({
                "var": v, "copy": r, "scope": scope, "fids": fids,
                "children": children, "weight": ws[r],
            })
            rest = frozenset(u for u in scope if u != v)
            for c in b["members"]:
                clusters.remove(c)
            if rest:
                clusters.append({
                    "scope": rest, "kind": "msg", "id": idx,
                    "anc": anc, "created": created,
                })
                created += 1

    final = tuple(
        MiniBucket(i, b["var"], b["copy"], b["scope"], b["fids"],
                   b["children"], parents.get(i), b["weight"])
        for i, b in enumerate(buckets)
    )
    weights = tuple(b["weight"] for b in buckets)
    fact_inc = tuple(
        tuple(incidence[fid][u] for u in g.factors[fid].scope)
        for fid in range(g.num_factors)
    )
    return MiniBucketTree(g.cards, order, ibound, direction, final,
                          tuple(factor_bucket), fact_inc, weights)


def check_weights(tree, weights, direction):
    """Weights must sum to 1 per variable and match the bound direction."""
    groups = {}
    for b in tree.buckets:
        groups.setdefault(b.var, []).append(weights[b.index])
    for v, ws in groups.items():
        if any(w == 0.0 for w in ws):
            raise ZeroWeight(f"zero weight at variable {v}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError(f"weights at variable {v} sum to {sum(ws)}")
        pos = sum(1 for w in ws if w > 0.0)
        if direction == "upper" and pos != len(ws):
            raise ValueError(f"upper direction needs positive weights at {v}")
        if direction == "lower" and pos != 1:
            raise ValueError(
                f"lower direction needs exactly one positive weight at {v}"
            )


class TreeEvaluator:
    """Incremental evaluation of a mini-bucket bound.

    Holds, per mini-bucket, the combined log-magnitude table ``psi`` of
    everything assigned to it and the eliminated message ``msg``.  Only
    magnitudes matter here: power sums act on |psi| by definition, so
    factor signs never enter the bound.  All bucket tables are laid out
    over their sorted scopes, which makes every alignment a cheap
    reshape of a contiguous array.

    ``set_factors``/``set_weights`` recompute just the path from the
    touched mini-buckets to their roots and return an undo token, which
    is what makes accept/reject optimization steps cheap.
    """

    def __init__(self, tree, factors, weights=None, mode="wsum"):
        if mode not in ("wsum", "mbe"):
            raise ValueError(f"unknown mode {mode!r}")
        self.tree = tree
        self.mode = mode
        self.weights = np.array(
            tree.initial_weights if weights is None else weights, dtype=float
        )
        if mode == "wsum":
            check_weights(tree, self.weights, tree.direction)
        cards = tree.cards
        self._aligned = [None] * len(factors)
        self._orig_scope = [tuple(f.scope) for f in factors]
        self._sorted_scope = [tuple(sorted(f.scope)) for f in factors]
        for fid, f in enumerate(factors):
            self._aligned[fid] = self._align_factor(f)
        # static per-bucket plan
        self._plan = []
        for b in tree.buckets:
            shape = tuple(cards[u] for u in b.scope)
            members = []
            for fid in b.factor_ids:
                members.append(("f", fid, self._member_shape(
                    self._sorted_scope[fid], b.scope, cards)))
            for ch in b.children:
                child_scope = tuple(
                    u for u in tree.buckets[ch].scope
                    if u != tree.buckets[ch].var
                )
                members.append(("m", ch, self._member_shape(
                    child_scope, b.scope, cards)))
            self._plan.append((members, shape, b.scope.index(b.var)))
        self.psi = [None] * len(tree.buckets)
        self.msg = [None] * len(tree.buckets)
        self._roots = tree.roots
        for k in range(len(tree.buckets)):
            self._recompute(k)

    @staticmethod
    def _member_shape(member_scope, bucket_scope, cards):
        shape = [1] * len(bucket_scope)
        for u in member_scope:
            i = bucket_scope.index(u)
            shape[i] = cards[u]
        return tuple(shape)

    def _align_factor(self, f):
        scope_sorted = tuple(sorted(f.scope))
        perm = [f.scope.index(u) for u in scope_sorted]
        return np.ascontiguousarray(np.transpose(f.logmag, perm))

    def _elim(self, a, axis, k):
        if self.mode == "mbe":
            if self.tree.buckets[k].copy == 0:
                return _lse_axis(a, axis)
            return np.max(a, axis=axis)
        w = self.weights[k]
        with np.errstate(invalid="ignore"):
            return w * _lse_axis(a / w, axis)

    def _recompute(self, k):
        members, shape, axis = self._plan[k]
        kind, idx, mshape = members[0]
        src = self._aligned[idx] if kind == "f" else self.msg[idx]
        psi = np.broadcast_to(src.reshape(mshape), shape)
        for kind, idx, mshape in members[1:]:
            src = self._aligned[idx] if kind == "f" else self.msg[idx]
            psi = psi + src.reshape(mshape)
        self.psi[k] = psi
        self.msg[k] = self._elim(psi, axis, k)

    def bound(self):
        """Current log bound: the sum of all root constants."""
        return float(sum(float(self.msg[k]) for k in self._roots))

    def _path_from(self, touched):
        path = set()
        for k in touched:
            while k is not None and k not in path:
                path.add(k)
                k = self.tree.buckets[k].parent
        return sorted(path)

    def set_factors(self, updates):
        """Replace factor tables; returns an undo token."""
        touched = set()
        undo_f = {}
        for fid, f in updates.items():
            undo_f[fid] = self._aligned[fid]
            self._aligned[fid] = self._align_factor(f)
            touched.add(self.tree.factor_bucket[fid])
        path = self._path_from(touched)
        undo_b = {k: (self.psi[k], self.msg[k]) for k in path}
        for k in path:
            self._recompute(k)
        return ("f", undo_f, undo_b)

    def set_weights(self, updates):
        """Set per-mini-bucket weights; returns an undo token."""
        undo_w = {k: self.weights[k] for k in updates}
        for k, w in updates.items():
            if w == 0.0:
                raise ZeroWeight(f"zero weight at mini-bucket {k}")
            self.weights[k] = w
        path = self._path_from(set(updates))
        undo_b = {k: (self.psi[k], self.msg[k]) for k in path}
        for k in path:
            self._recompute(k)
        return ("w", undo_w, undo_b)

    def restore(self, token):
        kind, undo_x, undo_b = token
        if kind == "f":
            for fid, arr in undo_x.items():
                self._aligned[fid] = arr
        else:
            for k, w in undo_x.items():
                self.weights[k] = w
        for k, (psi, msg) in undo_b.items():
            self.psi[k] = psi
            self.msg[k] = msg

    # ---- auxiliary chain-rule distribution ----------------------------

    def beliefs(self, bucket_ids, memo=None):
        """Joint tables of the auxiliary distribution over bucket scopes.

        The distribution is the product over mini-buckets of the
        conditionals (|psi|/msg)^(1/w); its marginal over a mini-bucket
        scope is that conditional times the parent marginal, walked
        root-downward.  Slices whose normalizer vanished carry zero
        parent mass, so their conditional is set to zero outright.
        """
        if self.mode != "wsum":
            raise ValueError("auxiliary distribution needs power-sum mode")
        memo = {} if memo is None else memo
        need = []
        for k in bucket_ids:
            j = k
            while j is not None and j not in memo:
                need.append(j)
                j = self.tree.buckets[j].parent
        for k in sorted(set(need), reverse=True):
            b = self.tree.buckets[k]
            members, shape, axis = self._plan[k]
            msg = self.msg[k]
            if b.parent is None and np.ndim(msg) == 0 and np.isneginf(msg):
                raise NumericalUnderflow(
                    f"zero normalizer at root mini-bucket {k}"
                )
            mexp = np.expand_dims(msg, axis)
            with np.errstate(invalid="ignore"):
                rho = np.exp((self.psi[k] - mexp) / self.weights[k])
            if np.isneginf(msg).any():
                rho = np.where(np.isneginf(mexp), 0.0, rho)
            if b.parent is None:
                memo[k] = rho
                continue
            pb = memo[b.parent]
            pscope = self.tree.buckets[b.parent].scope
            rest = tuple(u for u in b.scope if u != b.var)
            keep = set(rest)
            drop = tuple(i for i, u in enumerate(pscope) if u not in keep)
            pm = pb.sum(axis=drop) if drop else pb
            memo[k] = rho * np.expand_dims(pm, axis)
        return memo

    def factor_marginal(self, fid, memo=None):
        """Marginal of the auxiliary distribution over a factor's scope.

        Returned in the factor's own axis order; the split copies are
        those of the mini-bucket that consumed the factor.
        """
        k = self.tree.factor_bucket[fid]
        memo = self.beliefs((k,), memo)
        b = memo[k]
        bscope = self.tree.buckets[k].scope
        fscope = self._orig_scope[fid]
        keep = set(fscope)
        drop = tuple(i for i, u in enumerate(bscope) if u not in keep)
        m = b.sum(axis=drop) if drop else b
        srt = self._sorted_scope[fid]
        perm = [srt.index(u) for u in fscope]
        return np.transpose(m, perm)

    def bucket_of(self, fid):
        return self.tree.factor_bucket[fid]


def run_wmbe(g, tree, weights=None):
    """Weighted mini-bucket bound on log Z for the tree's direction."""
    t0 = time.perf_counter()
    ev = TreeEvaluator(tree, g.factors, weights=weights, mode="wsum")
    lb = ev.bound()
    name = "wmbe" if tree.direction == "upper" else "wmbe-lower"
    return BoundResult(name, tree.direction, lb, (lb,),
                       time.perf_counter() - t0)


def run_mbe(g, tree):
    """Classic mini-bucket upper bound: one sum, max elsewhere."""
    t0 = time.perf_counter()
    ev = TreeEvaluator(tree, g.factors, mode="mbe")
    lb = ev.bound()
    return BoundResult("mbe", "upper", lb, (lb,), time.perf_counter() - t0)


@dataclass(frozen=True)
class BoundResult:
    """Outcome of one bounding run."""

    method: str
    direction: str
    log_bound: float
    trace: tuple
    wall_time: float

    @property
    def iterations(self):
        return len(self.trace) - 1
