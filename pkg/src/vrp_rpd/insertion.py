"""Incremental insertion evaluation shared by the repair operators and the
construction heuristics.

All candidate positions are ranked with two-pass timing semantics: dropoff
times come from a no-wait walk of each route (pass 1), pickups wait for
``max(arrival, ready)`` using those ready times (pass 2).  Per-route prefix
and suffix aggregates make evaluating every insertion gap of a route O(1)
per gap:

* ``T[i]``    cumulative travel into op i,
* ``dep[i]``  pass-2 departure, via ``T[i] + max(0, max_j<=i(ready_j - T_j))``,
* ``M[i]``    suffix max of ``ready_j - T_j`` (-inf where no pickups remain),
* prefix/suffix bounds on the feasible initial-load interval for capacity.

Inserting an operation at gap g shifts only the suffix, so the new route
completion is ``T[-1] + max(s_entry - T[g], M[g]) + exit_leg``, and capacity
feasibility is an O(1) interval intersection (a dropoff raises the suffix
needs by one, a pickup lowers the suffix room by one).

Rankings are heuristic; callers must re-score any retained candidate with the
exact evaluator.
"""

from __future__ import annotations

from .schedule import OpKind, Solution

_D = OpKind.DROPOFF
_P = OpKind.PICKUP
_NEG_INF = float("-inf")
_POS_INF = float("inf")

# Secondary ranking term: with a pure makespan objective most insertions off
# the bottleneck tie at zero delta, so the summed route returns break ties.
_TIE_WEIGHT = 1e-6


class RepairFailed(Exception):
    """No feasible reinsertion exists, or the rebuilt candidate deadlocks."""


class _Route:
    __slots__ = ("seq", "T", "dep", "M", "sp", "lo_pre", "hi_pre",
                 "lo_suf", "hi_suf", "drops_suf", "ret", "exit_leg")

    def __init__(self):
        self.seq = []
        self.ret = 0.0
        self.exit_leg = 0.0


class InsertionContext:
    """Mutable set of tours with incremental two-pass timing aggregates."""

    def __init__(self, instance, tours):
        self.instance = instance
        self.d = instance.d
        self.p = instance.p
        self.k = instance.k
        self.tours = [list(t) for t in tours]
        self.routes = [_Route() for _ in self.tours]
        self.ready: dict = {}
        self.pos_d: dict = {}
        self.rebuild_all()

    # -- state maintenance --------------------------------------------------

    def _pass1(self, v: int) -> None:
        d, p = self.d, self.p
        t, loc = 0.0, 0
        for i, (c, kind) in enumerate(self.tours[v]):
            t += d[loc][c]
            loc = c
            if kind is _D:
                self.ready[c] = t + p[c]
                self.pos_d[c] = (v, i)

    def _pass2(self, v: int) -> None:
        d, k = self.d, self.k
        r = self.routes[v]
        seq = r.seq = self.tours[v]
        L = len(seq)
        T = r.T = [0.0] * L
        dep = r.dep = [0.0] * L
        M = r.M = [0.0] * L
        # gap-indexed arrays, length L+1
        sp = r.sp = [0] * (L + 1)
        lo_pre = r.lo_pre = [0] * (L + 1)
        hi_pre = r.hi_pre = [k] * (L + 1)
        lo_suf = r.lo_suf = [_NEG_INF] * (L + 1)
        hi_suf = r.hi_suf = [_POS_INF] * (L + 1)
        r.drops_suf = [0] * (L + 1)
        if not L:
            r.ret = 0.0
            r.exit_leg = 0.0
            return
        t, loc = 0.0, 0
        runmax = 0.0
        s, lo, hi = 0, 0, k
        for i, (c, kind) in enumerate(seq):
            t += d[loc][c]
            loc = c
            T[i] = t
            if kind is _P:
                base = self.ready[c] - t
                if base > runmax:
                    runmax = base
                room = k - 1 - s
                if room < hi:
                    hi = room
                s += 1
            else:
                need = 1 - s
                if need > lo:
                    lo = need
                s -= 1
            dep[i] = t + runmax
            sp[i + 1] = s
            lo_pre[i + 1] = lo
            hi_pre[i + 1] = hi
        sufmax = _NEG_INF
        slo, shi = _NEG_INF, _POS_INF
        drops_suf = r.drops_suf
        ndrops = 0
        for i in range(L - 1, -1, -1):
            c, kind = seq[i]
            if kind is _P:
                base = self.ready[c] - T[i]
                if base > sufmax:
                    sufmax = base
                room = k - 1 - sp[i]
                if room < shi:
                    shi = room
            else:
                need = 1 - sp[i]
                if need > slo:
                    slo = need
                ndrops += 1
            M[i] = sufmax
            lo_suf[i] = slo
            hi_suf[i] = shi
            drops_suf[i] = ndrops
        r.exit_leg = d[seq[-1][0]][0]
        r.ret = dep[-1] + r.exit_leg

    def _refresh_aggregates(self) -> None:
        rets = [r.ret for r in self.routes]
        self._sum_ret = sum(rets)
        top1, top2 = 0.0, 0.0
        arg1 = -1
        for v, ret in enumerate(rets):
            if ret > top1:
                top1, top2, arg1 = ret, top1, v
            elif ret > top2:
                top2 = ret
        self._omax = [top2 if v == arg1 else top1 for v in range(len(rets))]

    def rebuild_all(self) -> None:
        self.ready.clear()
        self.pos_d.clear()
        for v in range(len(self.tours)):
            self._pass1(v)
        for v in range(len(self.tours)):
            self._pass2(v)
        self._refresh_aggregates()

    def rebuild_route(self, v: int) -> None:
        # Route-local refresh: other routes keep slightly stale pickup waits
        # until the next full rebuild, which is fine for candidate ranking.
        self._pass1(v)
        self._pass2(v)
        self._refresh_aggregates()

    # -- queries ------------------------------------------------------------

    def returns(self) -> list:
        return [r.ret for r in self.routes]

    def est_makespan(self) -> float:
        return max(r.ret for r in self.routes)

    def sum_returns(self) -> float:
        return self._sum_ret

    def other_max(self, v: int) -> float:
        return self._omax[v]

    def cost_of(self, v: int, new_ret: float) -> float:
        other = self._omax[v]
        mk = new_ret if new_ret > other else other
        return mk + _TIE_WEIGHT * (self._sum_ret - self.routes[v].ret + new_ret)

    def eval_gaps(self, v: int, c: int, kind: OpKind, min_gap: int = 0):
        """All capacity-feasible gaps for placing (c, kind) on route v.

        Returns (gap, resulting route return, stale) triples where ``stale``
        counts the suffix dropoffs the insertion strictly delays: their
        announced ready times become optimistic, so equal-return candidates
        with lower counts are more trustworthy.
        """
        d, k = self.d, self.k
        r = self.routes[v]
        seq = r.seq
        L = len(seq)
        ready_c = self.ready.get(c, 0.0)
        is_drop = kind is _D
        if not is_drop:
            dpos = self.pos_d.get(c)
            if dpos is not None and dpos[0] == v and dpos[1] + 1 > min_gap:
                min_gap = dpos[1] + 1
        out = []
        d_row = d[c]
        sp, lo_pre, hi_pre = r.sp, r.lo_pre, r.hi_pre
        lo_suf, hi_suf, drops_suf = r.lo_suf, r.hi_suf, r.drops_suf
        T, dep, M = r.T, r.dep, r.M
        t_last = T[-1] + r.exit_leg if L else 0.0
        for g in range(min_gap, L + 1):
            sp_g = sp[g]
            if is_drop:
                lo = max(lo_pre[g], 1 - sp_g, lo_suf[g] + 1)
                hi = min(hi_pre[g], hi_suf[g] + 1, k)
            else:
                lo = max(lo_pre[g], lo_suf[g] - 1, 0)
                hi = min(hi_pre[g], k - 1 - sp_g, hi_suf[g] - 1)
            if lo > hi:
                continue
            prev_dep = dep[g - 1] if g else 0.0
            prev_loc = seq[g - 1][0] if g else 0
            arr = prev_dep + d[prev_loc][c]
            dep_x = arr if is_drop or arr >= ready_c else ready_c
            if g == L:
                new_ret = dep_x + d_row[0]
                stale = 0
            else:
                s_entry = dep_x + d_row[seq[g][0]]
                tail = s_entry - T[g]
                mg = M[g]
                new_ret = t_last + (tail if tail > mg else mg)
                old_entry = prev_dep + (T[g] - (T[g - 1] if g else 0.0))
                stale = drops_suf[g] if s_entry > old_entry + 1e-12 else 0
            out.append((g, new_ret, stale))
        return out

    def eval_pair_gaps(self, v: int, c: int):
        """Gaps for inserting dropoff and pickup adjacently (the vehicle
        waits on-site); the pair nets zero capacity change for the suffix."""
        d, p, k = self.d, self.p, self.k
        r = self.routes[v]
        seq = r.seq
        L = len(seq)
        out = []
        for g in range(L + 1):
            sp_g = r.sp[g]
            lo = max(r.lo_pre[g], r.lo_suf[g], 1 - sp_g)
            hi = min(r.hi_pre[g], r.hi_suf[g], k - sp_g)
            if lo > hi:
                continue
            prev_dep = r.dep[g - 1] if g else 0.0
            prev_loc = seq[g - 1][0] if g else 0
            dep_x = prev_dep + d[prev_loc][c] + p[c]
            if g == L:
                new_ret = dep_x + d[c][0]
                stale = 0
            else:
                s_entry = dep_x + d[c][seq[g][0]]
                tail = s_entry - r.T[g]
                mg = r.M[g]
                new_ret = r.T[-1] + (tail if tail > mg else mg) + r.exit_leg
                old_entry = (r.dep[g - 1] if g else 0.0) + (r.T[g] - (r.T[g - 1] if g else 0.0))
                stale = r.drops_suf[g] if s_entry > old_entry + 1e-12 else 0
            out.append((g, new_ret, stale))
        return out

    def ret_after_drop(self, v: int, gap: int, c: int) -> float:
        """Exact two-pass return of route v with a dropoff of c inserted at
        ``gap``, including the ready-time shifts of delayed dropoffs on this
        route (which the O(1) gap formula cannot see).  Two light walks, no
        state change."""
        d, p = self.d, self.p
        seq = self.tours[v]
        L = len(seq)
        if not L:
            return d[0][c] + d[c][0]
        over = {c: 0.0}
        t, loc = 0.0, 0
        for j in range(L + 1):
            if j == gap:
                cc, kind = c, _D
            else:
                cc, kind = seq[j - 1 if j > gap else j]
            t += d[loc][cc]
            loc = cc
            if kind is _D:
                over[cc] = t + p[cc]
        ready = self.ready
        t, loc = 0.0, 0
        for j in range(L + 1):
            if j == gap:
                cc, kind = c, _D
            else:
                cc, kind = seq[j - 1 if j > gap else j]
            t += d[loc][cc]
            loc = cc
            if kind is _P:
                r = over.get(cc)
                if r is None:
                    r = ready.get(cc, 0.0)
                if r > t:
                    t = r
        return t + d[loc][0]

    # -- mutation -----------------------------------------------------------

    def commit(self, v: int, gap: int, c: int, kind: OpKind, full: bool = True) -> None:
        self.tours[v].insert(gap, (c, kind))
        if full:
            self.rebuild_all()
        else:
            self.rebuild_route(v)

    def commit_pair(self, v: int, gap: int, c: int) -> None:
        self.tours[v].insert(gap, (c, _P))
        self.tours[v].insert(gap, (c, _D))
        self.rebuild_all()

    def tentative_drop(self, v: int, gap: int, c: int):
        """Insert a dropoff with route-local rebuild; returns a restore token.
        The old route state is saved wholesale so restore is O(1)."""
        token = (v, self.tours[v], self.routes[v], self.ready,
                 self.pos_d, self._sum_ret, self._omax)
        seq = list(self.tours[v])
        seq.insert(gap, (c, _D))
        self.tours[v] = seq
        self.routes[v] = _Route()
        self.ready = dict(self.ready)
        self.pos_d = dict(self.pos_d)
        self.rebuild_route(v)
        return token

    def restore(self, token) -> None:
        (v, tour, route, ready, pos_d, sum_ret, omax) = token
        self.tours[v] = tour
        self.routes[v] = route
        self.ready = ready
        self.pos_d = pos_d
        self._sum_ret = sum_ret
        self._omax = omax

    def solution(self) -> Solution:
        return Solution.from_lists(self.tours)


# ---------------------------------------------------------------------------
# Partial solutions
# ---------------------------------------------------------------------------


def _first_capacity_break(tours, k: int):
    """Customer of the first op that makes a route's initial-load interval
    empty, or None when every route admits a feasible initial load."""
    for tour in tours:
        s, lo, hi = 0, 0, k
        for c, kind in tour:
            if kind is _D:
                need = 1 - s
                if need > lo:
                    lo = need
                s -= 1
            else:
                room = k - 1 - s
                if room < hi:
                    hi = room
                s += 1
            if lo > hi:
                return c
    return None


def remove_customers(instance, solution: Solution, customers) -> tuple:
    """Remove both operations of the given customers from a solution.

    Dropping a customer whose operations sit on different vehicles can leave
    a remaining route without any feasible initial load (a near-full pickup
    loses the dropoff that made room for it, or a dropoff loses an earlier
    pickup).  Such casualties are cascaded into the removal set so the
    partial handed to repair is always capacity-valid.  Returns (tours,
    removed): the reported list is the full expanded set.
    """
    removed = set(customers)
    tours = [[op for op in tour if op[0] not in removed] for tour in solution.tours]
    while True:
        broken = _first_capacity_break(tours, instance.k)
        if broken is None:
            break
        removed.add(broken)
        tours = [[op for op in tour if op[0] != broken] for tour in tours]
    return tours, sorted(removed)


# ---------------------------------------------------------------------------
# Reinsertion
# ---------------------------------------------------------------------------


_DROP_GAP_SHORTLIST = 3

# Stochastic selection window: with an rng attached, any candidate whose cost
# lies within this fraction of the best may be chosen.  Keeps clearly-better
# placements deterministic while diversifying near-ties, which matters on
# tiny instances where the whole solution is rebuilt every iteration.
_SELECTION_WINDOW = 0.02


def _pick_windowed(cands, rng):
    """cands: (key, payload) pairs where key[0] is the cost; deterministic
    argmin without an rng, otherwise uniform among the near-best."""
    best_key = min(k for k, _ in cands)
    if rng is None:
        for k, payload in cands:
            if k == best_key:
                return k, payload
    limit = best_key[0] * (1.0 + _SELECTION_WINDOW) + 1e-12
    window = [(k, pl) for k, pl in cands if k[0] <= limit]
    if len(window) == 1:
        return window[0]
    return window[int(rng.integers(len(window)))]


def customer_options(ctx: InsertionContext, c: int, rng=None):
    """Per-dropoff-vehicle insertion options for customer c.

    For each vehicle able to host the dropoff, the cheapest few dropoff gaps
    by the O(1) formula are re-scored with a tentative commit (which also
    refreshes that route's ready times, something the formula cannot see when
    the insertion delays later dropoffs), then every (vehicle, gap) pair for
    the pickup is evaluated against the updated timings.  Returns a
    cost-sorted list of (cost, vD, gD, vP, gP, pair) tuples; ``pair`` marks
    the adjacent drop-and-wait fallback used when no split placement is
    feasible.  With an rng, near-tied placements are chosen at random.
    """
    m = len(ctx.tours)
    options = []
    for vd in range(m):
        d_gaps = ctx.eval_gaps(vd, c, _D)
        if not d_gaps:
            continue
        d_gaps.sort(key=lambda gr: (ctx.cost_of(vd, gr[1]), gr[2], gr[0]))
        # Choose the dropoff gap by its post-insert route timing: the O(1)
        # formula cannot see ready times shifting when the insertion delays
        # later dropoffs, so the cheapest few gaps are re-scored exactly.
        drop_cands = []
        for g_drop, _ret, d_stale in d_gaps[:_DROP_GAP_SHORTLIST]:
            key = (ctx.cost_of(vd, ctx.ret_after_drop(vd, g_drop, c)), d_stale, g_drop)
            drop_cands.append((key, g_drop))
        (_, d_stale, _), g_drop = _pick_windowed(drop_cands, rng)
        token = ctx.tentative_drop(vd, g_drop, c)
        pick_cands = []
        for vp in range(m):
            for g, new_ret, stale in ctx.eval_gaps(vp, c, _P):
                key = (ctx.cost_of(vp, new_ret), d_stale + stale, vp, g)
                pick_cands.append((key, (vp, g)))
        ctx.restore(token)
        if pick_cands:
            key, (vp, g) = _pick_windowed(pick_cands, rng)
            options.append((key[0], key[1], vd, g_drop, vp, g, False))
    if not options:
        for v in range(m):
            for g, new_ret, stale in ctx.eval_pair_gaps(v, c):
                options.append((ctx.cost_of(v, new_ret), stale, v, g, v, g + 1, True))
    if len(options) > 1:
        options.sort(key=lambda o: (o[0], o[1], o[2], o[3]))
    return options


def apply_option(ctx: InsertionContext, c: int, option) -> None:
    _, _, vd, gd, vp, gp, pair = option
    if pair:
        ctx.commit_pair(vd, gd, c)
    else:
        ctx.commit(vd, gd, c, _D)
        ctx.commit(vp, gp, c, _P)


def reinsert_all(ctx: InsertionContext, removed, regret_k: int = 0, rng=None) -> None:
    """Reinsert every removed customer; regret_k=0 is greedy insertion,
    otherwise highest regret over the k cheapest per-vehicle options first.
    An rng randomizes near-tied choices (see _SELECTION_WINDOW)."""
    remaining = sorted(set(removed))
    while remaining:
        if regret_k == 0:
            cands = []
            for c in remaining:
                opts = customer_options(ctx, c, rng)
                if not opts:
                    raise RepairFailed(f"no feasible insertion for customer {c}")
                cands.append(((opts[0][0], opts[0][1], c), (c, opts[0])))
            _, (chosen, chosen_opt) = _pick_windowed(cands, rng)
        else:
            best_key = None
            chosen = chosen_opt = None
            for c in remaining:
                opts = customer_options(ctx, c, rng)
                if not opts:
                    raise RepairFailed(f"no feasible insertion for customer {c}")
                if len(opts) < regret_k:
                    regret = _POS_INF
                else:
                    c1 = opts[0][0]
                    regret = sum(opts[h][0] - c1 for h in range(1, regret_k))
                # max regret first, then cheapest best option
                key = (-regret, opts[0][0], opts[0][1], c)
                if best_key is None or key < best_key:
                    best_key = key
                    chosen, chosen_opt = c, opts[0]
        apply_option(ctx, chosen, chosen_opt)
        remaining.remove(chosen)


# ---------------------------------------------------------------------------
# Removal gain estimation (for gain-ranked destroy operators)
# ---------------------------------------------------------------------------


def _walk_return(seq, d, ready) -> float:
    if not seq:
        return 0.0
    t, loc = 0.0, 0
    for c, kind in seq:
        t += d[loc][c]
        loc = c
        if kind is _P:
            r = ready.get(c)
            if r is not None and r > t:
                t = r
    return t + d[loc][0]


def removal_gains(instance, solution: Solution) -> dict:
    """Estimated makespan reduction from removing each customer's two
    operations, under fixed pickup-ready times."""
    d, p = instance.d, instance.p
    tours = [list(t) for t in solution.tours]

    ready: dict = {}
    for tour in tours:
        t, loc = 0.0, 0
        for c, kind in tour:
            t += d[loc][c]
            loc = c
            if kind is _D:
                ready[c] = t + p[c]
    rets = [_walk_return(tour, d, ready) for tour in tours]
    where: dict = {}
    for v, tour in enumerate(tours):
        for c, _kind in tour:
            where.setdefault(c, set()).add(v)

    cur = max(rets) if rets else 0.0
    gains = {}
    for c in instance.customers:
        affected = where.get(c, set())
        new_mk = max((r for v, r in enumerate(rets) if v not in affected), default=0.0)
        for v in affected:
            seq = [op for op in tours[v] if op[0] != c]
            r = _walk_return(seq, d, ready)
            if r > new_mk:
                new_mk = r
        gains[c] = cur - new_mk
    return gains
