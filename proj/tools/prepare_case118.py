#!/usr/bin/env python3
"""Write data/case118.m from the PYPOWER copy of the IEEE 118-bus case.

Two changes are made to the source data:
  * bus column 7 holds the control area: 1 for the buses reachable from bus 1
    once the tie lines below are cut, 2 for the rest;
  * rateA, which the source leaves unset, becomes max(1.2 |f|, 1.5 p.u.) where
    |f| is the largest DC flow on the branch over the base case and every
    branch outage that keeps the network connected, all at the economic
    dispatch of the nominal load (quadratic costs, generator limits only).

usage: prepare_case118.py path/to/case118.py data/case118.m
"""

import importlib.util
import sys
from collections import defaultdict, deque

import numpy as np

TIE_LINES = [(15, 33), (19, 34), (23, 24), (30, 38)]
MIN_RATING_PU = 1.5
RATING_MARGIN = 1.2


def load_ppc(path):
    spec = importlib.util.spec_from_file_location("case118", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod.case118()


def split_areas(bus_ids, branch):
    ties = {frozenset(t) for t in TIE_LINES}
    adj = defaultdict(list)
    for row in branch:
        a, b = int(row[0]), int(row[1])
        if frozenset((a, b)) in ties:
            continue
        adj[a].append(b)
        adj[b].append(a)
    seen = {1}
    queue = deque([1])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    if len(seen) == len(bus_ids):
        sys.exit("tie lines do not split the network")
    return {b: (1 if b in seen else 2) for b in bus_ids}


def economic_dispatch(ppc):
    """Quadratic-cost dispatch of the nominal load, generator limits only."""
    gen = ppc["gen"]
    cost = ppc["gencost"]
    on = gen[:, 7] > 0
    c2, c1 = cost[:, 4], cost[:, 5]
    pmin, pmax = gen[:, 9], gen[:, 8]
    load = ppc["bus"][:, 2].sum()

    def output(lam):
        p = np.where(c2 > 0, (lam - c1) / (2.0 * np.where(c2 > 0, c2, 1.0)), np.where(lam >= c1, pmax, pmin))
        return np.where(on, np.clip(p, pmin, pmax), 0.0)

    lo, hi = -1e6, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if output(mid).sum() < load:
            lo = mid
        else:
            hi = mid
    return output(0.5 * (lo + hi))


def injections(ppc, dispatch):
    bus = ppc["bus"]
    pos = {int(b): k for k, b in enumerate(bus[:, 0])}
    p = -bus[:, 2] / ppc["baseMVA"]
    for g, pg in zip(ppc["gen"], dispatch):
        p[pos[int(g[0])]] += pg / ppc["baseMVA"]
    slack = next(k for k in range(len(p)) if int(bus[k, 1]) == 3)
    p[slack] -= p.sum()
    return p


def dc_flows(ppc, p, out=frozenset()):
    """Row flows with the pairs in `out` removed; None if that islands the network."""
    bus = ppc["bus"]
    pos = {int(b): k for k, b in enumerate(bus[:, 0])}
    n = len(p)
    lap = np.zeros((n, n))
    live = []
    for row in ppc["branch"]:
        a, b = pos[int(row[0])], pos[int(row[1])]
        on = row[10] > 0 and frozenset((int(row[0]), int(row[1]))) not in out
        live.append(on)
        if not on:
            continue
        w = 1.0 / abs(row[3])
        lap[a, a] += w
        lap[b, b] += w
        lap[a, b] -= w
        lap[b, a] -= w
    if np.sum(np.abs(np.linalg.eigvalsh(lap)) < 1e-9) > 1:
        return None
    theta = np.zeros(n)
    theta[1:] = np.linalg.solve(lap[1:, 1:], p[1:])
    flows = []
    for row, on in zip(ppc["branch"], live):
        a, b = pos[int(row[0])], pos[int(row[1])]
        flows.append((theta[a] - theta[b]) / abs(row[3]) if on else 0.0)
    return np.array(flows)


def ratings(ppc):
    """Worst flow per row over the base case and every non-islanding pair outage."""
    p = injections(ppc, economic_dispatch(ppc))
    worst = np.abs(dc_flows(ppc, p))
    for pair in {frozenset((int(r[0]), int(r[1]))) for r in ppc["branch"]}:
        f = dc_flows(ppc, p, frozenset([pair]))
        if f is not None:
            worst = np.maximum(worst, np.abs(f))
    return np.maximum(RATING_MARGIN * worst, MIN_RATING_PU) * ppc["baseMVA"]


def fmt(row):
    return "\t".join(repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in row)


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    ppc = load_ppc(sys.argv[1])
    base = ppc["baseMVA"]
    bus = ppc["bus"].copy()
    branch = ppc["branch"].copy()
    area = split_areas([int(b) for b in bus[:, 0]], branch)
    for k in range(bus.shape[0]):
        bus[k, 6] = area[int(bus[k, 0])]
    branch[:, 5] = np.round(ratings(ppc), 4)

    out = ["function mpc = case118", "% IEEE 118-bus case with two control areas and DC-derived ratings.",
           "mpc.version = '2';", f"mpc.baseMVA = {base:g};", "", "mpc.bus = ["]
    out += [fmt(r) + ";" for r in bus]
    out += ["];", "", "mpc.gen = ["]
    out += [fmt(r) + ";" for r in ppc["gen"]]
    out += ["];", "", "mpc.branch = ["]
    out += [fmt(r) + ";" for r in branch]
    out += ["];", "", "mpc.gencost = ["]
    out += [fmt(r) + ";" for r in ppc["gencost"]]
    out += ["];", ""]
    with open(sys.argv[2], "w") as fh:
        fh.write("\n".join(out))


if __name__ == "__main__":
    main()
