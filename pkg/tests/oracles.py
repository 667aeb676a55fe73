"""Independent reference computations used to freeze and cross-check expected values.

None of these share code with the library paths they check.
"""

import itertools
import math


def brute_lcs_length(a, b):
    """Longest common subsequence length by enumerating subsequences of the shorter input."""
    if len(a) > len(b):
        a, b = b, a
    for k in range(len(a), 0, -1):
        for combo in itertools.combinations(range(len(a)), k):
            if is_subsequence([a[i] for i in combo], b):
                return k
    return 0


def is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def all_paths(edges, source, sink):
    succ = {}
    for p, s in edges:
        succ.setdefault(p, []).append(s)
    out = []

    def walk(node, path):
        if node == sink:
            out.append(path)
            return
        for nxt in succ.get(node, ()):
            walk(nxt, path + [nxt])

    walk(source, [source])
    return out


def max_path_weight(edges, source, sink, node_w, edge_w):
    best = -math.inf
    for path in all_paths(edges, source, sink):
        w = sum(node_w(n) for n in path) + sum(edge_w(p, s) for p, s in zip(path, path[1:]))
        best = max(best, w)
    return best


# -- brute-force composition optimum ----------------------------------------------


def _dist(instance, a, b):
    (x1, y1), (x2, y2) = a, b
    scale = 0.0
    pts = list(instance.network.locations.values())
    for p in pts:
        for q in pts:
            scale = max(scale, math.dist(p, q))
    return 0.0 if scale == 0 else math.dist((x1, y1), (x2, y2)) / scale


def _service_tc(instance, s):
    """Once-mode time and cost of one service straight from the raw fields."""
    net = instance.network
    t, c = s.proc_time, s.service_cost
    for d in s.data_items:
        dist = _dist(instance, d.location, s.location)
        key = tuple(sorted((d.id, s.id)))
        t += net.propagation_factor * dist + d.access_latency + d.size / net.bandwidth[key]
        c += net.comm_cost_factor * dist + d.provision_cost
    return t, c


def _anc(tax, concept):
    out = set()
    while concept is not None:
        out.add(concept)
        concept = tax.parents[concept]
    return out


def brute_force_optimum(instance):
    """Minimum fitness over every feasible composition of the repository.

    A composition is a service subset plus, for every input concept of every
    chosen service and every wanted concept, one provider (the task inputs or
    a chosen service whose output matches).  The wiring must be acyclic and
    every chosen service must feed something.  Only for tiny repositories.
    """
    repo = instance.repository
    tax = instance.taxonomy
    provided = set().union(*(_anc(tax, c) for c in instance.task.provided))
    covers = [set().union(*(_anc(tax, c) for c in s.outputs)) for s in repo]
    tc = [_service_tc(instance, s) for s in repo]
    t_max, c_max = instance.bounds
    wt, wc = instance.weights
    best = math.inf
    END = "end"
    for k in range(0, len(repo) + 1):
        for subset in itertools.combinations(range(len(repo)), k):
            needs = []  # (consumer, concept)
            for i in subset:
                needs += [(i, w) for w in sorted(repo[i].inputs)]
            needs += [(END, w) for w in sorted(instance.task.wanted)]
            options = []
            for consumer, w in needs:
                opts = ["start"] if w in provided else []
                opts += [p for p in subset if p != consumer and w in covers[p]]
                options.append(opts)
            if any(not o for o in options):
                continue
            for choice in itertools.product(*options):
                edges = {(p, consumer) for (consumer, _), p in zip(needs, choice)}
                producers = {p for p, _ in edges}
                if any(i not in producers for i in subset):
                    continue
                if _has_cycle(edges):
                    continue
                node_w = lambda n: tc[n][0] if isinstance(n, int) else 0.0
                edge_w = lambda p, s: (
                    instance.network.propagation_factor * _dist(instance, repo[p].location, repo[s].location)
                    if isinstance(p, int) and isinstance(s, int) else 0.0
                )
                t = max_path_weight(edges, "start", END, node_w, edge_w)
                c = sum(tc[i][1] for i in subset) + sum(
                    instance.network.comm_cost_factor * _dist(instance, repo[p].location, repo[s].location)
                    for p, s in edges if isinstance(p, int) and isinstance(s, int)
                )
                f = wt * t / t_max + wc * c / c_max
                best = min(best, f)
    return best


def _has_cycle(edges):
    succ = {}
    for p, s in edges:
        succ.setdefault(p, []).append(s)
    state = {}

    def visit(n):
        state[n] = 1
        for m in succ.get(n, ()):
            if state.get(m) == 1 or (m not in state and visit(m)):
                return True
        state[n] = 2
        return False

    return any(n not in state and visit(n) for n in list(succ))
