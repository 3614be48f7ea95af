"""Regenerate tests/data/connected_graphs_le8.g6.

Sizes 1-7 come from the networkx graph atlas. Every connected 8-node graph has
a non-cut vertex, so each one arises from a connected 7-node graph plus a new
vertex joined to a non-empty subset; candidates are deduplicated up to
isomorphism (WL-hash buckets, then an exact check).
"""

import itertools
import sys
from pathlib import Path

import networkx as nx

EXPECTED = {1: 1, 2: 1, 3: 2, 4: 6, 5: 21, 6: 112, 7: 853, 8: 11117}


def main(out_path):
    by_size = {n: [] for n in range(1, 9)}
    for g in nx.graph_atlas_g():
        n = g.number_of_nodes()
        if n >= 1 and nx.is_connected(g):
            by_size[n].append(g)

    buckets = {}
    for g in by_size[7]:
        for r in range(1, 8):
            for subset in itertools.combinations(range(7), r):
                h = g.copy()
                h.add_edges_from((7, v) for v in subset)
                key = (tuple(sorted(d for _, d in h.degree())), nx.weisfeiler_lehman_graph_hash(h, iterations=3))
                reps = buckets.setdefault(key, [])
                if not any(nx.is_isomorphic(h, o) for o in reps):
                    reps.append(h)
    by_size[8] = [g for reps in buckets.values() for g in reps]

    for n, gs in by_size.items():
        assert len(gs) == EXPECTED[n], (n, len(gs))
    lines = []
    for n in range(1, 9):
        for g in by_size[n]:
            lines.append(nx.to_graph6_bytes(nx.convert_node_labels_to_integers(g), header=False).decode().strip())
    lines.sort(key=lambda s: (len(s), s))
    Path(out_path).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} graphs to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/connected_graphs_le8.g6")
