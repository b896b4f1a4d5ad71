"""Hot inner loops, compiled when available.

The Cython extension ``_core`` is used unless it failed to build or
``MMLIMITS_PURE_PYTHON=1`` is set, in which case ``_fallback`` supplies the
same functions. ``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = {"python": _fallback}
if _core is not None:
    BACKENDS["cython"] = _core

if _core is None or os.environ.get("MMLIMITS_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = "cython"
_impl = BACKENDS[BACKEND]


def get(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    return BACKENDS[name]


def bipartite_graph(cap_left, cap_right, edge_l, edge_r):
    """CSR residual graph for source -> left -> right -> sink.

    Returns ``(n_nodes, head, to, cap, rev, mid)`` where ``mid`` holds the arc
    ids of the left->right edges in input order.
    """
    cap_left = np.asarray(cap_left, dtype=np.int64)
    cap_right = np.asarray(cap_right, dtype=np.int64)
    edge_l = np.asarray(edge_l, dtype=np.int64)
    edge_r = np.asarray(edge_r, dtype=np.int64)
    n, m, e = len(cap_left), len(cap_right), len(edge_l)
    source, sink = 0, n + m + 1
    big = int(cap_left.sum()) + 1
    tail = np.concatenate([np.zeros(n, np.int64), 1 + edge_l, n + 1 + np.arange(m)])
    head_ = np.concatenate([1 + np.arange(n), n + 1 + edge_r, np.full(m, sink)])
    caps = np.concatenate([cap_left, np.full(e, big, np.int64), cap_right])
    k = len(tail)
    # arc 2i forward, 2i+1 backward
    a_tail = np.empty(2 * k, np.int64)
    a_to = np.empty(2 * k, np.int64)
    a_cap = np.zeros(2 * k, np.int64)
    a_tail[0::2], a_tail[1::2] = tail, head_
    a_to[0::2], a_to[1::2] = head_, tail
    a_cap[0::2] = caps
    n_nodes = n + m + 2
    order = np.argsort(a_tail, kind="stable")
    pos = np.empty(2 * k, np.int64)
    pos[order] = np.arange(2 * k)
    to = a_to[order]
    cap = a_cap[order]
    rev = pos[np.arange(2 * k) ^ 1][order]
    head = np.zeros(n_nodes + 1, np.int64)
    np.add.at(head, a_tail + 1, 1)
    head = np.cumsum(head)
    mid = pos[2 * (n + np.arange(e))]
    return n_nodes, source, sink, head, to, cap, rev, mid, big


def max_flow(cap_left, cap_right, edge_l, edge_r, backend=None, return_flows=False):
    """Integer max-flow through a bipartite graph with uncapacitated middle edges."""
    n_nodes, s, t, head, to, cap, rev, mid, big = bipartite_graph(
        cap_left, cap_right, edge_l, edge_r)
    if len(edge_l) == 0:
        return (0, np.zeros(0, np.int64)) if return_flows else 0
    value = get(backend).dinic(n_nodes, s, t, head, to, cap, rev)
    if return_flows:
        return int(value), big - cap[mid]
    return int(value)
