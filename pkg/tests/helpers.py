"""Shared graph fixtures: hand-built pattern graphs and a random-graph generator.

The random generator only emits valid graphs (every result is re-validated
through parse_graph), mixing arithmetic, conv, activations, data movement,
and constant-only side chains so optimizer tests see folding and fusion
opportunities.
"""

import json

import numpy as np

from referee.graph import parse_graph


def build_graph(name, inputs, outputs, nodes, initializers=()):
    doc = {
        "name": name,
        "inputs": [{"name": n, "shape": list(s)} for n, s in inputs],
        "outputs": list(outputs),
        "nodes": [
            {"id": i, "op": op, "inputs": list(ins), "output": out, "attrs": attrs}
            for i, op, ins, out, attrs in nodes
        ],
        "initializers": [
            {"name": n, "shape": list(np.asarray(d, dtype=np.float64).shape), "data": np.asarray(d, dtype=np.float64).ravel().tolist()}
            for n, d in initializers
        ],
    }
    return parse_graph(json.dumps(doc))


def norm_conv_graph(channels=3, kernel=3, size=8, rng=None):
    """Sub -> Mul -> Conv2d input-normalization chain, the fusion target."""
    rng = rng or np.random.default_rng(0)
    m = rng.normal(size=(1, channels, 1, 1))
    s = rng.normal(size=(1, channels, 1, 1)) + 2.0
    w = rng.normal(size=(2, channels, kernel, kernel))
    b = rng.normal(size=(2,))
    return build_graph(
        "norm-conv",
        inputs=[("x", (1, channels, size, size))],
        outputs=["y"],
        nodes=[
            ("sub", "Sub", ["x", "m"], "centered", {}),
            ("mul", "Mul", ["centered", "s"], "scaled", {}),
            ("conv", "Conv2d", ["scaled", "w", "b"], "y", {"stride": 1, "padding": 1}),
        ],
        initializers=[("m", m), ("s", s), ("w", w), ("b", b)],
    )


def scale_after_gemm_graph(w=None, b=None, alpha=None):
    """Gemm followed by a constant Mul (post-scale direction)."""
    w = np.asarray(w if w is not None else [[2.0]])
    b = np.asarray(b if b is not None else [3.0])
    alpha = np.asarray(alpha if alpha is not None else [4.0])
    return build_graph(
        "gemm-postscale",
        inputs=[("x", (1, w.shape[0]))],
        outputs=["y"],
        nodes=[
            ("fc", "Gemm", ["x", "w", "b"], "h", {}),
            ("scale", "Mul", ["h", "alpha"], "y", {}),
        ],
        initializers=[("w", w), ("b", b), ("alpha", alpha)],
    )


def scale_before_gemm_graph(alpha, w, b):
    """Constant Mul feeding a Gemm (pre-scale direction)."""
    alpha, w, b = np.asarray(alpha), np.asarray(w), np.asarray(b)
    return build_graph(
        "gemm-prescale",
        inputs=[("x", (1, w.shape[0]))],
        outputs=["y"],
        nodes=[
            ("scale", "Mul", ["x", "alpha"], "xs", {}),
            ("fc", "Gemm", ["xs", "w", "b"], "y", {}),
        ],
        initializers=[("alpha", alpha.reshape(1, -1)), ("w", w), ("b", b)],
    )


def class_token_graph():
    """Constant Shape/Gather/Concat/Expand chain feeding a live Add.

    Mimics a class-embedding-token subgraph: everything up to the Expand
    depends only on initializers and should fold to a single constant.
    """
    token = np.array([[10.0, 20.0, 30.0]])        # (1, 3) embedding row
    anchor = np.zeros((2, 3))                      # constant whose shape drives the expansion
    rows = np.array([2.0])                         # row-count override
    return build_graph(
        "class-token",
        inputs=[("x", (2, 3))],
        outputs=["y"],
        nodes=[
            ("shape", "Shape", ["anchor"], "anchor_dims", {}),
            ("pick", "Gather", ["anchor_dims", "col_idx"], "cols", {"axis": 0}),
            ("cat", "Concat", ["rows", "cols"], "target_dims", {"axis": 0}),
            ("grow", "Expand", ["token", "target_dims"], "tokens", {}),
            ("add", "Add", ["x", "tokens"], "y", {}),
        ],
        initializers=[
            ("anchor", anchor),
            ("col_idx", np.array([1.0])),
            ("rows", rows),
            ("token", token),
        ],
    )


def gemm_chain_graph(weights, biases, name="chain"):
    """Chain of Gemm layers with identically shaped parameters."""
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    biases = [np.asarray(b, dtype=np.float64) for b in biases]
    nodes = []
    inits = []
    prev = "x"
    for k, (w, b) in enumerate(zip(weights, biases), start=1):
        nodes.append((f"fc{k}", "Gemm", [prev, f"w{k}", f"b{k}"], f"h{k}", {}))
        inits.append((f"w{k}", w))
        inits.append((f"b{k}", b))
        prev = f"h{k}"
    return build_graph(
        name,
        inputs=[("x", (1, weights[0].shape[0]))],
        outputs=[prev],
        nodes=nodes,
        initializers=inits,
    )


def random_graph(rng, name="rand"):
    """A small random valid graph over a (1,C,H,W) input."""
    c = int(rng.integers(1, 4))
    h = int(rng.integers(4, 9))
    w = int(rng.integers(4, 9))
    nodes = []
    inits = []
    cur = "x"
    cur_shape = (1, c, h, w)

    if rng.random() < 0.7:
        inits.append(("m", rng.normal(size=(1, c, 1, 1))))
        nodes.append(("n_sub", "Sub", [cur, "m"], "v_sub", {}))
        cur = "v_sub"
    if rng.random() < 0.7:
        inits.append(("s", rng.normal(size=(1, c, 1, 1)) + 2.0))
        nodes.append(("n_mul", "Mul", [cur, "s"], "v_mul", {}))
        cur = "v_mul"
    if rng.random() < 0.8:
        out_c = int(rng.integers(1, 4))
        k = int(rng.choice([1, 3]))
        inits.append(("cw", rng.normal(size=(out_c, c, k, k))))
        inits.append(("cb", rng.normal(size=(out_c,))))
        pad = k // 2
        nodes.append(("n_conv", "Conv2d", [cur, "cw", "cb"], "v_conv", {"stride": 1, "padding": pad}))
        cur, cur_shape = "v_conv", (1, out_c, h, w)
    if rng.random() < 0.5:
        nodes.append(("n_act", "ReLU", [cur], "v_act", {}))
        cur = "v_act"
    if rng.random() < 0.4:
        # Constant-only side chain folded into the live path.
        inits.append(("k1", rng.normal(size=(1, 1, 1, 1))))
        inits.append(("k2", rng.normal(size=(1, 1, 1, 1))))
        nodes.append(("n_cadd", "Add", ["k1", "k2"], "v_const", {}))
        nodes.append(("n_bias", "Add", [cur, "v_const"], "v_biased", {}))
        cur = "v_biased"
    if rng.random() < 0.6:
        flat = int(np.prod(cur_shape))
        n_out = int(rng.integers(2, 6))
        inits.append(("fw", rng.normal(size=(flat, n_out)) * 0.2))
        inits.append(("fb", rng.normal(size=(n_out,))))
        nodes.append(("n_flat", "Reshape", [cur], "v_flat", {"shape": [1, flat]}))
        nodes.append(("n_fc", "Gemm", ["v_flat", "fw", "fb"], "v_fc", {}))
        cur = "v_fc"
        if rng.random() < 0.5:
            inits.append(("post", rng.normal(size=(1, 1)) + 1.5))
            nodes.append(("n_post", "Mul", ["v_fc", "post"], "v_post", {}))
            cur = "v_post"
        if rng.random() < 0.5:
            nodes.append(("n_sm", "Softmax", [cur], "v_sm", {}))
            cur = "v_sm"
    if not nodes:
        nodes.append(("n_id", "ReLU", [cur], "v_out", {}))
        cur = "v_out"

    return build_graph(name, [("x", (1, c, h, w))], [cur], nodes, inits)


def random_inputs(graph, rng):
    return {t.name: rng.normal(size=t.shape) for t in graph.inputs}
