import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from referee.errors import (
    GraphSyntaxError,
    NumericError,
    ShapeError,
    ValidationError,
)
from referee.graph import execute, infer_shapes, parse_graph, serialize_graph

from helpers import build_graph, norm_conv_graph, random_graph, random_inputs


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------

def test_parse_minimal_relu_graph():
    g = build_graph("r", [("x", (1, 4))], ["y"], [("n1", "ReLU", ["x"], "y", {})])
    assert len(g.nodes) == 1
    assert len(g.inputs) == 1
    assert g.outputs == ("y",)


def test_parse_undefined_value_names_it():
    with pytest.raises(ValidationError, match="t9"):
        build_graph("bad", [("x", (1, 4))], ["y"], [("n1", "ReLU", ["t9"], "y", {})])


def test_parse_norm_chain_roundtrip():
    g = norm_conv_graph()
    assert len(g.nodes) == 3
    g2 = parse_graph(serialize_graph(g))
    rng = np.random.default_rng(1)
    x = random_inputs(g, rng)
    out1, out2 = execute(g, x), execute(g2, x)
    for name in g.outputs:
        assert np.array_equal(out1[name], out2[name])


def test_parse_rejects_non_json():
    with pytest.raises(GraphSyntaxError):
        parse_graph("not json {")


def test_parse_rejects_unknown_top_level_field():
    doc = {"name": "g", "inputs": [], "outputs": [], "nodes": [], "extra": 1}
    with pytest.raises(GraphSyntaxError, match="extra"):
        parse_graph(json.dumps(doc))


def test_parse_rejects_unknown_node_field():
    doc = {
        "name": "g",
        "inputs": [{"name": "x", "shape": [1]}],
        "outputs": ["y"],
        "nodes": [{"id": "n", "op": "ReLU", "inputs": ["x"], "output": "y", "oops": 1}],
    }
    with pytest.raises(GraphSyntaxError, match="oops"):
        parse_graph(json.dumps(doc))


def test_duplicate_node_id_rejected():
    with pytest.raises(ValidationError, match="duplicate node id"):
        build_graph(
            "dup", [("x", (1, 4))], ["z"],
            [("n", "ReLU", ["x"], "y", {}), ("n", "ReLU", ["y"], "z", {})],
        )


def test_duplicate_output_name_rejected():
    with pytest.raises(ValidationError, match="already defined"):
        build_graph(
            "dup", [("x", (1, 4))], ["y"],
            [("a", "ReLU", ["x"], "y", {}), ("b", "ReLU", ["x"], "y", {})],
        )


def test_cycle_rejected():
    with pytest.raises(ValidationError, match="cycle"):
        build_graph(
            "cyc", [("x", (1, 4))], ["b"],
            [("n1", "Add", ["x", "b"], "a", {}), ("n2", "ReLU", ["a"], "b", {})],
        )


def test_initializer_data_length_must_match_shape():
    doc = {
        "name": "g",
        "inputs": [{"name": "x", "shape": [2]}],
        "outputs": ["y"],
        "nodes": [{"id": "n", "op": "Add", "inputs": ["x", "c"], "output": "y"}],
        "initializers": [{"name": "c", "shape": [2], "data": [1.0, 2.0, 3.0]}],
    }
    with pytest.raises(ValidationError, match="data length"):
        parse_graph(json.dumps(doc))


def test_shape_rank_limits():
    with pytest.raises(ValidationError, match="1-4"):
        build_graph("g", [("x", (1, 1, 1, 1, 1))], ["y"], [("n", "ReLU", ["x"], "y", {})])
    with pytest.raises(ValidationError, match=">= 1"):
        build_graph("g", [("x", (0,))], ["y"], [("n", "ReLU", ["x"], "y", {})])


def test_unknown_op_rejected():
    with pytest.raises(ValidationError, match="Frobnicate"):
        build_graph("g", [("x", (1,))], ["y"], [("n", "Frobnicate", ["x"], "y", {})])


def test_unknown_attr_rejected():
    with pytest.raises(ValidationError, match="dilation"):
        build_graph(
            "g", [("x", (1, 1, 4, 4))], ["y"],
            [("n", "Conv2d", ["x", "w"], "y", {"dilation": 2})],
            [("w", np.ones((1, 1, 3, 3)))],
        )


def test_output_may_be_graph_input():
    g = build_graph("pass", [("x", (2, 2))], ["x", "y"], [("n", "ReLU", ["x"], "y", {})])
    out = execute(g, {"x": np.array([[1.0, -1.0], [0.0, 2.0]])})
    assert np.array_equal(out["x"], [[1.0, -1.0], [0.0, 2.0]])


def test_parse_sorts_nodes_topologically():
    doc = {
        "name": "unsorted",
        "inputs": [{"name": "x", "shape": [1, 4]}],
        "outputs": ["z"],
        "nodes": [
            {"id": "late", "op": "ReLU", "inputs": ["y"], "output": "z"},
            {"id": "early", "op": "ReLU", "inputs": ["x"], "output": "y"},
        ],
    }
    g = parse_graph(json.dumps(doc))
    assert [n.id for n in g.nodes] == ["early", "late"]


# ---------------------------------------------------------------------------
# Shape inference
# ---------------------------------------------------------------------------

def test_gemm_shape():
    g = build_graph(
        "g", [("x", (1, 4))], ["y"],
        [("n", "Gemm", ["x", "w"], "y", {})],
        [("w", np.zeros((4, 3)))],
    )
    assert infer_shapes(g)["y"] == (1, 3)


def test_conv2d_shape_rule():
    # floor((8 + 2*1 - 3)/1) + 1 = 8 on both spatial dims
    g = build_graph(
        "g", [("x", (1, 3, 8, 8))], ["y"],
        [("n", "Conv2d", ["x", "w"], "y", {"stride": 1, "padding": 1})],
        [("w", np.zeros((2, 3, 3, 3)))],
    )
    assert infer_shapes(g)["y"] == (1, 2, 8, 8)


def test_conv2d_stride_2_shape():
    # floor((9 + 0 - 3)/2) + 1 = 4
    g = build_graph(
        "g", [("x", (1, 1, 9, 9))], ["y"],
        [("n", "Conv2d", ["x", "w"], "y", {"stride": 2})],
        [("w", np.zeros((1, 1, 3, 3)))],
    )
    assert infer_shapes(g)["y"] == (1, 1, 4, 4)


def test_broadcast_on_singletons():
    g = build_graph(
        "g", [("x", (1, 3, 8, 8))], ["y"],
        [("n", "Mul", ["x", "s"], "y", {})],
        [("s", np.ones((1, 3, 1, 1)))],
    )
    assert infer_shapes(g)["y"] == (1, 3, 8, 8)


def test_broadcast_rank_mismatch_rejected():
    with pytest.raises(ShapeError, match="rank"):
        build_graph(
            "g", [("x", (1, 3, 8, 8))], ["y"],
            [("n", "Mul", ["x", "s"], "y", {})],
            [("s", np.ones((3,)))],
        )


def test_broadcast_incompatible_dims_rejected():
    with pytest.raises(ShapeError, match="incompatible"):
        build_graph(
            "g", [("x", (2, 3))], ["y"],
            [("n", "Add", ["x", "s"], "y", {})],
            [("s", np.ones((2, 2)))],
        )


def test_gemm_inner_dim_mismatch_named():
    with pytest.raises(ShapeError, match="fc"):
        build_graph(
            "g", [("x", (1, 4))], ["y"],
            [("fc", "Gemm", ["x", "w"], "y", {})],
            [("w", np.zeros((3, 2)))],
        )


def test_shape_op_and_expand_shapes():
    g = build_graph(
        "g", [("x", (2, 3))], ["y"],
        [
            ("sh", "Shape", ["x"], "dims", {}),
            ("ex", "Expand", ["row", "dims"], "grown", {}),
            ("add", "Add", ["x", "grown"], "y", {}),
        ],
        [("row", np.array([[1.0, 2.0, 3.0]]))],
    )
    shapes = infer_shapes(g)
    assert shapes["dims"] == (2,)
    assert shapes["grown"] == (2, 3)


def test_expand_requires_constant_shape_input():
    with pytest.raises(ShapeError, match="constant"):
        build_graph(
            "g", [("x", (2, 3)), ("d", (2,))], ["y"],
            [("ex", "Expand", ["row", "d"], "y", {})],
            [("row", np.array([[1.0, 2.0, 3.0]]))],
        )


def test_slice_and_concat_shapes():
    g = build_graph(
        "g", [("x", (2, 6))], ["y"],
        [
            ("cut", "Slice", ["x"], "part", {"axes": [1], "starts": [0], "ends": [2]}),
            ("cat", "Concat", ["part", "part", "part"], "y", {"axis": 1}),
        ],
    )
    shapes = infer_shapes(g)
    assert shapes["part"] == (2, 2)
    assert shapes["y"] == (2, 6)


def test_gather_shape():
    g = build_graph(
        "g", [("x", (5, 3))], ["y"],
        [("pick", "Gather", ["x", "idx"], "y", {"axis": 0})],
        [("idx", np.array([0.0, 2.0]))],
    )
    assert infer_shapes(g)["y"] == (2, 3)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def test_identity_graph_returns_input():
    g = build_graph("id", [("x", (2, 2))], ["x"], [("n", "ReLU", ["x"], "y", {})])
    x = np.array([[1.0, -2.0], [3.0, -4.0]])
    assert np.array_equal(execute(g, {"x": x})["x"], x)


def test_relu_execution():
    g = build_graph("r", [("x", (2,))], ["y"], [("n", "ReLU", ["x"], "y", {})])
    out = execute(g, {"x": np.array([-1.0, 2.0])})
    assert np.array_equal(out["y"], [0.0, 2.0])


def test_gemm_execution_hand_case():
    # by hand: [1*1 + 2*0 + 1, 1*0 + 2*3 + 1] = [2, 7]
    g = build_graph(
        "g", [("x", (1, 2))], ["y"],
        [("n", "Gemm", ["x", "w", "b"], "y", {})],
        [("w", np.array([[1.0, 0.0], [0.0, 3.0]])), ("b", np.array([1.0, 1.0]))],
    )
    out = execute(g, {"x": np.array([[1.0, 2.0]])})
    assert np.array_equal(out["y"], [[2.0, 7.0]])


def test_gemm_transpose_flags():
    g = build_graph(
        "g", [("x", (1, 2))], ["y"],
        [("n", "Gemm", ["x", "w"], "y", {"trans_b": True})],
        [("w", np.array([[1.0, 2.0], [3.0, 4.0]]))],
    )
    out = execute(g, {"x": np.array([[1.0, 1.0]])})
    assert np.array_equal(out["y"], np.array([[1.0, 1.0]]) @ np.array([[1.0, 2.0], [3.0, 4.0]]).T)


def test_conv2d_matches_direct_convolution_oracle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1, 3, 6, 6))
    w = rng.normal(size=(2, 3, 3, 3))
    b = rng.normal(size=(2,))
    g = build_graph(
        "c", [("x", (1, 3, 6, 6))], ["y"],
        [("n", "Conv2d", ["x", "w", "b"], "y", {"stride": 1, "padding": 1})],
        [("w", w), ("b", b)],
    )
    out = execute(g, {"x": x})["y"]

    # independent oracle: quadruple loop over output positions
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    expect = np.zeros((1, 2, 6, 6))
    for o in range(2):
        for i in range(6):
            for j in range(6):
                expect[0, o, i, j] = np.sum(xp[0, :, i:i + 3, j:j + 3] * w[o]) + b[o]
    np.testing.assert_allclose(out, expect, atol=1e-12)


def test_softmax_normalizes_last_axis():
    g = build_graph("s", [("x", (2, 3))], ["y"], [("n", "Softmax", ["x"], "y", {})])
    out = execute(g, {"x": np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])})["y"]
    np.testing.assert_allclose(out.sum(axis=-1), [1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(out[1], [1 / 3] * 3, atol=1e-12)


def test_weighted_merge_execution():
    g = build_graph(
        "wm", [("a", (2,)), ("b", (2,))], ["y"],
        [("n", "WeightedMerge", ["a", "b"], "y", {"weights": [0.25, 0.75]})],
    )
    out = execute(g, {"a": np.array([4.0, 0.0]), "b": np.array([0.0, 4.0])})
    np.testing.assert_allclose(out["y"], [1.0, 3.0], atol=1e-15)


def test_missing_input_rejected():
    g = build_graph("r", [("x", (2,))], ["y"], [("n", "ReLU", ["x"], "y", {})])
    with pytest.raises(ValidationError, match="missing"):
        execute(g, {})


def test_wrong_input_shape_rejected():
    g = build_graph("r", [("x", (2,))], ["y"], [("n", "ReLU", ["x"], "y", {})])
    with pytest.raises(ShapeError):
        execute(g, {"x": np.zeros((3,))})


def test_nonfinite_raises_numeric_error_with_node_id():
    g = build_graph(
        "nf", [("x", (1,))], ["y"],
        [("boom", "Mul", ["x", "big"], "y", {})],
        [("big", np.array([1e308]))],
    )
    with pytest.raises(NumericError, match="boom"):
        execute(g, {"x": np.array([1e308])})


def test_gather_execution_and_bad_index():
    g = build_graph(
        "g", [("x", (3, 2))], ["y"],
        [("pick", "Gather", ["x", "idx"], "y", {"axis": 0})],
        [("idx", np.array([2.0]))],
    )
    out = execute(g, {"x": np.array([[1.0, 2], [3, 4], [5, 6]])})
    assert np.array_equal(out["y"], [[5.0, 6.0]])

    bad = build_graph(
        "g2", [("x", (3, 2))], ["y"],
        [("pick", "Gather", ["x", "idx"], "y", {"axis": 0})],
        [("idx", np.array([7.0]))],
    )
    with pytest.raises(ShapeError, match="pick"):
        execute(bad, {"x": np.zeros((3, 2))})


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

def test_roundtrip_on_random_graphs():
    rng = np.random.default_rng(42)
    for k in range(25):
        g = random_graph(rng, name=f"rt{k}")
        g2 = parse_graph(serialize_graph(g))
        x = random_inputs(g, rng)
        out1, out2 = execute(g, x), execute(g2, x)
        for name in g.outputs:
            assert np.array_equal(out1[name], out2[name]), name


def test_interpreter_determinism():
    rng = np.random.default_rng(3)
    g = random_graph(rng)
    x = random_inputs(g, rng)
    a, b = execute(g, x), execute(g, x)
    for name in g.outputs:
        assert a[name].tobytes() == b[name].tobytes()


def test_node_permutation_invariance():
    rng = np.random.default_rng(9)
    for k in range(10):
        g = random_graph(rng, name=f"perm{k}")
        doc = json.loads(serialize_graph(g))
        order = rng.permutation(len(doc["nodes"]))
        doc["nodes"] = [doc["nodes"][i] for i in order]
        g2 = parse_graph(json.dumps(doc))
        x = random_inputs(g, rng)
        out1, out2 = execute(g, x), execute(g2, x)
        for name in g.outputs:
            assert np.array_equal(out1[name], out2[name])


@st.composite
def broadcastable_pair(draw):
    rank = draw(st.integers(min_value=1, max_value=4))
    full = [draw(st.integers(min_value=1, max_value=4)) for _ in range(rank)]
    mask_a = [draw(st.booleans()) for _ in range(rank)]
    mask_b = [draw(st.booleans()) for _ in range(rank)]
    a = tuple(1 if m else d for m, d in zip(mask_a, full))
    b = tuple(1 if m else d for m, d in zip(mask_b, full))
    return a, b


@given(broadcastable_pair(), st.sampled_from(["Add", "Sub", "Mul"]), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_broadcast_matches_materialized_oracle(shapes, op, seed):
    a_shape, b_shape = shapes
    rng = np.random.default_rng(seed)
    a = rng.normal(size=a_shape)
    b = rng.normal(size=b_shape)
    g = build_graph(
        "bc", [("a", a_shape), ("b", b_shape)], ["y"],
        [("n", op, ["a", "b"], "y", {})],
    )
    got = execute(g, {"a": a, "b": b})["y"]

    # oracle: explicitly materialize both operands to the result shape first
    out_shape = tuple(max(da, db) for da, db in zip(a_shape, b_shape))
    am = np.broadcast_to(a, out_shape)
    bm = np.broadcast_to(b, out_shape)
    fn = {"Add": np.add, "Sub": np.subtract, "Mul": np.multiply}[op]
    expect = fn(np.ascontiguousarray(am), np.ascontiguousarray(bm))
    assert got.shape == out_shape
    assert np.array_equal(got, expect)
