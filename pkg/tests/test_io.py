import json

import numpy as np
import pytest

from laneseq import (
    DEFAULT_CONFIG,
    GenSpec,
    QuantPoint,
    dag_to_lanegraph,
    generate,
)
from laneseq.io import (
    dag_from_json,
    dag_to_json,
    dumps,
    format_prompt,
    format_tokens,
    is_dag_json,
    lanegraph_from_json,
    lanegraph_to_json,
    parse_prompt_line,
    parse_token_line,
    read_json_objects,
    read_tokprob,
    write_tokprob,
)

CFG = DEFAULT_CONFIG


class TestGraphJson:
    def test_dag_round_trip(self):
        d = generate(GenSpec(seed=6, roots=2, merge_prob=0.3), CFG)
        back = dag_from_json(json.loads(dumps(dag_to_json(d))))
        assert [(p.x, p.y, p.z) for p in back.keypoints] == \
            [(p.x, p.y, p.z) for p in d.keypoints]
        assert [(e.src, e.dst, e.control) for e in back.edges] == \
            [(e.src, e.dst, e.control) for e in d.edges]

    def test_lanegraph_round_trip(self):
        g = dag_to_lanegraph(generate(GenSpec(seed=6), CFG), CFG)
        back = lanegraph_from_json(json.loads(dumps(lanegraph_to_json(g))))
        assert len(back.lanes) == len(g.lanes)
        for a, b in zip(back.lanes, g.lanes):
            assert [(p.x, p.y, p.z) for p in a.points] == \
                [(p.x, p.y, p.z) for p in b.points]
        assert np.array_equal(back.adjacency, g.adjacency)
        assert back.scores == g.scores

    def test_binary_adjacency_serializes_sparse(self, lanegraph, straight_lane):
        g = lanegraph([straight_lane(0, 0, 10, 0), straight_lane(10, 0, 20, 0)],
                      pairs=[(0, 1)])
        obj = lanegraph_to_json(g)
        assert obj["adjacency"] == [[0, 1]]
        assert "adjacency_dense" not in obj

    def test_soft_adjacency_serializes_dense(self, straight_lane):
        from laneseq import LaneGraph
        g = LaneGraph([straight_lane(0, 0, 10, 0), straight_lane(10, 0, 20, 0)],
                      np.array([[0.0, 0.7], [0.0, 0.0]]))
        obj = lanegraph_to_json(g)
        assert "adjacency" not in obj
        assert obj["adjacency_dense"][0][1] == 0.7
        back = lanegraph_from_json(obj)
        assert back.adjacency[0][1] == 0.7

    def test_adjacency_keys_are_exclusive(self):
        base = {"lanes": []}
        with pytest.raises(ValueError):
            lanegraph_from_json(base)
        with pytest.raises(ValueError):
            lanegraph_from_json({**base, "adjacency": [], "adjacency_dense": []})

    def test_missing_lanes_key(self):
        with pytest.raises(ValueError):
            lanegraph_from_json({"adjacency": []})

    def test_partial_scores_default_to_one(self, straight_lane):
        obj = {
            "lanes": [
                {"points": [[0, 0, 0], [10, 0, 0]], "score": 0.4},
                {"points": [[0, 3, 0], [10, 3, 0]]},
            ],
            "adjacency": [],
        }
        g = lanegraph_from_json(obj)
        assert g.scores == (0.4, 1.0)

    def test_no_scores_stay_absent(self):
        obj = {"lanes": [{"points": [[0, 0, 0], [10, 0, 0]]}], "adjacency": []}
        assert lanegraph_from_json(obj).scores is None

    def test_dag_edge_scores_round_trip(self):
        obj = {
            "keypoints": [[0, 0, 0], [10, 0, 0]],
            "edges": [{"src": 0, "dst": 1, "control": [5, 0], "score": 0.9}],
        }
        d = dag_from_json(obj)
        assert d.edges[0].score == 0.9
        assert dag_to_json(d)["edges"][0]["score"] == 0.9

    def test_is_dag_json(self):
        assert is_dag_json({"keypoints": []})
        assert not is_dag_json({"lanes": []})
        assert not is_dag_json([])

    def test_dumps_is_deterministic_and_compact(self):
        s = dumps({"b": 1, "a": [1, 2]})
        assert s == '{"a":[1,2],"b":1}'


class TestObjectStreams:
    def test_whole_object(self):
        assert read_json_objects('{"a": 1}') == [{"a": 1}]

    def test_whole_array(self):
        assert read_json_objects('[{"a": 1}, {"b": 2}]') == [{"a": 1}, {"b": 2}]

    def test_jsonl(self):
        text = '{"a": 1}\n{"b": 2}\n\n{"c": 3}\n'
        assert read_json_objects(text) == [{"a": 1}, {"b": 2}, {"c": 3}]

    def test_empty(self):
        assert read_json_objects("") == []
        assert read_json_objects("  \n ") == []

    def test_bad_line_raises(self):
        with pytest.raises(json.JSONDecodeError):
            read_json_objects('{"a": 1}\nnot json\n')


class TestLines:
    def test_tokens(self):
        assert format_tokens([1, 22, 333]) == "1 22 333"
        assert parse_token_line("1 22 333") == [1, 22, 333]
        assert parse_token_line("") == []

    def test_tokens_accept_numpy_ints(self):
        assert format_tokens(np.array([4, 5])) == "4 5"

    def test_prompts(self):
        pts = [QuantPoint(3, 4), QuantPoint(150, 99)]
        line = format_prompt(pts)
        assert line == "3,4 150,99"
        assert parse_prompt_line(line) == [(3, 4), (150, 99)]
        assert parse_prompt_line("") == []


class TestTokprob:
    def test_round_trip(self, tmp_path):
        table = np.random.default_rng(0).random((7, 209)).astype("<f4")
        path = tmp_path / "t.tokprob"
        write_tokprob(path, table)
        back = read_tokprob(path)
        assert back.shape == (7, 209)
        assert back.dtype == np.float64
        assert np.array_equal(back.astype("<f4"), table)

    def test_deterministic_bytes(self, tmp_path):
        table = np.arange(12, dtype=float).reshape(3, 4)
        a, b = tmp_path / "a", tmp_path / "b"
        write_tokprob(a, table)
        write_tokprob(b, table)
        assert a.read_bytes() == b.read_bytes()

    def test_header(self, tmp_path):
        path = tmp_path / "t"
        write_tokprob(path, np.zeros((2, 3)))
        assert path.read_bytes().startswith(b"TOKPROB v1 2 3\n")

    def test_rejects_non_2d(self, tmp_path):
        with pytest.raises(ValueError):
            write_tokprob(tmp_path / "x", np.zeros(5))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"NOTPROB v9 2 2\n" + b"\0" * 16)
        with pytest.raises(ValueError):
            read_tokprob(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "short"
        path.write_bytes(b"TOKPROB v1 2 3\n" + b"\0" * 8)
        with pytest.raises(ValueError):
            read_tokprob(path)
