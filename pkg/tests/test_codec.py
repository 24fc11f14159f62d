import numpy as np
import pytest

from laneseq import (
    ANCESTOR,
    CLONE,
    DEFAULT_CONFIG,
    DagEdge,
    EdgeSequence,
    EdgeSextet,
    KeyPointDag,
    LINEAL,
    OFFSHOOT,
    PromptSet,
    QuantPoint,
    Vocabulary,
    assemble_training_pair,
    compare_roundtrip,
    decode,
    encode,
    extract_keypoints,
    dag_to_lanegraph,
    generate,
    GenSpec,
    quantize,
    validate_sequence,
)
from laneseq.errors import (
    BadSlotToken,
    BudgetExceeded,
    CloneAmbiguity,
    CloneTargetMissing,
    ConOutOfRange,
    CycleDetected,
    InvalidDag,
    LinealWithoutPrevious,
    MissingEos,
    TooManyEdges,
    TooManyKeypoints,
    TruncatedSextet,
)

CFG = DEFAULT_CONFIG
VOCAB = Vocabulary.from_config(CFG)


def sextets(d, cfg=CFG):
    return [(s.xb, s.yb, s.cls, s.con, s.bxb, s.byb) for s in encode(d, cfg).sextets]


def tokens_of(*sextet_tuples, eos=True):
    out = []
    for xb, yb, cls, con, bxb, byb in sextet_tuples:
        out.extend((xb, yb, VOCAB.class_token(cls) if cls < 4 else cls, con, bxb, byb))
    if eos:
        out.append(VOCAB.eos)
    return out


class TestEncode:
    def test_single_straight_lane(self):
        d = KeyPointDag([(10.0, -5.0, 0.0), (30.0, -5.0, 0.0)],
                        [DagEdge(0, 1, (20.0, -5.0))])
        assert sextets(d) == [
            (120, 40, ANCESTOR, 0, 120, 40),
            (160, 40, LINEAL, 0, 140, 40),
        ]

    def test_fork_offshoot_from_root(self):
        d = KeyPointDag(
            [(0.0, 0.0, 0.0), (10.0, 0.0, 0.0), (5.0, 5.0, 0.0)],
            [DagEdge(0, 1, (5.0, 0.0)), DagEdge(0, 2, (2.5, 2.5))],
        )
        got = sextets(d)
        assert [s[2] for s in got] == [ANCESTOR, LINEAL, OFFSHOOT]
        assert got[2][3] == 1  # branches from the root, which holds index 1

    def test_merge_becomes_clone(self):
        d = KeyPointDag(
            [(0.0, 2.0, 0.0), (0.0, -2.0, 0.0), (10.0, 0.0, 0.0)],
            [DagEdge(0, 2, (5.0, 1.0)), DagEdge(1, 2, (5.0, -1.0))],
        )
        got = sextets(d)
        assert [s[2] for s in got] == [ANCESTOR, LINEAL, ANCESTOR, CLONE]
        m = quantize(10.0, 0.0, CFG)
        assert got[3][:2] == (m.xb, m.yb)  # clone points at the merge cell
        assert got[3][3] == 3  # parent is the second root, emitted third

    def test_empty_dag(self):
        toks = encode(KeyPointDag((), ()), CFG).to_tokens(CFG)
        assert toks[0] == VOCAB.eos
        assert set(toks[1:]) == {VOCAB.pad}
        assert len(toks) == CFG.edge_token_budget

    def test_right_front_root_first(self):
        for seed in range(30):
            d = generate(GenSpec(seed=seed, roots=3, fork_prob=0.3), CFG)
            indeg = {i: 0 for i in range(len(d.keypoints))}
            has_out = set()
            for e in d.edges:
                indeg[e.dst] += 1
                has_out.add(e.src)
            roots = [i for i in indeg if indeg[i] == 0 and i in has_out]
            bins = [quantize(d.keypoints[i].x, d.keypoints[i].y, CFG) for i in roots]
            want = max(((b.xb, -b.yb) for b in bins))
            first = encode(d, CFG).sextets[0]
            assert (first.xb, -first.yb) == want

    def test_isolated_keypoints_skipped(self):
        d = KeyPointDag([(0, 0, 0), (10, 0, 0), (40, 20, 0)],
                        [DagEdge(0, 1, (5.0, 0.0))])
        assert len(encode(d, CFG).sextets) == 2

    def test_cyclic_input_rejected(self):
        d = KeyPointDag([(0, 0, 0), (10, 0, 0)],
                        [DagEdge(0, 1, (5, 0)), DagEdge(1, 0, (5, 1))])
        with pytest.raises(CycleDetected):
            encode(d, CFG)

    def test_invalid_dag_rejected(self):
        d = KeyPointDag([(0, 0, 0), (0.1, 0, 0)], [DagEdge(0, 1, (0.05, 0))])
        with pytest.raises(InvalidDag):
            encode(d, CFG)

    def test_edge_budget(self):
        cfg = CFG.replace(max_edges=3)
        d = KeyPointDag(
            [(float(5 * i), 0.0, 0.0) for i in range(5)],
            [DagEdge(i, i + 1, (5.0 * i + 2.5, 0.0)) for i in range(4)],
        )
        with pytest.raises(TooManyEdges):
            encode(d, cfg)  # 1 root + 4 edges > 3 sextets

    def test_keypoint_capacity(self):
        cfg = CFG.replace(x_bins=50, y_bins=40)
        pts = [(-45.0 + 9.0 * k, -20.0 + 7.0 * l, 0.0)
               for l in range(6) for k in range(10)]
        d = KeyPointDag(pts, [
            DagEdge(i, i + 1,
                    ((pts[i][0] + pts[i + 1][0]) / 2, (pts[i][1] + pts[i + 1][1]) / 2))
            for i in range(59)
        ])
        with pytest.raises(TooManyKeypoints):
            encode(d, cfg)  # 60 key points, indices only reach 49

    def test_shared_cell_rejected(self):
        d = KeyPointDag(
            [(-10.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.3, 0.4, 0.0)],
            [DagEdge(0, 1, (-5.0, 0.0)), DagEdge(0, 2, (-5.0, 0.2))],
        )
        with pytest.raises(CloneAmbiguity):
            encode(d, CFG)

    def test_token_form_padding(self):
        d = generate(GenSpec(seed=3), CFG)
        seq = encode(d, CFG)
        padded = seq.to_tokens(CFG)
        bare = seq.to_tokens(CFG, pad=False)
        assert len(padded) == 601
        assert padded[:len(bare)] == bare
        assert bare[-1] == VOCAB.eos
        assert all(t == VOCAB.pad for t in padded[len(bare):])

    def test_token_form_budget(self):
        seq = EdgeSequence(tuple(
            EdgeSextet(i, 0, ANCESTOR, 0, i, 0) for i in range(101)
        ))
        with pytest.raises(TooManyEdges):
            seq.to_tokens(CFG)


class TestDecode:
    def test_eos_only(self):
        d = decode([VOCAB.eos], CFG)
        assert d.keypoints == () and d.edges == ()

    def test_keypoints_at_cell_centers(self):
        toks = tokens_of((120, 40, ANCESTOR, 0, 120, 40),
                         (160, 40, LINEAL, 0, 140, 40))
        d = decode(toks, CFG)
        assert [(p.x, p.y, p.z) for p in d.keypoints] == [
            (10.25, -4.75, 0.0), (30.25, -4.75, 0.0)]
        assert d.edges[0].src == 0 and d.edges[0].dst == 1
        assert d.edges[0].control == (20.25, -4.75)

    def test_offshoot_and_clone_edges(self):
        toks = tokens_of(
            (100, 60, ANCESTOR, 0, 100, 60),
            (120, 60, LINEAL, 0, 110, 60),
            (120, 30, OFFSHOOT, 1, 110, 45),
            (120, 60, CLONE, 3, 120, 45),
        )
        d = decode(toks, CFG)
        assert len(d.keypoints) == 3
        assert {(e.src, e.dst) for e in d.edges} == {(0, 1), (0, 2), (2, 1)}

    def test_trailing_pad_accepted(self):
        toks = tokens_of((10, 10, ANCESTOR, 0, 10, 10)) + [VOCAB.pad] * 17
        assert len(decode(toks, CFG).keypoints) == 1

    def test_truncated(self):
        with pytest.raises(TruncatedSextet) as exc:
            decode([5, 5, VOCAB.ancestor], CFG)
        assert exc.value.token_index == 0

    def test_missing_eos(self):
        with pytest.raises(MissingEos):
            decode(tokens_of((10, 10, ANCESTOR, 0, 10, 10), eos=False), CFG)

    def test_class_token_in_coordinate_slot(self):
        with pytest.raises(BadSlotToken) as exc:
            decode([VOCAB.clone, 5, VOCAB.ancestor, 0, 5, 5, VOCAB.eos], CFG)
        assert exc.value.token_index == 0

    def test_y_bin_range_enforced(self):
        # 150 is a legal x bin but not a legal y bin on the default grid
        with pytest.raises(BadSlotToken) as exc:
            decode([5, 150, VOCAB.ancestor, 0, 5, 5, VOCAB.eos], CFG)
        assert exc.value.token_index == 1

    def test_con_out_of_range_for_offshoot(self):
        toks = tokens_of((10, 10, ANCESTOR, 0, 10, 10),
                         (20, 10, OFFSHOOT, 5, 15, 10))
        with pytest.raises(ConOutOfRange) as exc:
            decode(toks, CFG)
        assert exc.value.token_index == 9

    def test_nonzero_con_for_ancestor(self):
        with pytest.raises(ConOutOfRange):
            decode(tokens_of((10, 10, ANCESTOR, 2, 10, 10)), CFG)

    def test_clone_target_missing(self):
        toks = tokens_of((10, 10, ANCESTOR, 0, 10, 10),
                         (90, 90, CLONE, 1, 50, 50))
        with pytest.raises(CloneTargetMissing):
            decode(toks, CFG)

    def test_lineal_without_previous(self):
        with pytest.raises(LinealWithoutPrevious):
            decode(tokens_of((10, 10, LINEAL, 0, 10, 10)), CFG)

    def test_revisiting_cell_without_clone(self):
        toks = tokens_of((10, 10, ANCESTOR, 0, 10, 10),
                         (10, 10, ANCESTOR, 0, 10, 10))
        with pytest.raises(BadSlotToken) as exc:
            decode(toks, CFG)
        assert exc.value.token_index == 8

    def test_clone_cannot_close_cycle(self):
        toks = tokens_of(
            (10, 10, ANCESTOR, 0, 10, 10),
            (20, 10, LINEAL, 0, 15, 10),
            (10, 10, CLONE, 2, 15, 12),  # would make kp2 -> kp1 -> kp2
        )
        with pytest.raises(ConOutOfRange):
            decode(toks, CFG)

    def test_garbage_after_eos(self):
        toks = [VOCAB.eos, VOCAB.pad, 7]
        with pytest.raises(BadSlotToken) as exc:
            decode(toks, CFG)
        assert exc.value.token_index == 2

    def test_lenient_skips_bad_sextets(self):
        toks = tokens_of(
            (10, 10, ANCESTOR, 0, 10, 10),
            (90, 90, CLONE, 1, 50, 50),     # bad: no key point there
            (20, 10, LINEAL, 0, 15, 10),    # still decodes
        )
        d = decode(toks, CFG, strict=False)
        assert len(d.keypoints) == 2
        assert len(d.edges) == 1
        violations = validate_sequence(toks, CFG)
        assert [v.rule for v in violations] == ["CloneTargetMissing"]
        assert violations[0].token_index == 8

    def test_validate_sequence_clean(self):
        d = generate(GenSpec(seed=5), CFG)
        assert validate_sequence(encode(d, CFG).to_tokens(CFG), CFG) == []

    def test_validate_sequence_collects_multiple(self):
        toks = tokens_of((10, 10, LINEAL, 0, 10, 10)) + [3]
        rules = [v.rule for v in validate_sequence(toks, CFG)]
        assert rules == ["LinealWithoutPrevious", "BadSlotToken"]

    def test_noise_class_sextets_are_dropped(self):
        toks = tokens_of(
            (10, 10, ANCESTOR, 0, 10, 10),
            (70, 70, VOCAB.ncls, 0, 3, 3),
            (20, 10, LINEAL, 0, 15, 10),
        )
        d = decode(toks, CFG)
        assert len(d.keypoints) == 2
        assert len(d.edges) == 1


class TestRoundTrip:
    def test_seeded_dags(self):
        for seed in range(60):
            spec = GenSpec(seed=seed, roots=1 + seed % 3,
                           fork_prob=0.2 + 0.2 * (seed % 3),
                           merge_prob=0.15 * (seed % 3))
            d = generate(spec, CFG)
            report = compare_roundtrip(d, decode(encode(d, CFG).to_tokens(CFG), CFG), CFG)
            assert report.topology_exact, (seed, report.detail)
            assert report.max_deviation <= 0.25 + 1e-6

    def test_encode_deterministic(self):
        d = generate(GenSpec(seed=11, roots=3, fork_prob=0.5, merge_prob=0.4), CFG)
        assert encode(d, CFG).to_tokens(CFG) == encode(d, CFG).to_tokens(CFG)

    def test_comparison_flags_topology_change(self):
        a = KeyPointDag([(0, 0, 0), (10, 0, 0), (20, 0, 0)],
                        [DagEdge(0, 1, (5, 0)), DagEdge(1, 2, (15, 0))])
        b = KeyPointDag([(0, 0, 0), (10, 0, 0), (20, 0, 0)],
                        [DagEdge(0, 1, (5, 0)), DagEdge(0, 2, (15, 0))])
        report = compare_roundtrip(a, b, CFG)
        assert not report.topology_exact
        assert report.max_deviation == float("inf")

    def test_comparison_flags_missing_keypoint(self):
        a = KeyPointDag([(0, 0, 0), (10, 0, 0)], [DagEdge(0, 1, (5, 0))])
        report = compare_roundtrip(a, KeyPointDag((), ()), CFG)
        assert not report.topology_exact


class TestAssemble:
    def make_inputs(self, seed=0):
        d = generate(GenSpec(seed=seed), CFG)
        gt = encode(d, CFG)
        prompt = extract_keypoints(dag_to_lanegraph(d, CFG), CFG)
        return gt, prompt

    def test_shape_and_framing(self):
        gt, prompt = self.make_inputs()
        inp, tgt = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(1))
        assert len(inp) == 802 and len(tgt) == 802
        assert inp[0] == VOCAB.start
        assert inp[201] == VOCAB.eok
        assert tgt[-1] == VOCAB.eos
        assert all(t == VOCAB.pad for t in tgt[:201])

    def test_real_sextets_verbatim_and_aligned(self):
        gt, prompt = self.make_inputs(seed=4)
        inp, tgt = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(2))
        n = 6 * len(gt.sextets)
        real_region_in = list(inp[202:202 + n])
        real_region_tgt = list(tgt[201:201 + n])
        flat = []
        for s in gt.sextets:
            flat.extend(s.tokens(VOCAB))
        assert real_region_in == flat
        assert real_region_tgt == flat

    def test_noise_region_supervision(self):
        gt, prompt = self.make_inputs(seed=6)
        inp, tgt = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(3))
        n_real = len(gt.sextets)
        for k in range(n_real, CFG.max_edges):
            group = tgt[201 + 6 * k:201 + 6 * (k + 1)]
            assert list(group) == [VOCAB.pad, VOCAB.pad, VOCAB.ncls,
                                   VOCAB.pad, VOCAB.pad, VOCAB.pad]
            in_group = inp[202 + 6 * k:202 + 6 * (k + 1)]
            assert VOCAB.is_coordinate(in_group[0]) and VOCAB.is_coordinate(in_group[1])
            assert VOCAB.is_class(in_group[2])

    def test_nonpad_target_count(self):
        gt, prompt = self.make_inputs(seed=9)
        _, tgt = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(4))
        n_real = len(gt.sextets)
        n_noise = CFG.max_edges - n_real
        nonpad = sum(1 for t in tgt if t != VOCAB.pad)
        assert nonpad == 6 * n_real + n_noise + 1

    def test_noise_endpoints_joined_into_prompt(self):
        gt, prompt = self.make_inputs(seed=2)
        inp, _ = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(5))
        pairs = {(inp[i], inp[i + 1]) for i in range(1, 201, 2)}
        n_real = len(gt.sextets)
        for k in range(n_real, CFG.max_edges):
            g = inp[202 + 6 * k:202 + 6 * (k + 1)]
            if not VOCAB.is_class(g[2]):
                continue
            assert (g[0], g[1]) in pairs

    def test_full_budget_means_no_noise(self):
        cfg = CFG.replace(max_edges=2, max_prompt_points=3)
        gt = EdgeSequence((
            EdgeSextet(50, 40, ANCESTOR, 0, 50, 40),
            EdgeSextet(60, 40, LINEAL, 0, 55, 40),
        ))
        prompt = PromptSet((QuantPoint(50, 40), QuantPoint(60, 40)))
        inp, tgt = assemble_training_pair(gt, prompt, cfg, np.random.default_rng(0))
        assert len(inp) == len(tgt) == cfg.prompt_token_budget + cfg.edge_token_budget
        assert VOCAB.ncls not in tgt
        assert sum(1 for t in tgt if t != VOCAB.pad) == 6 * 2 + 1

    def test_deterministic_given_seed(self):
        gt, prompt = self.make_inputs(seed=8)
        a = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(42))
        b = assemble_training_pair(gt, prompt, CFG, np.random.default_rng(42))
        assert a == b

    def test_budget_errors(self):
        gt = EdgeSequence(tuple(
            EdgeSextet(i, 0, ANCESTOR, 0, i, 0) for i in range(101)
        ))
        with pytest.raises(BudgetExceeded):
            assemble_training_pair(gt, PromptSet(()), CFG, np.random.default_rng(0))
        big_prompt = PromptSet(tuple(QuantPoint(i, 0) for i in range(101)))
        with pytest.raises(BudgetExceeded):
            assemble_training_pair(EdgeSequence(()), big_prompt, CFG,
                                   np.random.default_rng(0))
