"""Batch command-line surface: gen, encode, decode, roundtrip, prompt,
assemble, validate, eval, nll.

Inputs are processed line by line (JSON objects or token lines); every
command is deterministic given inputs, --config, and --seed. Exit codes:
0 success, 1 I/O or format problem, 2 validation failure, 3 budget
overflow. Diagnostics go to stderr; machine-readable output to --out.
"""

from __future__ import annotations

import argparse
import ast
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io as lio
from .codec import (
    assemble_training_pair,
    compare_roundtrip,
    decode,
    encode,
    validate_sequence,
)
from .config import DEFAULT_CONFIG, CodecConfig
from .decoding import sequence_nll
from .errors import BudgetExceeded, LaneSeqError, TooManyEdges, TooManyKeypoints
from .graph import KeyPointDag, LaneGraph, dag_to_lanegraph, lanegraph_to_dag
from .metrics import evaluate
from .prompts import extract_keypoints, shuffle_prompt
from .synth import GenSpec, generate

CONFIG_ENV = "LGSEQ_CONFIG"
_BUDGET_ERRORS = (TooManyEdges, TooManyKeypoints, BudgetExceeded)


def _load_config(path: str | None) -> CodecConfig:
    """Apply key=value overrides from --config or the environment fallback."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if not path:
        return DEFAULT_CONFIG
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value, got {raw!r}")
            key, _, value = line.partition("=")
            try:
                parsed = ast.literal_eval(value.strip())
            except (ValueError, SyntaxError):
                parsed = value.strip()
            overrides[key.strip()] = parsed
    return DEFAULT_CONFIG.replace(**overrides)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_lines(path: str, lines) -> None:
    text = "".join(line + "\n" for line in lines)
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_graphs(path: str, cfg: CodecConfig) -> list[tuple[KeyPointDag, LaneGraph]]:
    """Each input object as both forms, whichever way it was stored."""
    out = []
    for obj in lio.read_json_objects(_read_text(path)):
        if lio.is_dag_json(obj):
            dag = lio.dag_from_json(obj)
            out.append((dag, dag_to_lanegraph(dag, cfg)))
        else:
            g = lio.lanegraph_from_json(obj)
            out.append((lanegraph_to_dag(g, cfg), g))
    return out


def _map_lines(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(len(items)), items))


def _cmd_gen(args, cfg: CodecConfig) -> int:
    def one(i: int, _) -> str:
        spec = GenSpec(seed=args.seed + i, roots=args.roots,
                       max_depth=args.max_depth, fork_prob=args.fork_prob,
                       merge_prob=args.merge_prob, curvature=args.curvature,
                       max_edges=args.max_edges)
        dag = generate(spec, cfg)
        if args.format == "lanegraph":
            return lio.dumps(lio.lanegraph_to_json(dag_to_lanegraph(dag, cfg)))
        return lio.dumps(lio.dag_to_json(dag))

    _write_lines(args.out, _map_lines(one, range(args.count), args.jobs))
    return 0


def _cmd_encode(args, cfg: CodecConfig) -> int:
    graphs = _read_graphs(args.graph, cfg)

    def one(_i: int, pair) -> str:
        dag, _ = pair
        return lio.format_tokens(encode(dag, cfg).to_tokens(cfg))

    _write_lines(args.out, _map_lines(one, graphs, args.jobs))
    return 0


def _cmd_decode(args, cfg: CodecConfig) -> int:
    lines = [l for l in _read_text(args.tokens).splitlines() if l.strip()]

    def one(i: int, line: str) -> str:
        tokens = lio.parse_token_line(line)
        dag = decode(tokens, cfg, strict=not args.lenient)
        if args.lenient:
            for v in validate_sequence(tokens, cfg):
                print(f"line {i}: {v} {v.message}", file=sys.stderr)
        return lio.dumps(lio.dag_to_json(dag))

    _write_lines(args.out, _map_lines(one, lines, args.jobs))
    return 0


def _cmd_roundtrip(args, cfg: CodecConfig) -> int:
    graphs = _read_graphs(args.graph, cfg)
    tolerance = max(cfg.bin_width_x, cfg.bin_width_y) / 2.0 + 1e-6

    def one(_i: int, pair):
        dag, _ = pair
        tokens = encode(dag, cfg).to_tokens(cfg)
        report = compare_roundtrip(dag, decode(tokens, cfg), cfg)
        ok = report.topology_exact and report.max_deviation <= tolerance
        line = lio.dumps({
            "topology_exact": report.topology_exact,
            "max_deviation": report.max_deviation,
            "ok": ok,
        })
        return line, ok

    results = _map_lines(one, graphs, args.jobs)
    _write_lines(args.out, [line for line, _ in results])
    if all(ok for _, ok in results):
        return 0
    print("roundtrip: some graphs did not survive encode/decode", file=sys.stderr)
    return 2


def _cmd_prompt(args, cfg: CodecConfig) -> int:
    graphs = _read_graphs(args.graph, cfg)

    def one(i: int, pair) -> str:
        _, g = pair
        ps = extract_keypoints(g, cfg)
        if args.shuffle:
            ps = shuffle_prompt(ps, args.seed + i)
        return lio.format_prompt(ps.points)

    _write_lines(args.out, _map_lines(one, graphs, args.jobs))
    return 0


def _cmd_assemble(args, cfg: CodecConfig) -> int:
    graphs = _read_graphs(args.graph, cfg)

    def one(i: int, pair):
        dag, g = pair
        gt = encode(dag, cfg)
        prompt = extract_keypoints(g, cfg)
        rng = np.random.default_rng(args.seed + i)
        inp, tgt = assemble_training_pair(gt, prompt, cfg, rng)
        return lio.format_tokens(inp), lio.format_tokens(tgt)

    lines: list[str] = []
    for inp, tgt in _map_lines(one, graphs, args.jobs):
        lines.extend((inp, tgt))
    _write_lines(args.out, lines)
    return 0


def _cmd_validate(args, cfg: CodecConfig) -> int:
    lines = [l for l in _read_text(args.tokens).splitlines() if l.strip()]

    def one(i: int, line: str):
        violations = validate_sequence(lio.parse_token_line(line), cfg)
        for v in violations:
            print(f"line {i}: {v} {v.message}", file=sys.stderr)
        return lio.dumps({
            "violations": [{"rule": v.rule, "token_index": v.token_index}
                           for v in violations]
        }), not violations

    results = _map_lines(one, lines, args.jobs)
    _write_lines(args.out, [line for line, _ in results])
    return 0 if all(ok for _, ok in results) else 2


def _cmd_eval(args, cfg: CodecConfig) -> int:
    preds = _read_graphs(args.pred, cfg)
    gts = _read_graphs(args.gt, cfg)
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions vs {len(gts)} ground truths")

    def one(i: int, pair) -> str:
        (_, pg), (_, gg) = pair
        return lio.dumps(evaluate(pg, gg, cfg).to_json_dict())

    _write_lines(args.out, _map_lines(one, list(zip(preds, gts)), args.jobs))
    return 0


def _cmd_nll(args, cfg: CodecConfig) -> int:
    lines = [l for l in _read_text(args.tokens).splitlines() if l.strip()]
    if len(lines) != 1:
        raise ValueError(f"nll expects exactly one token line, got {len(lines)}")
    tokens = lio.parse_token_line(lines[0])
    table = lio.read_tokprob(args.probs)
    weights = json.loads(args.weights) if args.weights else None
    value = sequence_nll(tokens, table, weights, cfg)
    _write_lines(args.out, [repr(value)])
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None,
                   help=f"key=value config file (or ${CONFIG_ENV})")
    p.add_argument("--seed", type=int, default=0,
                   help="base seed; line i uses seed+i where randomness applies")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers over independent lines")
    p.add_argument("--out", default="-", help="output file, - for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laneseq",
        description="Lane-topology sequence codec: graphs to tokens and back.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic graphs")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--format", choices=("dag", "lanegraph"), default="dag")
    p.add_argument("--roots", type=int, default=2)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--fork-prob", type=float, default=0.25)
    p.add_argument("--merge-prob", type=float, default=0.15)
    p.add_argument("--curvature", type=float, default=1.0)
    p.add_argument("--max-edges", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("encode", help="graph JSON lines to token lines")
    p.add_argument("--graph", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="token lines to DAG JSON lines")
    p.add_argument("--tokens", required=True)
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed sextets instead of failing")
    _add_common(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("roundtrip", help="encode+decode and compare")
    p.add_argument("--graph", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_roundtrip)

    p = sub.add_parser("prompt", help="extract key-point prompts")
    p.add_argument("--graph", required=True)
    p.add_argument("--shuffle", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_prompt)

    p = sub.add_parser("assemble", help="emit alternating input/target lines")
    p.add_argument("--graph", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("validate", help="report token-stream violations")
    p.add_argument("--tokens", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("nll", help="sequence likelihood from a TOKPROB table")
    p.add_argument("--tokens", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--weights", default=None,
                   help='JSON class-weight map, e.g. \'{"ncls": 0.2}\'')
    _add_common(p)
    p.set_defaults(func=_cmd_nll)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except _BUDGET_ERRORS as e:
        print(f"{e.name}: {e}", file=sys.stderr)
        return 3
    except LaneSeqError as e:
        print(f"{e.name}: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
