"""Command-line front-end: build benchmarks, run constrained extraction,
score predictions, merge reports, and build few-shot prompts.

One JSON config file drives a run; individual flags override it. Exit
codes: 0 on success, 1 on data or validation errors, 2 on usage errors.
Messages go to stderr, artifacts to files only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import corpus as corpus_mod
from . import schema as schema_mod
from .corpus import DataError, Example, SplitSet, load_jsonl, save_jsonl
from .decode import DeadEndError, UniformScorer, build_trie, decode_greedy, oracle_scorer
from .embed import EmbedError, build_cooc, load_word2vec_text
from .evolve import (PRESETS, EvolutionConfig, EvolveError, build_benchmark,
                     write_artifacts)
from .lineal import serialize_line
from .llmclient import (ChatClient, EndpointConfig, LLMError, PromptSpec,
                        build_icl_prompt, parse_llm_response)
from .metrics import (METRIC_KINDS, MetricsError, micro_f1, render_report)
from .schema import SchemaError

_ERRORS = (SchemaError, DataError, EvolveError, MetricsError, LLMError,
           EmbedError, DeadEndError, OSError, ValueError)


def _err(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _note(message: str) -> None:
    print(message, file=sys.stderr)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _check_exists(paths: dict, keys) -> None:
    for key in keys:
        value = paths.get(key)
        if value and not os.path.exists(value):
            raise DataError(f"configured path does not exist: {key}={value}")


def _guard_overwrite(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise DataError(f"refusing to overwrite {path} (pass --force)")


def _evolution_config(args, config: dict) -> EvolutionConfig:
    values: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise EvolveError(f"unknown preset {args.preset!r}; choose from "
                              + ", ".join(sorted(PRESETS)))
        values.update(PRESETS[args.preset])
    values.update(config.get("evolution", {}))
    for key in ("strategy", "iterations", "n_init", "n_iter", "seed", "alpha"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    missing = [k for k in ("strategy", "iterations", "n_init", "n_iter")
               if k not in values]
    if missing:
        raise EvolveError("evolution config incomplete, missing: "
                          + ", ".join(missing))
    return EvolutionConfig(**values)


def cmd_build(args) -> int:
    config = _load_config(args.config)
    paths = dict(config.get("paths", {}))
    for key in ("raw_schema", "train", "dev", "test", "embeddings", "output_dir"):
        flag = getattr(args, key, None)
        if flag is not None:
            paths[key] = flag
    for key in ("raw_schema", "dev", "test", "output_dir"):
        if not paths.get(key):
            raise DataError(f"build needs a {key} path (config or flag)")
    _check_exists(paths, ("raw_schema", "train", "dev", "test", "embeddings"))

    cfg = _evolution_config(args, config)
    raw = schema_mod.load_json(paths["raw_schema"])
    train = load_jsonl(paths["train"]) if paths.get("train") else []
    splits = SplitSet(train=train, dev=load_jsonl(paths["dev"]),
                      test=load_jsonl(paths["test"]))

    store = None
    if cfg.strategy in ("horizontal", "hybrid"):
        if not paths.get("embeddings"):
            raise DataError(f"{cfg.strategy} expansion needs an embeddings path")
        store = load_word2vec_text(paths["embeddings"])
    cooc = None
    if cfg.strategy == "analogous":
        texts = [ex.text for part in (splits.train, splits.dev, splits.test)
                 for ex in part]
        cooc = build_cooc(texts, window=cfg.window)

    outdir = paths["output_dir"]
    _guard_overwrite(os.path.join(outdir, "manifest.json"), args.force)
    artifacts = build_benchmark(raw, splits, cfg, store=store, cooc=cooc)
    write_artifacts(artifacts, outdir, cfg, force=args.force)
    _note(f"wrote {len(artifacts)} iteration(s) to {outdir}")
    return 0


def cmd_extract(args) -> int:
    graph = schema_mod.load_json(args.schema)
    examples = load_jsonl(args.input)
    out_txt = args.out
    out_jsonl = os.path.splitext(out_txt)[0] + ".jsonl"
    _guard_overwrite(out_txt, args.force)
    _guard_overwrite(out_jsonl, args.force)

    raw = schema_mod.load_json(args.raw_schema) if args.raw_schema else None
    if args.scorer == "oracle" and raw is None:
        raise DataError("the oracle scorer needs --raw-schema")

    trie = build_trie(graph)
    lines = []
    predicted: list[Example] = []
    for ex in examples:
        if args.scorer == "oracle":
            scorer = oracle_scorer(ex.annotations, raw, graph)
        else:
            scorer = UniformScorer()
        result = decode_greedy(ex.text, scorer, graph, max_len=args.max_len,
                               trie=trie)
        lines.append(serialize_line(result.tokens))
        predicted.append(Example(id=ex.id, text=ex.text,
                                 annotations=tuple(result.annotations)))
        for diag in result.diagnostics:
            _note(f"{ex.id}: {diag}")
    with open(out_txt, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    save_jsonl(predicted, out_jsonl)
    _note(f"decoded {len(predicted)} example(s) to {out_txt}")
    return 0


def cmd_eval(args) -> int:
    gold = load_jsonl(args.gold)
    pred = load_jsonl(args.pred)
    gold_ids = {ex.id for ex in gold}
    pred_ids = {ex.id for ex in pred}
    unmatched = sorted(gold_ids ^ pred_ids)
    if unmatched:
        shown = ", ".join(unmatched[:5])
        return _err(f"{len(unmatched)} unmatched example id(s): {shown}")

    prf = micro_f1(pred, gold, args.metric)
    report = {
        "metric": args.metric,
        "iterations": [{"i": 1, "p": prf.precision, "r": prf.recall,
                        "f1": prf.f1, "n_pred": prf.n_pred,
                        "n_gold": prf.n_gold, "n_correct": prf.n_correct}],
        "ave": prf.f1,
    }
    _guard_overwrite(args.out, args.force)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    table_path = args.table or os.path.splitext(args.out)[0] + ".txt"
    _guard_overwrite(table_path, args.force)
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(render_report({args.metric: [prf.f1]}))
    _note(f"{args.metric}: P={prf.precision:.4f} R={prf.recall:.4f} "
          f"F1={prf.f1:.4f}")
    return 0


def cmd_report(args) -> int:
    rows: dict[str, list[float]] = {}
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        label = data.get("metric", path)
        rows.setdefault(label, [])
        for entry in data.get("iterations", []):
            rows[label].append(float(entry["f1"]))
    table = render_report(rows)
    _guard_overwrite(args.out, args.force)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(table)
    if args.json:
        merged = {label: {"f1": values,
                          "ave": float(sum(v * 100.0 for v in values) / len(values))}
                  for label, values in rows.items()}
        _guard_overwrite(args.json, args.force)
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(merged, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    _note(f"wrote report table to {args.out}")
    return 0


def cmd_prompt(args) -> int:
    config = _load_config(args.config)
    graph = schema_mod.load_json(args.schema)
    schema_names = sorted(" ".join(n.name) for n in graph.nodes.values()
                          if n.role == "relation" and n.level != "root")
    demos = []
    if args.demos:
        for ex in load_jsonl(args.demos):
            triples = [(r.head.text, r.relation, r.tail.text)
                       for r in ex.annotations
                       if isinstance(r, corpus_mod.Relation)]
            if triples:
                demos.append((ex.text, triples))
            if len(demos) >= args.demo_count:
                break
    queries = load_jsonl(args.queries)

    os.makedirs(args.out_dir, exist_ok=True)
    client = None
    if args.send:
        endpoint = config.get("endpoint") or {}
        if not endpoint.get("base_url") or not endpoint.get("model"):
            raise LLMError("--send needs an endpoint config with base_url "
                           "and model")
        client = ChatClient(EndpointConfig(**endpoint))

    parsed_rows: list[Example] = []
    for ex in queries:
        spec = PromptSpec(schema_names=schema_names, demos=demos, query=ex.text)
        prompt = build_icl_prompt(spec)
        prompt_path = os.path.join(args.out_dir, f"{ex.id}.prompt.txt")
        _guard_overwrite(prompt_path, args.force)
        with open(prompt_path, "w", encoding="utf-8") as fh:
            fh.write(prompt)
        if client is not None:
            response = client.complete(prompt)
            with open(os.path.join(args.out_dir, f"{ex.id}.response.txt"),
                      "w", encoding="utf-8") as fh:
                fh.write(response)
            annotations, diags = parse_llm_response(response, graph, ex.text)
            for diag in diags:
                _note(f"{ex.id}: {diag}")
            parsed_rows.append(Example(id=ex.id, text=ex.text,
                                       annotations=tuple(annotations)))
    if parsed_rows:
        save_jsonl(parsed_rows, os.path.join(args.out_dir, "parsed.jsonl"))
    _note(f"wrote {len(queries)} prompt(s) to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evoschema",
        description="Evolving-schema extraction benchmarks: build, extract, "
                    "eval, report, prompt.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="emit per-iteration benchmark artifacts")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--preset", help="evolution preset, e.g. nerd-h, nyt-v, ace-x")
    p.add_argument("--raw-schema", dest="raw_schema")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--embeddings")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--strategy", choices=("horizontal", "vertical", "hybrid",
                                          "analogous"))
    p.add_argument("--iterations", type=int)
    p.add_argument("--n-init", dest="n_init", type=int)
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("extract", help="decode a split with a named scorer")
    p.add_argument("--schema", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="prediction .txt path; a "
                   "sibling .jsonl is written next to it")
    p.add_argument("--scorer", choices=("uniform", "oracle"), default="uniform")
    p.add_argument("--raw-schema", dest="raw_schema",
                   help="raw taxonomy (oracle scorer only)")
    p.add_argument("--max-len", dest="max_len", type=int, default=256)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--metric", choices=METRIC_KINDS, required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--table", help="table path (default: <out>.txt)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="merge per-iteration eval reports")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True, help="rendered table path")
    p.add_argument("--json", help="also write the merged rows as JSON")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("prompt", help="write few-shot prompts, optionally send")
    p.add_argument("--config", help="run config JSON (endpoint section)")
    p.add_argument("--schema", required=True)
    p.add_argument("--demos")
    p.add_argument("--queries", required=True)
    p.add_argument("--demo-count", dest="demo_count", type=int, default=20)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--send", action="store_true")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_prompt)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        return _err(str(exc))


if __name__ == "__main__":
    sys.exit(main())
