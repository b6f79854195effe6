"""Command-line entry point: ``msp <group> <command> ...``."""

import argparse
from datetime import datetime, timezone
import json
import logging
import sys

from . import corpus as corpus_mod
from .corpus import CorpusSplit, filter_corpus, ingest_records, select, write_records
from .metrics import evaluate, load_predictions
from .promptkit import MODES, export_finetune_jsonl
from .retrieval import build_index, predict_by_retrieval, retrieve_neighbors
from .runner import (
    ChatClient,
    EndpointConfig,
    extract_title_context,
    run_task,
    write_run,
)

log = logging.getLogger("msplan")


def _load_corpus(path):
    records, errors = ingest_records(path)
    for err in errors:
        log.warning("%s: %s", path, err)
    return records


def _records_for(args):
    records = _load_corpus(args.corpus)
    if getattr(args, "split", None):
        split = CorpusSplit.load(args.split)
        records = select(records, split.part(args.part))
    return records


def cmd_corpus_ingest(args):
    records, errors = ingest_records(args.infile)
    for err in errors:
        print(f"rejected {err}", file=sys.stderr)
    if args.no_filter:
        kept, report = records, None
    else:
        kept, report = filter_corpus(records, args.min_freq)
    write_records(kept, args.out)
    summary = {"ingested": len(records), "rejected_lines": len(errors), "written": len(kept)}
    if report is not None:
        summary["filter"] = report.to_dict()
    print(json.dumps(summary, indent=1))
    return 0


def cmd_corpus_split(args):
    records = _load_corpus(args.corpus)
    fn = corpus_mod.split_random if args.kind == "random" else corpus_mod.split_target_disjoint
    split = fn(records, args.seed)
    if args.out:
        split.save(args.out)
    else:
        print(split.dumps())
    print(f"train={len(split.train)} validation={len(split.validation)} test={len(split.test)}",
          file=sys.stderr)
    return 0


def cmd_corpus_export(args):
    records = _records_for(args)
    n = export_finetune_jsonl(records, args.task, args.mode, args.out)
    print(f"wrote {n} examples to {args.out}", file=sys.stderr)
    return 0


def cmd_corpus_vocab(args):
    for formula, count in corpus_mod.precursor_vocabulary(_load_corpus(args.corpus))[: args.top]:
        print(f"{count}\t{formula}")
    return 0


def cmd_baseline_retrieve(args):
    index = build_index(_load_corpus(args.index))
    k = min(args.k, len(index))
    neighbors = retrieve_neighbors(index, args.query, k)
    precursors, operations = predict_by_retrieval(index, args.query, k, dedup=args.dedup)
    print(json.dumps({
        "query": args.query,
        "neighbors": [{"id": i, "similarity": s} for i, s in neighbors],
        "precursor_candidates": precursors,
        "operation_candidates": operations,
    }, indent=1))
    return 0


def cmd_baseline_predict(args):
    index = build_index(_load_corpus(args.index))
    records = _records_for(args)
    k = min(args.k, len(index))
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in records:
            pre, ops = predict_by_retrieval(index, rec.target, k, dedup=args.dedup)
            if args.task == "pp":
                cands = pre
            elif args.task == "sop":
                cands = ops
            else:
                cands = [{"precursors": p, "operations": o} for p, o in zip(pre, ops)]
            fh.write(json.dumps({"id": rec.id, "candidates": cands}) + "\n")
    return 0


def cmd_evaluate(args):
    truth = _load_corpus(args.truth)
    preds = load_predictions(args.pred, args.task)
    ids = set(preds)
    if args.only_predicted:
        truth = [r for r in truth if r.id in ids]
    report = evaluate(preds, truth, args.task, metadata={"pred": args.pred, "truth": args.truth})
    report.write(args.out_csv, args.out_json)
    if not args.out_csv:
        sys.stdout.write(report.to_csv())
    return 0


def cmd_run(args):
    records = _records_for(args)
    pp_cfg = EndpointConfig.load(args.config)
    sop_cfg = EndpointConfig.load(args.sop_config) if args.sop_config else pp_cfg
    if pp_cfg.num_samples < args.k:
        log.warning("num_samples (%d) < k (%d): fewer than k candidates possible",
                    pp_cfg.num_samples, args.k)
    split_meta = {}
    if args.split:
        split = CorpusSplit.load(args.split)
        split_meta = {"split_kind": split.split_kind, "seed": split.seed, "part": args.part}
    meta = dict(
        split_meta,
        mode=args.mode if args.task != "pp" else None,
        k=args.k,
        pp_rank=args.pp_rank,
        config={"pp": pp_cfg.snapshot(), "sop": sop_cfg.snapshot()},
        model_id=pp_cfg.model_id,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    with ChatClient(pp_cfg) as pp_client, ChatClient(sop_cfg) as sop_client:
        predictions, entries = run_task(
            args.task, records, pp_client=pp_client, sop_client=sop_client,
            k=args.k, mode=args.mode, pp_rank=args.pp_rank,
        )
    report = write_run(args.out, args.task, records, predictions, entries, meta)
    means = report.means()
    print(" ".join(f"{k}={v:.4f}" for k, v in means.items() if v is not None))
    return 0


def cmd_context_extract(args):
    cfg = EndpointConfig.load(args.config)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        with ChatClient(cfg) as client, open(args.titles, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                ctx, diags = extract_title_context(client, obj["title"])
                out.write(json.dumps({"id": obj.get("id"), "context": ctx.to_dict(),
                                      "diagnostics": diags}, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="msp", description="Material synthesis planning toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    # corpus
    c = sub.add_parser("corpus", help="ingest, filter, split and export corpora")
    csub = c.add_subparsers(dest="command", required=True)
    x = csub.add_parser("ingest", help="validate + preprocess raw JSONL")
    x.add_argument("--in", dest="infile", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--min-freq", type=int, default=5)
    x.add_argument("--no-filter", action="store_true")
    x.set_defaults(func=cmd_corpus_ingest)

    x = csub.add_parser("split", help="8:1:1 random or target-disjoint split")
    x.add_argument("--corpus", required=True)
    x.add_argument("--kind", choices=("random", "target-disjoint"), required=True)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out")
    x.set_defaults(func=cmd_corpus_split)

    x = csub.add_parser("export", help="fine-tuning JSONL")
    x.add_argument("--corpus", required=True)
    x.add_argument("--split")
    x.add_argument("--part", default="train")
    x.add_argument("--task", choices=("pp", "sop"), required=True)
    x.add_argument("--mode", choices=MODES, default="explicit")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_corpus_export)

    x = csub.add_parser("vocab", help="precursor frequency table")
    x.add_argument("--corpus", required=True)
    x.add_argument("--top", type=int, default=None)
    x.set_defaults(func=cmd_corpus_vocab)

    # baseline
    b = sub.add_parser("baseline", help="composition-vector retrieval baseline")
    bsub = b.add_subparsers(dest="command", required=True)
    x = bsub.add_parser("retrieve", help="nearest training records for one target")
    x.add_argument("--index", required=True, help="training corpus JSONL")
    x.add_argument("--query", required=True)
    x.add_argument("--k", type=int, default=10)
    x.add_argument("--dedup", action="store_true")
    x.set_defaults(func=cmd_baseline_retrieve)

    x = bsub.add_parser("predict", help="write baseline predictions for evaluation")
    x.add_argument("--index", required=True)
    x.add_argument("--corpus", required=True)
    x.add_argument("--split")
    x.add_argument("--part", default="test")
    x.add_argument("--task", choices=("pp", "sop", "msp"), required=True)
    x.add_argument("--k", type=int, default=10)
    x.add_argument("--dedup", action="store_true")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_baseline_predict)

    # evaluate
    x = sub.add_parser("evaluate", help="score predictions against a corpus")
    x.add_argument("--pred", required=True)
    x.add_argument("--truth", required=True)
    x.add_argument("--task", choices=("pp", "sop", "msp"), required=True)
    x.add_argument("--out-csv")
    x.add_argument("--out-json")
    x.add_argument("--only-predicted", action="store_true",
                   help="score only records that have a predictions line")
    x.set_defaults(func=cmd_evaluate)

    # run
    x = sub.add_parser("run", help="query a chat endpoint and evaluate")
    x.add_argument("task", choices=("pp", "sop", "msp"))
    x.add_argument("--corpus", required=True)
    x.add_argument("--split")
    x.add_argument("--part", default="test")
    x.add_argument("--config", required=True, help="endpoint config JSON (PP, or both)")
    x.add_argument("--sop-config", help="separate endpoint config for SOP")
    x.add_argument("--k", type=int, default=10)
    x.add_argument("--mode", choices=MODES, default="explicit")
    x.add_argument("--pp-rank", type=int, default=1)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_run)

    # context
    c = sub.add_parser("context", help="LLM title-context extraction")
    csub = c.add_subparsers(dest="command", required=True)
    x = csub.add_parser("extract", help="context fields from publication titles")
    x.add_argument("--titles", required=True, help='JSONL of {"id", "title"}')
    x.add_argument("--config", required=True)
    x.add_argument("--out")
    x.set_defaults(func=cmd_context_extract)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
