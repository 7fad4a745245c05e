"""Command-line surface: parse, mask, train, evaluate, inspect-attention.

Exit codes are stable for scripting: 0 success, 1 data error, 2 numerical
failure, 64 usage error. Verbosity comes from the SIA_LOG environment
variable (debug/info/warning/error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import conllu, masks, model

EXIT_OK = 0
EXIT_DATA = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64

log = logging.getLogger("sia")


class UsageError(Exception):
    """Semantically invalid flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _build_parser() -> _Parser:
    parser = _Parser(prog="sia", description="Syntax-informed attention for dialogue response selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[], help="convert a CoNLL-U file to utterance JSON")
    p.add_argument("input", help="CoNLL-U file")
    p.add_argument("output", help="destination JSON file")

    p = sub.add_parser("mask", help="emit attention masks for a dialogue file")
    p.add_argument("dialogues", help="dialogue JSON file")
    p.add_argument("--m", type=_positive_int, default=4, help="inter-sentence depth bound (default 4)")
    p.add_argument("--mask-kind", choices=masks.MASK_KINDS, default="sia")
    p.add_argument("--format", choices=("json", "ascii"), default="json")

    p = sub.add_parser("train", help="train a model on a dialogue JSON file")
    p.add_argument("dataset", help="dialogue JSON file")
    p.add_argument("--checkpoint", required=True, help="checkpoint output path")
    p.add_argument("--loss-csv", default=None, help="per-epoch loss CSV (default: <checkpoint>.loss.csv)")
    p.add_argument("--epochs", type=_positive_int, default=100)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=_positive_int, default=4)
    p.add_argument("--mask-mode", choices=("additive", "multiplicative", "none"), default="additive")
    p.add_argument("--layers", type=_positive_int, default=2)
    p.add_argument("--heads", type=_positive_int, default=2)
    p.add_argument("--dim", type=_positive_int, default=16)
    p.add_argument("--tap-layer", type=_positive_int, default=None)
    p.add_argument("--neg-ratio", type=int, default=0, help="sampled negatives per positive example")

    p = sub.add_parser("evaluate", help="rank candidate pools and report metrics")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("evalset", help="evaluation JSON file with candidate pools")
    p.add_argument("--output", default=None, help="also write the report JSON here")

    p = sub.add_parser("inspect-attention", help="dump attention weights of the syntax branch")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("dialogue", help="dialogue JSON file (first record is used)")
    p.add_argument("--layer", type=_positive_int, default=1, help="syntax-branch layer, 1 or 2")
    p.add_argument("--head", type=_positive_int, default=1, help="attention head, 1-based")
    p.add_argument("--format", choices=("json", "ascii"), default="json")
    p.add_argument("--compare-backbone", action="store_true",
                   help="also dump the unmasked backbone weights at the tap layer")

    return parser


def _cmd_parse(args) -> int:
    with open(args.input, encoding="utf-8") as f:
        trees = conllu.parse_conllu(f.read())
    payload = [conllu.tree_to_dict(t) for t in trees]
    with open(args.output, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=1)
        f.write("\n")
    log.info("parsed %d sentences from %s", len(trees), args.input)
    return EXIT_OK


def _cmd_mask(args) -> int:
    examples = conllu.load_dialogues(args.dialogues)
    if not examples:
        raise conllu.DataError("dialogue file contains no records")
    rendered = []
    for ex in examples:
        seq = masks.assemble(ex)
        mask = masks.build_mask(seq, args.mask_kind, args.m)
        if args.format == "json":
            rendered.append(masks.mask_to_json(mask))
        else:
            rendered.append(masks.render_mask_ascii(mask, seq.labels()))
    if args.format == "json":
        payload = rendered[0] if len(rendered) == 1 else rendered
        sys.stdout.write(json.dumps(payload, indent=1) + "\n")
    else:
        for i, block in enumerate(rendered):
            if len(rendered) > 1:
                sys.stdout.write(f"# example {i}\n")
            sys.stdout.write(block)
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset = conllu.load_dialogues(args.dataset)
    cfg = model.TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        neg_ratio=args.neg_ratio,
        model=model.ModelConfig(
            dim=args.dim,
            heads=args.heads,
            layers=args.layers,
            tap=args.tap_layer,
            m=args.m,
            mask_mode=args.mask_mode,
        ),
    )
    params, losses = model.train(dataset, cfg)
    model.save_checkpoint(args.checkpoint, params, cfg.model)
    loss_csv = args.loss_csv or args.checkpoint + ".loss.csv"
    with open(loss_csv, "w", encoding="utf-8") as f:
        f.write("epoch,loss\n")
        for epoch, value in enumerate(losses):
            f.write(f"{epoch},{value!r}\n")
    final = losses[-1] if losses else float("nan")
    sys.stdout.write(f"trained {args.epochs} epochs on {len(dataset)} examples; final loss {final:.6f}\n")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    params, cfg = model.load_checkpoint(args.checkpoint)
    cases = conllu.load_eval_cases(args.evalset)
    report = model.evaluate_cases(cases, params, cfg)
    text = json.dumps(report, indent=1) + "\n"
    sys.stdout.write(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text)
    return EXIT_OK


_SHADE_RAMP = ((0.75, "█"), (0.5, "▓"), (0.25, "▒"), (0.0, "░"))


def _weight_row_ascii(row) -> str:
    cells = []
    for w in row:
        if w == 0.0:
            cells.append(masks.BLOCKED_CELL)
            continue
        for threshold, char in _SHADE_RAMP:
            if w > threshold:
                cells.append(char)
                break
    return "".join(cells)


def _render_weights_ascii(title: str, weights, labels) -> str:
    width = max(len(l) for l in labels)
    lines = [f"# {title}"]
    for i, row in enumerate(weights):
        lines.append(f"{i:3d} {labels[i]:<{width}}  {_weight_row_ascii(row)}")
    return "\n".join(lines) + "\n"


def _cmd_inspect_attention(args) -> int:
    params, cfg = model.load_checkpoint(args.checkpoint)
    examples = conllu.load_dialogues(args.dialogue)
    if not examples:
        raise conllu.DataError("dialogue file contains no records")
    if not cfg.sia:
        raise UsageError("checkpoint was trained without the syntax branch")
    if not 1 <= args.layer <= 2:
        raise UsageError(f"--layer must be 1 or 2, got {args.layer}")
    if not 1 <= args.head <= cfg.heads:
        raise UsageError(f"--head must be in 1..{cfg.heads}, got {args.head}")
    states = model.forward_states(examples[0], params, cfg)
    labels = states.seq.labels()
    weights = states.sia_attn[args.layer - 1][args.head - 1]
    backbone = states.backbone_attn[params.tap - 1][args.head - 1] if args.compare_backbone else None
    if args.format == "json":
        payload = {
            "layer": args.layer,
            "head": args.head,
            "mask_mode": cfg.mask_mode,
            "n": states.seq.n,
            "labels": labels,
            "weights": weights.tolist(),
        }
        if backbone is not None:
            payload["backbone_layer"] = params.tap
            payload["backbone_weights"] = backbone.tolist()
        sys.stdout.write(json.dumps(payload, indent=1) + "\n")
    else:
        sys.stdout.write(_render_weights_ascii(
            f"syntax branch layer {args.layer} head {args.head} (mask_mode={cfg.mask_mode})", weights, labels))
        if backbone is not None:
            sys.stdout.write(_render_weights_ascii(
                f"backbone layer {params.tap} head {args.head} (unmasked)", backbone, labels))
    return EXIT_OK


_COMMANDS = {
    "parse": _cmd_parse,
    "mask": _cmd_mask,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "inspect-attention": _cmd_inspect_attention,
}


def _configure_logging() -> None:
    level_name = os.environ.get("SIA_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sia {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (conllu.DataError, OSError, json.JSONDecodeError) as exc:
        print(f"sia {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (model.TrainingDiverged, FloatingPointError) as exc:
        print(f"sia {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sia {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
