"""Batch command-line front end wiring the pipeline stages together.

Exit codes: 0 success, 1 usage error, 2 data/validation error. Results go to
``--out`` files (written atomically: temp file + rename) or stdout; all
diagnostics go to stderr. A ``--config`` file of ``key = value`` lines
supplies defaults; explicit flags always win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import elements as elements_mod
from . import encode as encode_mod
from . import learn as learn_mod
from .context import element_firing_type, firing_report, read_maskfile
from .featstore import (
    FeatfileError,
    PatchGeometry,
    read_featfile,
    read_vector_file,
    write_featfile,
    write_vector_file,
)
from .lda import (
    DEFAULT_MERGE_THRESHOLD,
    ensemble_merge,
    estimate_background,
    read_detector_bank,
    write_detector_bank,
)
from .miner import MiningConfig, mine_rules, read_patterns, write_patterns
from .synthgen import SynthSpec, generate_dataset, write_ground_truth
from .transact import Transaction, TransactionDatabase, build_database


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fraction_flag(name: str, value: float) -> float:
    if not 0.0 < value <= 1.0:
        raise UsageError(f"{name} must be in (0,1]")
    return value


def _atomic_text(path: str, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_binary(path: str, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit_text(out: str | None, writer) -> None:
    if out is None or out == "-":
        writer(sys.stdout)
    else:
        _atomic_text(out, writer)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_config(argv: list[str]) -> dict:
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if path is None:
        return {}
    values: dict = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            try:
                values[key] = int(raw)
            except ValueError:
                try:
                    values[key] = float(raw)
                except ValueError:
                    values[key] = raw
    return values


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value defaults file; flags override it")
    p.add_argument("--workers", type=int, default=0,
                   help="worker hint (0 = auto); results never depend on it")
    p.add_argument("--seed", type=int, default=0)


def _build_parser() -> tuple[_Parser, list[argparse.ArgumentParser]]:
    parser = _Parser(prog="mdpm", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    subparsers: list[argparse.ArgumentParser] = []

    def add_parser(name, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        subparsers.append(sp)
        return sp

    p = add_parser("synth", help="generate a planted synthetic feature store")
    p.add_argument("--spec", help="key = value file of generator fields")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="where to write the ground-truth sidecar")
    for flag, typ in (("--dim", int), ("--categories", int), ("--images", int),
                      ("--patches", int), ("--concepts", int), ("--concept-items", int),
                      ("--noise", float), ("--noise-density", float), ("--signal", float),
                      ("--concept-seed", int),
                      ("--p-plant", float), ("--p-leak", float)):
        p.add_argument(flag, type=typ)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = add_parser("mine", help="mine patterns for one target category")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--supp-min", type=float, default=0.0001)
    p.add_argument("--conf-min", type=float, default=0.3)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_mine)

    p = add_parser("retrieve", help="retrieve the element behind each pattern")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--patterns", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_retrieve)

    p = add_parser("select", help="keep the top-X elements by coverage")
    p.add_argument("--elements", required=True)
    p.add_argument("--top-x", type=int, default=50)
    p.add_argument("--out")
    p.add_argument("--patterns-out", help="also write the selected patterns")
    _add_common(p)
    p.set_defaults(func=_cmd_select)

    p = add_parser("merge", help="ensemble-merge elements into detectors")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--elements", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--th", type=float, default=DEFAULT_MERGE_THRESHOLD)
    p.add_argument("--shrinkage", type=float, default=0.01)
    p.add_argument("--top-x", type=int)
    p.add_argument("--detectors", required=True)
    p.add_argument("--merged", help="where to write the merged element dump")
    _add_common(p)
    p.set_defaults(func=_cmd_merge)

    p = add_parser("encode-bop", help="bag-of-patterns image encodings")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--patterns", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-w", type=int)
    p.add_argument("--image-h", type=int)
    p.add_argument("--raw-counts", action="store_true",
                   help="skip the per-cell L2 normalization")
    _add_common(p)
    p.set_defaults(func=_cmd_encode_bop)

    p = add_parser("encode-boe", help="bag-of-elements image encodings")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--detectors", required=True, nargs="+",
                   help="one detector bank per category, category-major order")
    p.add_argument("--out", required=True)
    p.add_argument("--image-w", type=int)
    p.add_argument("--image-h", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_encode_boe)

    p = add_parser("train", help="one-vs-rest training over encodings")
    p.add_argument("--encodings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reg-grid", default="0.01,0.1,1,10")
    p.add_argument("--folds", type=int, default=5)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = add_parser("eval", help="evaluate a model on encodings")
    p.add_argument("--encodings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--metric", choices=("ap", "accuracy"), default="ap")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = add_parser("context", help="firing-type analysis against pixel masks")
    p.add_argument("--input", required=True,
                   help="JSONL: per element, a mask path and detections per image")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_context)

    p = add_parser("bench", help="mining throughput on a large synthetic database")
    p.add_argument("--transactions", type=int, default=200_000)
    p.add_argument("--items", type=int, default=4098)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--supp-min", type=float, default=0.0001)
    p.add_argument("--conf-min", type=float, default=0.6)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=_cmd_bench)

    return parser, subparsers


def dispatch(argv: list[str]) -> int:
    parser, subparsers = _build_parser()
    try:
        config = _load_config(argv)
        if config:
            # subparsers parse into a fresh namespace, so defaults must be
            # replaced on every subparser, not just the root
            for sp in subparsers:
                valid = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in config.items() if k in valid})
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (FeatfileError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


# -- subcommand implementations ---------------------------------------------


def _cmd_synth(args) -> int:
    fields = {}
    if args.spec:
        raw = _load_config(["--config", args.spec])
        renames = {"images": "images_per_category", "patches": "patches_per_image",
                   "concepts": "concepts_per_category", "concept_items": "items_per_concept",
                   "noise": "noise_spread"}
        for key, value in raw.items():
            fields[renames.get(key, key)] = value
    overrides = {
        "dim": args.dim, "categories": args.categories,
        "images_per_category": args.images, "patches_per_image": args.patches,
        "concepts_per_category": args.concepts, "items_per_concept": args.concept_items,
        "noise_spread": args.noise, "noise_density": args.noise_density,
        "signal": args.signal,
        "p_plant": args.p_plant, "p_leak": args.p_leak, "seed": args.seed,
        "concept_seed": args.concept_seed,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    spec = SynthSpec(**fields)
    store, truth = generate_dataset(spec)
    _atomic_binary(args.out, lambda f: write_featfile(store, f))
    if args.truth:
        _atomic_text(args.truth, lambda f: write_ground_truth(truth, f))
    _info(f"synth: wrote {len(store)} records (dim {store.dim}) to {args.out}")
    return 0


def _mining_config(args) -> MiningConfig:
    _fraction_flag("supp-min", args.supp_min)
    _fraction_flag("conf-min", args.conf_min)
    if args.min_len < 1 or args.min_len > args.max_len:
        raise UsageError("need 1 <= min-len <= max-len")
    return MiningConfig(args.supp_min, args.conf_min, args.min_len, args.max_len)


def _cmd_mine(args) -> int:
    cfg = _mining_config(args)
    store = read_featfile(args.infile)
    db = build_database(store, args.k, args.target)
    t0 = time.perf_counter()
    patterns = mine_rules(db, cfg)
    _info(f"mine: {len(patterns)} patterns for category {args.target} "
          f"in {time.perf_counter() - t0:.2f}s")
    _emit_text(args.out, lambda f: write_patterns(patterns, f))
    return 0


def _cmd_retrieve(args) -> int:
    store = read_featfile(args.infile)
    patterns = read_patterns(args.patterns)
    db = build_database(store, args.k, args.target)
    index = elements_mod.build_inverted_index(db)
    found = [elements_mod.retrieve_element(p, index, db, store) for p in patterns]
    _info(f"retrieve: {len(found)} elements")
    _emit_text(args.out, lambda f: elements_mod.write_elements(found, f))
    return 0


def _cmd_select(args) -> int:
    if args.top_x < 1:
        raise UsageError("top-x must be >= 1")
    pool = elements_mod.read_elements(args.elements)
    chosen = elements_mod.select_top_patterns(pool, args.top_x)
    _info(f"select: kept {len(chosen)} of {len(pool)} elements")
    _emit_text(args.out, lambda f: elements_mod.write_elements(chosen, f))
    if args.patterns_out:
        _atomic_text(args.patterns_out,
                     lambda f: write_patterns([e.pattern for e in chosen], f))
    return 0


def _cmd_merge(args) -> int:
    store = read_featfile(args.infile)
    pool = elements_mod.read_elements(args.elements)
    background = [i for i, r in enumerate(store.records)
                  if r.class_label != args.target]
    if len(background) < 2:
        raise ValueError("need at least two background records for the statistics")
    stats = estimate_background(store.activations(background), args.shrinkage)
    merged, detectors = ensemble_merge(pool, store, stats, args.th)
    if args.top_x is not None:
        order = sorted(range(len(merged)),
                       key=lambda i: (-merged[i].coverage, i))[:args.top_x]
        merged = [merged[i] for i in order]
        detectors = [detectors[i] for i in order]
    _atomic_binary(args.detectors,
                   lambda f: write_detector_bank(detectors, store.dim, f))
    _info(f"merge: {len(pool)} elements -> {len(merged)} detectors")
    if args.merged:
        def dump(f):
            for m in merged:
                f.write(json.dumps({"members": list(m.members),
                                    "images": sorted(m.member_images),
                                    "sources": list(m.sources),
                                    "coverage": m.coverage}) + "\n")
        _atomic_text(args.merged, dump)
    return 0


def _group_by_image(store):
    groups: dict[int, list[int]] = defaultdict(list)
    for i, rec in enumerate(store.records):
        groups[rec.image_id].append(i)
    return dict(sorted(groups.items()))


def _image_dims(records, flag_w, flag_h) -> tuple[int, int]:
    if flag_w and flag_h:
        return flag_w, flag_h
    w = max(r.geometry.x + r.geometry.w for r in records)
    h = max(r.geometry.y + r.geometry.h for r in records)
    return (flag_w or w, flag_h or h)


def _image_label(records) -> int:
    labels = {r.class_label for r in records}
    if len(labels) > 1:
        raise ValueError("records of one image carry conflicting labels")
    return labels.pop()


def _cmd_encode_bop(args) -> int:
    store = read_featfile(args.infile)
    patterns = sorted(read_patterns(args.patterns),
                      key=lambda p: (p.category, len(p.items), p.items))
    rows = []
    for image_id, positions in _group_by_image(store).items():
        recs = [store.records[i] for i in positions]
        scales = {r.geometry.scale for r in recs}
        if len(scales) > 1:
            raise ValueError(
                f"image {image_id} mixes scales {sorted(scales)}; encode-bop "
                "expects single-scale dumps")
        w, h = _image_dims(recs, args.image_w, args.image_h)
        enc = encode_mod.encode_bop([(r.activation, r.geometry) for r in recs],
                                    patterns, w, h,
                                    normalize=not args.raw_counts)
        rows.append((image_id, _image_label(recs), enc.vector))
    dim = len(patterns) * encode_mod.DEFAULT_LAYOUT.cells
    _atomic_binary(args.out, lambda f: write_vector_file(dim, rows, f))
    _info(f"encode-bop: {len(rows)} images, {dim}-d encodings")
    return 0


def _cmd_encode_boe(args) -> int:
    store = read_featfile(args.infile)
    detectors = []
    dim = None
    for bank in args.detectors:
        bank_dim, dets = read_detector_bank(bank)
        if dim is None:
            dim = bank_dim
        elif bank_dim != dim:
            raise ValueError("detector banks disagree on dimension")
        detectors.extend(dets)
    if dim != store.dim:
        raise ValueError(f"detector dim {dim} does not match store dim {store.dim}")
    rows = []
    for image_id, positions in _group_by_image(store).items():
        recs = [store.records[i] for i in positions]
        by_scale: dict[float, list] = defaultdict(list)
        for r in recs:
            by_scale[r.geometry.scale].append(r)
        patch_sets, dims = [], []
        for scale in sorted(by_scale, reverse=True):
            group = by_scale[scale]
            patch_sets.append([(r.activation, r.geometry) for r in group])
            dims.append(_image_dims(group, args.image_w, args.image_h))
        enc = encode_mod.encode_boe(patch_sets, detectors, dims,
                                    categories=len(args.detectors))
        rows.append((image_id, _image_label(recs), enc.vector))
    out_dim = len(detectors) * encode_mod.DEFAULT_LAYOUT.cells
    _atomic_binary(args.out, lambda f: write_vector_file(out_dim, rows, f))
    _info(f"encode-boe: {len(rows)} images, {out_dim}-d encodings")
    return 0


def _cmd_train(args) -> int:
    try:
        grid = tuple(float(v) for v in str(args.reg_grid).split(",") if v)
    except ValueError:
        raise UsageError("reg-grid must be comma-separated numbers") from None
    if not grid or any(g <= 0 for g in grid):
        raise UsageError("reg-grid values must be positive")
    if args.folds < 2:
        raise UsageError("folds must be >= 2")
    _, rows = read_vector_file(args.encodings)
    x = np.stack([vec for _, _, vec in rows]).astype(np.float64)
    labels = [label for _, label, _ in rows]
    model = learn_mod.train_ovr(x, labels, grid, args.folds, args.seed)
    _atomic_text(args.out, lambda f: learn_mod.save_model(model, f))
    _info(f"train: {len(rows)} encodings, categories {list(model.categories)}, "
          f"regs {list(model.regs)}")
    return 0


def _cmd_eval(args) -> int:
    _, rows = read_vector_file(args.encodings)
    x = np.stack([vec for _, _, vec in rows]).astype(np.float64)
    labels = np.array([label for _, label, _ in rows])
    model = learn_mod.load_model(args.model)

    def report(f):
        if args.metric == "accuracy":
            acc = learn_mod.accuracy(model, x, labels)
            f.write(json.dumps({"metric": "accuracy", "value": acc}) + "\n")
        else:
            scores = np.stack([learn_mod.decision_scores(model, row) for row in x])
            mean_ap, per_cat = learn_mod.mean_average_precision(
                scores, labels, model.categories)
            for cat, ap in zip(model.categories, per_cat):
                f.write(json.dumps({"category": int(cat), "ap": ap}) + "\n")
            f.write(json.dumps({"metric": "mAP", "value": mean_ap}) + "\n")
    _emit_text(args.out, report)
    return 0


def _cmd_context(args) -> int:
    lines = Path(args.input).read_text().splitlines()
    results = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        detections, masks = [], []
        for img in obj["images"]:
            masks.append(read_maskfile(img["mask"]))
            detections.append([
                (PatchGeometry(int(x), int(y), int(w), int(h)), float(score))
                for x, y, w, h, score in img.get("detections", [])
            ])
        kind = element_firing_type(detections, masks, args.threshold)
        results.append((obj.get("element", len(results)), kind))

    def report(f):
        for element_id, kind in results:
            f.write(json.dumps({"element": element_id, "type": kind.value}) + "\n")
        f.write(json.dumps(firing_report([k for _, k in results])) + "\n")
    _emit_text(args.out, report)
    return 0


def bench_database(n_transactions: int, n_items: int, k: int, seed: int
                   ) -> TransactionDatabase:
    """Large mixed database: 10 planted 4-item concepts at 2% over uniform noise."""
    if n_items < k + 6:
        raise ValueError("item universe too small for the requested k")
    dim = n_items - 2
    rng = np.random.default_rng(seed)
    concepts = rng.permutation(dim)[:40].reshape(10, 4)
    concept_sets = [set(int(v) for v in row) for row in concepts]
    pos, neg = dim, dim + 1
    txs = []
    for i in range(n_transactions):
        is_pos = i % 2 == 0
        pool = rng.choice(dim, size=k + 4, replace=False)
        if is_pos and rng.random() < 0.02:
            cid = int(rng.integers(10))
            extra = [int(v) for v in pool if int(v) not in concept_sets[cid]][:k - 4]
            items = tuple(sorted(concept_sets[cid] | set(extra)))
        else:
            items = tuple(sorted(int(v) for v in pool[:k]))
        txs.append(Transaction(items, pos if is_pos else neg))
    return TransactionDatabase.from_transactions(dim, k, txs, target_category=0)


def _cmd_bench(args) -> int:
    cfg = _mining_config(args)
    _info(f"bench: generating {args.transactions} transactions over "
          f"{args.items} items (k={args.k})")
    t0 = time.perf_counter()
    db = bench_database(args.transactions, args.items, args.k, args.seed)
    gen_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    patterns = mine_rules(db, cfg)
    mine_s = time.perf_counter() - t0
    result = {"transactions": len(db.transactions), "items": args.items,
              "k": args.k, "supp_min": args.supp_min, "conf_min": args.conf_min,
              "generate_seconds": round(gen_s, 3), "mine_seconds": round(mine_s, 3),
              "patterns": len(patterns)}
    _emit_text(args.out, lambda f: f.write(json.dumps(result) + "\n"))
    return 0


if __name__ == "__main__":
    main()
