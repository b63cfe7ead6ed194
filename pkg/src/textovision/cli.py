"""Command-line surface: build-vocab, train, encode, rank, pool, evaluate.

Exit codes: 0 success, 1 usage error, 2 data error. The environment
variable ``TEXTOVISION_THREADS`` caps internal parallelism; it is applied
before numpy loads, so heavyweight imports stay inside the command
handlers.
"""

from __future__ import annotations

import argparse
import os
import sys

_DEFAULT_METRICS = "r@1,r@5,r@10,medr,meanr,mir,map"


class UsageError(Exception):
    """Bad flag combination detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _apply_thread_cap() -> None:
    value = os.environ.get("TEXTOVISION_THREADS")
    if value:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
            "VECLIB_MAXIMUM_THREADS",
        ):
            os.environ.setdefault(var, value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textovision")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="write a word or trigram listing")
    p.add_argument("--sentences", required=True)
    p.add_argument("--vectorizer", choices=["bow", "hashing"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="fit the sentence-to-visual-feature network")
    p.add_argument("--sentences", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--val-sentences", required=True)
    p.add_argument("--val-features", required=True)
    p.add_argument("--vectorizer", choices=["bow", "hashing", "word2vec"], default="bow")
    p.add_argument("--embeddings", help="word2vec text file (required with --vectorizer word2vec)")
    p.add_argument("--layers", default="1000", help="comma-separated hidden sizes")
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", help="explicit sentence-to-item pairs file")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--history", help="history TSV path (default: <out>.history.tsv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="predict visual features for sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("rank", help="rank candidate items for each query")
    p.add_argument("--queries", required=True, help="feature file of query vectors")
    p.add_argument("--items", required=True, help="feature file of candidate vectors")
    p.add_argument("--top", type=int, help="keep only the best K entries per query")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("pool", help="mean-pool frame features per video")
    p.add_argument("--features", required=True, help="frame feature file, ids '<video>#<n>'")
    p.add_argument("--audio", help="per-video audio feature file to concatenate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("evaluate", help="score a ranking file against ground truth")
    p.add_argument("--rankings", required=True)
    p.add_argument("--ground-truth", required=True, help="TSV of '<query_id>\\t<item_id>'")
    p.add_argument("--metrics", default=_DEFAULT_METRICS)
    p.add_argument("--out", help="also write the TSV report line to this path")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"textovision: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"textovision: error: {exc}", file=sys.stderr)
        return 2


def cmd_build_vocab(args) -> int:
    from . import formats, textvec

    sentences = formats.read_sentences(args.sentences)
    if args.vectorizer == "bow":
        entries = textvec.build_vocab(sentences).words
    else:
        entries = textvec.build_trigram_index(sentences).trigrams
    formats.write_word_list(args.out, entries)
    print(len(entries))
    return 0


def _parse_hidden_sizes(text: str) -> list[int]:
    sizes = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            size = int(token)
        except ValueError:
            raise UsageError(f"--layers expects comma-separated integers, got {token!r}") from None
        if size < 1:
            raise UsageError("--layers sizes must be positive")
        sizes.append(size)
    return sizes


def _pair_sentences(sentences, features, pairs_path):
    """Match each sentence to its item's feature row.

    The item is looked up in the explicit pairs file if given, otherwise
    derived from the '<item_id>#<n>' sentence id convention.
    """
    from . import formats

    pair_map = dict(formats.read_pairs(pairs_path)) if pairs_path else None
    by_id = {f.item_id: f for f in features}
    matched = []
    for sentence in sentences:
        if pair_map is not None:
            item = pair_map.get(sentence.id)
            if item is None:
                raise ValueError(f"sentence {sentence.id!r} is missing from the pairs file")
        else:
            item = formats.item_of_sentence_id(sentence.id)
        feature = by_id.get(item)
        if feature is None:
            raise ValueError(f"sentence {sentence.id!r}: item {item!r} has no feature row")
        matched.append((sentence, feature.values))
    return matched


def cmd_train(args) -> int:
    from . import formats, modelio, neuralnet, textvec

    if args.vectorizer == "word2vec" and not args.embeddings:
        raise UsageError("--vectorizer word2vec requires --embeddings")

    train_sentences = formats.read_sentences(args.sentences)
    train_features = formats.read_features(args.features)
    val_sentences = formats.read_sentences(args.val_sentences)
    val_features = formats.read_features(args.val_features)

    if args.vectorizer == "bow":
        backend = textvec.build_vocab(train_sentences)
    elif args.vectorizer == "hashing":
        backend = textvec.build_trigram_index(train_sentences)
    else:
        backend = textvec.load_embeddings(args.embeddings)
    in_dim = textvec.backend_dim(args.vectorizer, backend)

    out_dim = train_features[0].values.shape[0]
    if val_features[0].values.shape[0] != out_dim:
        raise ValueError(
            f"validation feature dim {val_features[0].values.shape[0]} "
            f"does not match training dim {out_dim}"
        )

    def to_pairs(sentences, features):
        return [
            neuralnet.TrainingPair(textvec.vectorize(s, args.vectorizer, backend), values)
            for s, values in _pair_sentences(sentences, features, args.pairs)
        ]

    net_cfg = neuralnet.NetworkConfig(
        layer_sizes=[in_dim, *_parse_hidden_sizes(args.layers), out_dim],
        dropout_rate=args.dropout,
    )
    opt_cfg = neuralnet.OptimizerConfig(
        learning_rate=args.lr,
        gamma=args.gamma,
        epsilon=args.epsilon,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
    )
    result = neuralnet.train(to_pairs(train_sentences, train_features),
                             to_pairs(val_sentences, val_features),
                             net_cfg, opt_cfg)

    modelio.save_model(args.out, modelio.TrainedModel(args.vectorizer, backend, result.params))
    formats.write_history(args.history or args.out + ".history.tsv", result.history)
    print(
        f"trained {len(result.history)} epochs; "
        f"best epoch {result.best_epoch} with validation loss {result.best_val_loss!r}"
    )
    return 0


def cmd_encode(args) -> int:
    from . import formats, modelio, neuralnet, retrieval, textvec

    model = modelio.load_model(args.model)
    sentences = formats.read_sentences(args.sentences)

    rows = []
    skipped = 0
    for sentence in sentences:
        try:
            sv = textvec.vectorize(sentence, model.kind, model.backend)
        except ValueError as exc:
            print(f"textovision: skipping {sentence.id!r}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        rows.append(retrieval.VisualFeature(sentence.id, neuralnet.encode(model.params, sv)))

    if not rows:
        raise ValueError("no sentence could be encoded")
    formats.write_features(args.out, rows)
    print(f"encoded {len(rows)} sentences, skipped {skipped}", file=sys.stderr)
    return 0


def cmd_rank(args) -> int:
    from . import formats, retrieval

    queries = formats.read_features(args.queries)
    items = formats.read_features(args.items)
    if queries[0].values.shape[0] != items[0].values.shape[0]:
        raise ValueError(
            f"query dim {queries[0].values.shape[0]} does not match "
            f"item dim {items[0].values.shape[0]}"
        )
    if args.top is not None and args.top < 1:
        raise UsageError("--top must be >= 1")
    rankings = retrieval.rank_all(queries, items)
    formats.write_ranking(args.out, rankings, top=args.top)
    return 0


def cmd_pool(args) -> int:
    from . import formats, videofeat

    frame_rows = formats.read_features(args.features)
    pooled = [videofeat.mean_pool(group) for group in videofeat.group_frames(frame_rows)]

    if args.audio:
        audio_by_id = {f.item_id: f for f in formats.read_features(args.audio)}
        combined = []
        for feature in pooled:
            audio = audio_by_id.get(feature.item_id)
            if audio is None:
                raise ValueError(f"video {feature.item_id!r} has no audio feature row")
            combined.append(
                videofeat.concat_visual_audio(
                    feature, videofeat.AudioFeature(audio.item_id, audio.values)
                )
            )
        pooled = combined

    formats.write_features(args.out, pooled)
    return 0


def _parse_metric_names(text: str) -> list[str]:
    names = [token.strip() for token in text.split(",") if token.strip()]
    if not names:
        raise UsageError("--metrics lists no metric")
    for name in names:
        if name in ("medr", "meanr", "mir", "map"):
            continue
        if name.startswith("r@") and name[2:].isdigit() and int(name[2:]) >= 1:
            continue
        raise UsageError(f"unknown metric name {name!r}")
    return names


def cmd_evaluate(args) -> int:
    from . import formats, metrics

    names = _parse_metric_names(args.metrics)
    rankings = formats.read_ranking(args.rankings)
    truth = metrics.GroundTruth.from_pairs(formats.read_pairs(args.ground_truth))

    ranks = [metrics.first_relevant_rank(r, truth) for r in rankings]
    values = []
    for name in names:
        if name.startswith("r@"):
            values.append(metrics.recall_at_k(ranks, int(name[2:])))
        elif name == "medr":
            values.append(metrics.median_rank(ranks))
        elif name == "meanr":
            values.append(metrics.mean_rank(ranks))
        elif name == "mir":
            values.append(metrics.mean_inverted_rank(ranks))
        else:
            values.append(metrics.mean_average_precision(rankings, truth))

    tsv_line = "\t".join(f"{n}\t{v!r}" for n, v in zip(names, values))
    print(tsv_line)
    width = max(len(n) for n in names)
    for name, value in zip(names, values):
        print(f"{name:<{width}}  {value:.6f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(tsv_line + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
