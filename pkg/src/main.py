import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from src.config import RunConfig, dump_config, load_config, merge_overrides, parse_override
from src.exceptions import (
    CanonicalizationError,
    ConfigurationError,
    MgmLabException,
    ModelException,
    NumericalException,
)
from src.repositories import (
    CensusRepository,
    ProbeReportRepository,
    VocabularyRepository,
    atomic_write_text,
    load_checkpoint,
    render_balance,
    render_bn_ablation,
    render_comparison,
    render_sweep,
    render_vocabulary_size,
)
from src.schemas.molgraph.models import MolGraph
from src.schemas.tokenize.models import AtomVocabulary
from src.services.analyze import (
    bn_ablation,
    compare_tokenizers,
    distribution_balance,
    mask_ratio_sweep,
    probe_fg,
    probe_masked_atoms,
    sgt_vocabulary_size,
    subtree_census,
)
from src.services.fragment import load_patterns, make_fragmenter
from src.services.molgraph import load_graph_file, make_batch, write_graph_file
from src.services.molgraph.smiles import SmilesParser
from src.services.nets import make_autoencoder, make_autoencoder_config, run_pipeline_suite
from src.services.pretrain import make_target_tokenizer, model_from_checkpoint, train
from src.services.sgt import embedding_snapshot, make_sgt_config, sgt_tokenize
from src.services.tensorcore import raise_on_failure, run_op_suite
from src.services.tokenize import build_atom_vocab, build_motif_vocab, canonical_key, frozen_gnn_vectors, tok_motif, tok_node
from src.services.tokenize.frozen_gnn import load_frozen_tokenizer

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "resolved.cfg"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as configuration errors (exit code 1)."""

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def exit_code(error: BaseException) -> int:
    if isinstance(error, NumericalException):
        return EXIT_NUMERICAL
    if isinstance(error, (ConfigurationError, ModelException)):
        return EXIT_USAGE
    return EXIT_DATA


def _floats(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def _corpus(args: argparse.Namespace, settings: RunConfig) -> List[MolGraph]:
    return load_graph_file(args.input, SmilesParser(max_nodes=settings.molgraph.max_nodes))


def _embedding(
    args: argparse.Namespace, settings: RunConfig, corpus: Sequence[MolGraph]
) -> Tuple[Dict[int, np.ndarray], AtomVocabulary]:
    """Embedding rows from ``--checkpoint`` or, without one, from a freshly initialized encoder."""
    if getattr(args, "checkpoint", None):
        checkpoint = load_checkpoint(args.checkpoint)
        _, params = model_from_checkpoint(checkpoint)
        atom_vocab = AtomVocabulary(atomic_numbers=checkpoint.meta.atom_vocab)
    else:
        atom_vocab = build_atom_vocab(corpus)
        cfg = make_autoencoder_config(atom_vocab, settings.sgt.layers * settings.encoder.model_dim, settings)
        params = make_autoencoder(cfg, settings.seed)
    return embedding_snapshot(params["encoder.embed"].value, atom_vocab), atom_vocab


def cmd_parse(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    write_graph_file(_corpus(args, settings), out_dir / "graphs.txt")
    return EXIT_OK


def cmd_fragment(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    fragmenter = make_fragmenter(settings.fragment, args.recipe)
    lines = ["molecule\tkind\tnodes\tedges\tlabel\tkey"]
    for number, graph in enumerate(_corpus(args, settings)):
        for fragment in fragmenter.fragment(graph):
            try:
                key = canonical_key(fragment, graph, settings.tokenizer.max_canonical_nodes)
            except CanonicalizationError:
                key = "-"
            nodes = ",".join(map(str, fragment.sorted_nodes))
            edges = ",".join(map(str, sorted(fragment.edge_ids)))
            lines.append(f"{number}\t{fragment.kind.value}\t{nodes}\t{edges}\t{fragment.label or '-'}\t{key}")
    path = atomic_write_text(out_dir / "fragments.tsv", "\n".join(lines) + "\n")
    logger.info(f"Wrote {len(lines) - 1} fragments to {path}")
    return EXIT_OK


def cmd_tokenize(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    corpus = _corpus(args, settings)
    kind = settings.tokenizer.kind
    lines: List[str] = []
    if kind == "node":
        atom_vocab = build_atom_vocab(corpus)
        for number, graph in enumerate(corpus):
            lines.append(f"{number}\t{' '.join(str(token.id) for token in tok_node(graph, atom_vocab))}")
    elif kind == "motif":
        fragmenter = make_fragmenter(settings.fragment)
        if args.vocab:
            path = Path(args.vocab)
            vocab = VocabularyRepository(path.parent).load(path.name)
        else:
            vocab = build_motif_vocab(
                corpus, fragmenter, settings.tokenizer.vocab_threshold, settings.tokenizer.max_canonical_nodes, settings.threads
            )
        for number, graph in enumerate(corpus):
            tokens = tok_motif(graph, fragmenter, vocab, settings.tokenizer.max_canonical_nodes)
            lines.append(f"{number}\t{' '.join(str(token.id) for token in tokens)}")
    elif kind == "sgt":
        embedding, _ = _embedding(args, settings, corpus)
        batch = make_batch(corpus)
        values = sgt_tokenize(batch.graph, embedding, make_sgt_config(settings.encoder.model_dim, settings.sgt)).values
        for number in range(batch.num_graphs):
            for node, row in enumerate(batch.node_range(number)):
                lines.append(f"{number}\t{node}\t{_floats(values[row])}")
    else:
        if not settings.tokenizer.frozen_checkpoint:
            raise ConfigurationError("tokenizer.kind = frozen_gnn needs tokenizer.frozen_checkpoint")
        tokenizer = load_frozen_tokenizer(settings.tokenizer.frozen_checkpoint)
        for number, graph in enumerate(corpus):
            for node, row in enumerate(frozen_gnn_vectors(graph, tokenizer)):
                lines.append(f"{number}\t{node}\t{_floats(row)}")
    path = atomic_write_text(out_dir / f"tokens_{kind}.tsv", "\n".join(lines) + ("\n" if lines else ""))
    logger.info(f"Wrote {kind} tokens of {len(corpus)} molecules to {path}")
    return EXIT_OK


def cmd_vocab(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    corpus = _corpus(args, settings)
    vocab = build_motif_vocab(
        corpus,
        make_fragmenter(settings.fragment),
        settings.tokenizer.vocab_threshold,
        settings.tokenizer.max_canonical_nodes,
        settings.threads,
    )
    VocabularyRepository(out_dir).save(vocab, "vocab.txt")
    return EXIT_OK


def cmd_census(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    corpus = _corpus(args, settings)
    report = subtree_census(corpus, settings.threads)
    CensusRepository(out_dir).save(report, "census")
    balance = [distribution_balance(report.atoms, "atom"), distribution_balance(report.subtrees, "subtree")]
    atomic_write_text(out_dir / "balance.csv", render_balance(balance))
    if args.sgt and corpus:
        embedding, _ = _embedding(args, settings, corpus)
        sgt_cfg = make_sgt_config(settings.encoder.model_dim, settings.sgt)
        atomic_write_text(out_dir / "sgt_vocabulary.txt", render_vocabulary_size(sgt_vocabulary_size(corpus, embedding, sgt_cfg)))
        atomic_write_text(out_dir / "bn_ablation.csv", render_bn_ablation(bn_ablation(corpus, embedding, sgt_cfg)))
    print(f"{report.subtree_types} subtree types, {report.atom_types} atom types over {report.num_nodes} nodes")
    return EXIT_OK


def cmd_pretrain(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    corpus = _corpus(args, settings)
    atom_vocab = build_atom_vocab(corpus)
    tokenizer = make_target_tokenizer(corpus, atom_vocab, settings, args.vocab)
    result = train(corpus, settings, atom_vocab, tokenizer, out_dir)
    if result.metrics:
        print(f"final epoch {result.metrics[-1].epoch}: mean loss {result.metrics[-1].mean_loss!r}")
    return EXIT_OK


def cmd_probe(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    corpus = _corpus(args, settings)
    reports = ProbeReportRepository(out_dir)
    patterns = load_patterns(settings.fragment.pattern_file, settings.fragment.max_pattern_atoms)
    if args.compare:
        entries = compare_tokenizers(corpus, settings, patterns)
        for entry in entries:
            reports.save(entry.fg_probe, f"probe_fg_{entry.tokenizer}.txt")
        atomic_write_text(out_dir / "comparison.csv", render_comparison(entries))
        return EXIT_OK

    if not args.checkpoint:
        raise ConfigurationError("probe needs --checkpoint (or --compare)")
    checkpoint = load_checkpoint(args.checkpoint)
    if args.task in ("masked_atom", "all"):
        report = probe_masked_atoms(checkpoint, corpus, settings=settings, source=args.checkpoint)
        reports.save(report, "probe_masked_atoms.txt")
        print(f"masked-atom accuracy {report.metric:.4f} (baseline {report.baseline:.4f})")
    if args.task in ("fg", "all"):
        report = probe_fg(checkpoint, corpus, patterns, settings, source=args.checkpoint)
        reports.save(report, "probe_fg.txt")
        print(f"FG macro ROC-AUC {report.metric:.4f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    try:
        ratios = [float(value) for value in args.ratios.split(",")]
    except ValueError as e:
        raise ConfigurationError(f"--ratios must be comma-separated numbers, got {args.ratios!r}") from e
    report = mask_ratio_sweep(_corpus(args, settings), settings, ratios)
    atomic_write_text(out_dir / "sweep.csv", render_sweep(report))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace, settings: RunConfig, out_dir: Path) -> int:
    results = run_op_suite(settings.seed, args.instances) + run_pipeline_suite(settings.seed)
    lines = ["name,instances,max_relative_error,tolerance,passed"]
    lines.extend(f"{r.name},{r.instances},{r.max_relative_error!r},{r.tolerance!r},{str(r.passed).lower()}" for r in results)
    atomic_write_text(out_dir / "gradcheck.csv", "\n".join(lines) + "\n")
    raise_on_failure(results)
    print(f"{len(results)} gradient checks passed")
    return EXIT_OK


Command = Callable[[argparse.Namespace, RunConfig, Path], int]


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", help="Sectioned key = value config file")
    common.add_argument("--seed", type=int, help="Run seed (overrides the config and MGMLAB_SEED)")
    common.add_argument("--out", help="Output directory (default: run.out_dir)")
    common.add_argument("--threads", type=int, help="Worker threads for corpus-level counting")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="Config override")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = CliParser(prog="mgmlab", description="Masked graph modeling on molecular graphs")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    def add(name: str, handler: Command, help_text: str, corpus: bool = True) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help_text)
        if corpus:
            sub.add_argument("input", help="SMILES-lines corpus or structured graph file")
        sub.set_defaults(handler=handler)
        return sub

    add("parse", cmd_parse, "Convert a corpus to the structured graph format")
    add("fragment", cmd_fragment, "List the fragments of every molecule").add_argument("--recipe", help="Recipe override")
    tokenize = add("tokenize", cmd_tokenize, "Emit the configured tokenizer's tokens")
    tokenize.add_argument("--vocab", help="Motif vocabulary file")
    tokenize.add_argument("--checkpoint", help="Checkpoint whose embedding feeds the SGT")
    add("vocab", cmd_vocab, "Build a motif vocabulary file")
    census = add("census", cmd_census, "One-hop subtree and atom distributions")
    census.add_argument("--sgt", action="store_true", help="Also report the SGT vocabulary size and the BN ablation")
    census.add_argument("--checkpoint", help="Checkpoint whose embedding feeds the SGT")
    add("pretrain", cmd_pretrain, "Run masked graph modeling").add_argument("--vocab", help="Motif vocabulary file")
    probe = add("probe", cmd_probe, "Linear probes on a frozen encoder")
    probe.add_argument("--checkpoint", help="Checkpoint to probe")
    probe.add_argument("--task", choices=("masked_atom", "fg", "all"), default="all")
    probe.add_argument("--compare", action="store_true", help="Pretrain node and SGT tokenizers and probe both")
    add("sweep", cmd_sweep, "Mask-ratio sweep").add_argument("--ratios", default="0.25,0.3,0.35,0.4,0.45")
    add("gradcheck", cmd_gradcheck, "Finite-difference gradient suite", corpus=False).add_argument(
        "--instances", type=int, default=30, help="Random instances per op"
    )
    return parser


def resolve_settings(args: argparse.Namespace) -> RunConfig:
    flags: Dict[str, Any] = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.threads is not None:
        flags["threads"] = args.threads
    if args.out is not None:
        flags["out_dir"] = args.out
    overrides = merge_overrides(*(parse_override(assignment) for assignment in args.set), flags)
    return load_config(Path(args.config) if args.config else None, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``mgmlab`` command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        settings = resolve_settings(args)
        out_dir = Path(settings.out_dir)
        atomic_write_text(out_dir / RESOLVED_CONFIG, dump_config(settings))
        return args.handler(args, settings, out_dir)
    except MgmLabException as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
