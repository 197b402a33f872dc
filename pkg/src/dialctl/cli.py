"""Command-line interface: training, the evaluation protocols with their
reports, an interactive chat, and the teaching service."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from .engine.corpus import corpus_stats, load_corpus
from .nn import init_model, load_checkpoint, save_checkpoint
from .phone.domain import AddressBook, PhoneDomain, default_address_book, default_corpus
from .usersim import SimParams


def _load_domain_corpus(corpus_path: str | None, book_path: str | None):
    book = AddressBook.from_json(book_path) if book_path else default_address_book()
    domain = PhoneDomain(book)
    corpus = load_corpus(corpus_path) if corpus_path else default_corpus()
    return domain, corpus


def _sim_from_options(overrides: dict[str, float | None]) -> SimParams:
    params = SimParams()
    values = {k: v for k, v in overrides.items() if v is not None}
    return SimParams.from_dict({**params.as_dict(), **values})


def sim_options(fn):
    for name in reversed(list(SimParams().as_dict())):
        fn = click.option(f"--{name.replace('_', '-')}", name, type=float, default=None,
                          help=f"simulator {name}")(fn)
    return fn


@click.group()
def main():
    """Trainable dialog control: supervised imitation, policy-gradient RL,
    and a teaching service."""


@main.command("train-sl")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--arch", type=click.Choice(["dnn", "rnn", "lstm"]), default="lstm")
@click.option("--hidden", type=int, default=32)
@click.option("--seed", type=int, default=0)
@click.option("--max-epochs", type=int, default=2000)
@click.option("--out", type=click.Path(), required=True, help="checkpoint file to write")
def train_sl_cmd(corpus_path, book_path, arch, hidden, seed, max_epochs, out):
    """Train to corpus reconstruction and write a checkpoint."""
    from .sl import train_sl

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    model = init_model(arch, domain.layout.dim, hidden, domain.layout.n_actions, seed)
    started = time.time()
    result = train_sl(model, domain, corpus, max_epochs=max_epochs)
    save_checkpoint(result.params, out)
    stats = corpus_stats(corpus)
    click.echo(
        f"trained {arch} on {stats['dialogs']} dialogs: "
        f"reconstructed={result.reconstructed} epochs={result.epochs} "
        f"time={time.time() - started:.1f}s -> {out}"
    )
    if not result.reconstructed:
        sys.exit(1)


@main.command("eval-loo")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--sizes", default="1,2,5,10,20", show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--arch", type=click.Choice(["dnn", "rnn", "lstm"]), default="lstm")
@click.option("--hidden", type=int, default=32)
@click.option("--out", type=click.Path(), required=True, help="output directory")
def eval_loo_cmd(corpus_path, book_path, sizes, seed, arch, hidden, out):
    """Leave-one-out accuracy vs training-set size (CSV + figure)."""
    from .report import format_loo_table, write_loo
    from .sl import loo_eval

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    result = loo_eval(
        domain, corpus, sizes=tuple(int(s) for s in sizes.split(",")),
        seed=seed, arch=arch, hidden=hidden,
    )
    paths = write_loo(result, out)
    click.echo(format_loo_table(result))
    click.echo(f"wrote {paths['csv']} and {paths['figure']}")


@main.command("compare-arch")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--sizes", default="1,10,21", show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--hidden", type=int, default=32)
@click.option("--out", type=click.Path(), required=True)
def compare_arch_cmd(corpus_path, book_path, sizes, seed, hidden, out):
    """Can DNN / RNN / LSTM reproduce the training set? (CSV + table)."""
    from .report import format_compare_table, write_compare
    from .sl import compare_architectures

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    table = compare_architectures(
        domain, corpus, sizes=tuple(int(s) for s in sizes.split(",")),
        seed=seed, hidden=hidden,
    )
    paths = write_compare(table, out)
    click.echo(format_compare_table(table))
    click.echo(f"wrote {paths['csv']}")


@main.command("roc")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--repeats", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--arch", type=click.Choice(["dnn", "rnn", "lstm"]), default="lstm")
@click.option("--hidden", type=int, default=32)
@click.option("--out", type=click.Path(), required=True)
def roc_cmd(corpus_path, book_path, repeats, seed, arch, hidden, out):
    """Score-vs-correctness ROC over repeated train/test splits."""
    from .report import write_roc
    from .sl import roc_data

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    result = roc_data(domain, corpus, n_repeats=repeats, seed=seed, arch=arch, hidden=hidden)
    paths = write_roc(result, out)
    click.echo(
        f"AUC={result.auc:.3f} over {result.n_correct} correct / "
        f"{result.n_incorrect} incorrect actions; "
        f"{result.low20_incorrect_frac:.0%} of the 20 lowest-scored actions are incorrect"
    )
    click.echo(f"wrote {paths['scores']}, {paths['points']}, {paths['figure']}")


@main.command("run-rl")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--n-sl", default="0,1,2,5,10", show_default=True,
              help="comma-separated SL pretraining sizes")
@click.option("--n-rl-dialogs", type=int, default=2000, show_default=True)
@click.option("--runs", type=int, default=10, show_default=True)
@click.option("--eval-every", type=int, default=10, show_default=True,
              help="RL updates between frozen-policy evaluations")
@click.option("--eval-dialogs", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--arch", type=click.Choice(["dnn", "rnn", "lstm"]), default="lstm")
@click.option("--hidden", type=int, default=32)
@click.option("--alpha", type=float, default=1.0)
@click.option("--max-turns", type=int, default=11, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@sim_options
def run_rl_cmd(corpus_path, book_path, n_sl, n_rl_dialogs, runs, eval_every,
               eval_dialogs, seed, arch, hidden, alpha, max_turns, out, **sim_overrides):
    """Policy-gradient optimization curves per SL pretraining size."""
    from .report import format_rl_table, write_rl
    from .rl import rl_experiment

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    sim = _sim_from_options(sim_overrides)
    results = []
    for n in (int(s) for s in n_sl.split(",")):
        click.echo(f"n_sl={n} ...", err=True)
        results.append(
            rl_experiment(
                domain, corpus, sim, n_sl=n, n_rl_dialogs=n_rl_dialogs, n_runs=runs,
                eval_every=eval_every, eval_dialogs=eval_dialogs, seed=seed,
                arch=arch, hidden=hidden, alpha=alpha, max_turns=max_turns,
            )
        )
    paths = write_rl(results, out)
    click.echo(format_rl_table(results))
    click.echo(f"wrote {paths['csv']}, {paths['mean_figure']}, {paths['std_figure']}")


@main.command("chat")
@click.option("--checkpoint", type=click.Path(exists=True), default=None,
              help="model checkpoint; default: train fresh on the corpus")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
def chat_cmd(checkpoint, corpus_path, book_path, seed):
    """Interactive dialog with the trained policy on stdin/stdout."""
    from .engine.core import DialogEngine
    from .sl import train_sl

    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    if checkpoint:
        model = load_checkpoint(checkpoint)
    else:
        click.echo("training on the corpus ...", err=True)
        model = train_sl(
            init_model("lstm", domain.layout.dim, 32, domain.layout.n_actions, seed),
            domain, corpus,
        ).params
    engine = DialogEngine(domain, model, mode="greedy", rng=np.random.default_rng(seed))
    for action in engine.start():
        click.echo(f"bot> {action.rendered or action.template.name}")
    while not engine.closed:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        for action in engine.run_turn(text):
            click.echo(f"bot> {action.rendered or '[' + action.template.name + ']'}")
    click.echo("(dialog ended)")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve_cmd(config_path, host, port):
    """Run the teaching service (HTTP API plus optional static UI)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(config_path)
    if host:
        config.host = host
    if port:
        config.port = port
    app = create_app(config)
    click.echo(f"serving on http://{config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


@main.command("corpus-stats")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--address-book", "book_path", type=click.Path(exists=True), default=None)
def corpus_stats_cmd(corpus_path, book_path):
    """Corpus summary: dialog count, turn statistics, template usage."""
    domain, corpus = _load_domain_corpus(corpus_path, book_path)
    stats = corpus_stats(corpus)
    used = {t.action for d in corpus for t in d.turns if t.speaker == "S"}
    click.echo(
        f"dialogs={stats['dialogs']} mean_turns={stats['mean_turns']:.1f} "
        f"min={stats['min_turns']} max={stats['max_turns']} templates_used={len(used)}"
    )


if __name__ == "__main__":
    main()
