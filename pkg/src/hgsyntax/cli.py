"""Command-line entry point: generate, train, eval, analyze, repro."""

from __future__ import annotations

import itertools
import logging
from pathlib import Path

import click

from . import corpus as corpus_mod
from .core import CONSTRAINT_NAMES, InputPattern, WordOrder, hg_winner, ot_winner, ranking_from_weights
from .evaluation import (
    ProtocolConfig,
    evaluate,
    ganging_analysis,
    mean_std,
    render_hg_tableau,
    render_ot_tableau,
    run_protocol,
    scan_ganging,
)
from .inference import (
    DEFAULT_NOISE_VARIANCE,
    DEFAULT_SAMPLES,
    IncompatibleRegimeError,
    PredictionRegime,
    distributions_csv,
)
from .learners import (
    GlaConfig,
    MaxEntConfig,
    ModelFormatError,
    ModelKind,
    PerceptronConfig,
    PredictionMode,
    cd_train,
    dumps_model,
    gla_train,
    loads_model,
    maxent_train,
    normalized_ranking_values,
    perceptron_train,
)

log = logging.getLogger("hgsyntax")


class _EchoHandler(logging.Handler):
    """Log records go to whatever stderr click is using right now."""

    def emit(self, record: logging.LogRecord) -> None:
        click.echo(self.format(record), err=True)


def _setup_logging() -> None:
    if not any(isinstance(h, _EchoHandler) for h in log.handlers):
        handler = _EchoHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
        log.propagate = False


def _fail(message: str) -> None:
    raise click.ClickException(message.splitlines()[0])


def _emit(text: str, output: str | None) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(output).write_text(text, encoding="utf-8")
        except OSError as exc:
            _fail(f"cannot write {output}: {exc.strerror}")


def _read_corpus(path: str) -> corpus_mod.Corpus:
    try:
        return corpus_mod.read_corpus(path)
    except corpus_mod.CorpusFormatError as exc:
        _fail(f"{path}: {exc}")
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror}")


def _read_model(path: str):
    try:
        return loads_model(Path(path).read_text(encoding="utf-8"))
    except ModelFormatError as exc:
        _fail(f"{path}: {exc}")
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror}")


def _parse_pattern(text: str) -> InputPattern:
    try:
        return InputPattern.parse(text)
    except ValueError as exc:
        _fail(str(exc))


@click.group()
def main() -> None:
    """Word-order grammars learned from discourse-annotated sentences."""
    _setup_logging()


@main.command()
@click.option("--table2", "source", flag_value="table2", default=True, help="Regenerate the full count table.")
@click.option("--resample", type=click.IntRange(min=1), default=None,
              help="Draw N sentences from the count table instead.")
@click.option("--seed", type=int, default=0, show_default=True, help="Shuffle / resampling seed.")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
def generate(source: str, resample: int | None, seed: int, output: str | None) -> None:
    """Write a corpus in the sentence file format."""
    counts = corpus_mod.table2_counts()
    if resample is not None:
        corpus = corpus_mod.resample_corpus(counts, resample, seed)
    else:
        corpus = corpus_mod.generate_corpus(counts, seed)
    _emit(corpus_mod.dumps(corpus, header=False), output)
    log.info("wrote %d sentences (%s)", len(corpus), corpus.provenance)


LEARNERS = ("perceptron", "gla", "cd", "maxent")


@main.command()
@click.argument("learner", type=click.Choice(LEARNERS))
@click.option("--train", "train_path", required=True, type=click.Path(dir_okay=False), help="Training corpus.")
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@click.option("--seed", type=int, default=0, show_default=True, help="Initialisation / noise seed.")
@click.option("--epochs", type=click.IntRange(min=1), default=None,
              help="Passes over the corpus (perceptron 10, gla 50; cd uses --max-epochs).")
@click.option("--learning-rate", type=float, default=PerceptronConfig.learning_rate, show_default=True)
@click.option("--lambda-trick-rate", type=float, default=PerceptronConfig.lambda_trick_rate, show_default=True)
@click.option("--init-low", type=float, default=PerceptronConfig.init_range[0], show_default=True)
@click.option("--init-high", type=float, default=PerceptronConfig.init_range[1], show_default=True)
@click.option("--normalization/--no-normalization", default=True, show_default=True)
@click.option("--reshuffle-seed", type=int, default=None, help="Reshuffle the corpus every epoch.")
@click.option("--plasticity", type=float, default=GlaConfig.plasticity, show_default=True)
@click.option("--spreading", type=float, default=GlaConfig.spreading, show_default=True)
@click.option("--train-prediction", type=click.Choice(["ML", "SOT"]), default="SOT", show_default=True)
@click.option("--max-epochs", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--max-iterations", type=click.IntRange(min=1), default=MaxEntConfig.max_iterations, show_default=True)
@click.option("--gradient-tolerance", type=float, default=MaxEntConfig.gradient_tolerance, show_default=True)
@click.option("--l2-penalty", type=float, default=MaxEntConfig.l2_penalty, show_default=True)
@click.option("--curve", type=click.Path(dir_okay=False), default=None,
              help="Write per-epoch training accuracy as CSV.")
def train(learner: str, train_path: str, output: str, seed: int, epochs: int | None, learning_rate: float,
          lambda_trick_rate: float, init_low: float, init_high: float, normalization: bool,
          reshuffle_seed: int | None, plasticity: float, spreading: float, train_prediction: str,
          max_epochs: int, max_iterations: int, gradient_tolerance: float, l2_penalty: float,
          curve: str | None) -> None:
    """Fit LEARNER to a corpus and write a model file."""
    corpus = _read_corpus(train_path)
    try:
        if learner == "perceptron":
            model = perceptron_train(corpus, PerceptronConfig(
                epochs=epochs or 10, learning_rate=learning_rate, lambda_trick_rate=lambda_trick_rate,
                init_seed=seed, init_range=(init_low, init_high), use_normalization=normalization,
                reshuffle_seed=reshuffle_seed))
        elif learner == "gla":
            model = gla_train(corpus, GlaConfig(
                plasticity=plasticity, spreading=spreading, epochs=epochs or 50,
                train_prediction=PredictionMode(train_prediction), init_seed=seed, reshuffle_seed=reshuffle_seed))
        elif learner == "cd":
            model, report = cd_train(corpus, max_epochs)
            if report.converged:
                log.info("constraint demotion %s", report.summary())
        else:
            model = maxent_train(corpus, MaxEntConfig(max_iterations, gradient_tolerance, l2_penalty))
            log.info("maxent: %d iterations, max |gradient| %.3g", model.metadata["iterations"],
                     model.metadata["gradient_max_norm"])
    except ValueError as exc:
        _fail(str(exc))
    history = model.metadata.get("epoch_accuracy") or []
    for i, acc in enumerate(history, start=1):
        log.info("epoch %d training accuracy %.4f", i, acc)
    if model.kind is ModelKind.OT_STRATA:
        history = [1.0 - m / len(corpus) for m in model.metadata["epoch_mistakes"]]
    if curve is not None:
        _emit("epoch,training_accuracy\n" + "".join(f"{i},{a:.6f}\n" for i, a in enumerate(history, 1)), curve)
    if model.kind is ModelKind.SOT:
        summed, unit = normalized_ranking_values(model.weights, model.metadata["spreading"])
        for j in ranking_from_weights(model.weights):
            log.info("%-4s value %.4f  sum-to-100 %.4f  spreading-normalised %.4f",
                     CONSTRAINT_NAMES[j], model.weights[j], summed[j], unit[j])
    _emit(dumps_model(model), output)


REGIMES = [r.value for r in PredictionRegime]


@main.command(name="eval")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(dir_okay=False))
@click.option("--regime", type=click.Choice(REGIMES), default=None, help="Prediction regime (model default).")
@click.option("--baselines", is_flag=True, help="Add always-SVO and modal upper-bound rows.")
@click.option("--train", "train_path", type=click.Path(dir_okay=False), default=None,
              help="Corpus the upper bound is fitted on (default: the test corpus).")
@click.option("--distributions", is_flag=True, help="Also report count-weighted KL divergence.")
@click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_SAMPLES, show_default=True)
@click.option("--noise-variance", type=click.FloatRange(min=0), default=DEFAULT_NOISE_VARIANCE, show_default=True,
              help="Variance (not standard deviation) of noisy-HG perturbations.")
@click.option("--spreading", type=click.FloatRange(min=0), default=None, help="SOT noise scale (model default).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", type=click.Path(dir_okay=False), default=None,
              help="Machine-readable report; .jsonl gives JSON lines, anything else CSV.")
@click.option("--distributions-csv", "dist_path", type=click.Path(dir_okay=False), default=None)
def eval_(model_path: str, test_path: str, regime: str | None, baselines: bool, train_path: str | None,
          distributions: bool, samples: int, noise_variance: float, spreading: float | None, seed: int,
          report: str | None, dist_path: str | None) -> None:
    """Score a model on a test corpus."""
    model = _read_model(model_path)
    test = _read_corpus(test_path)
    base = (_read_corpus(train_path) if train_path else test) if baselines else None
    if distributions and model.kind is ModelKind.OT_STRATA:
        _fail("distributions need a weighted model, not OT-strata")
    try:
        result = evaluate(model, test, PredictionRegime(regime) if regime else None, distributions=distributions,
                          samples=samples, rng_seed=seed, noise_variance=noise_variance, spreading=spreading,
                          baselines_from=base)
    except (IncompatibleRegimeError, ValueError) as exc:
        _fail(str(exc))
    click.echo(result.to_text(), nl=False)
    if report is not None:
        _emit(result.to_json_lines() if report.endswith(".jsonl") else result.to_csv(), report)
    if dist_path is not None:
        from .inference import predict_all_distributions, sampling_regime

        dists = predict_all_distributions(model, sampling_regime(model), samples, seed,
                                          noise_variance=noise_variance, spreading=spreading)
        _emit(distributions_csv(dists), dist_path)


def _parse_orders(text: str) -> tuple[WordOrder, WordOrder]:
    try:
        orders = tuple(WordOrder.parse(t) for t in text.split(","))
    except ValueError as exc:
        _fail(str(exc))
    if len(orders) != 2:
        _fail("--candidates takes two orders, e.g. SOV,SVO")
    return orders  # type: ignore[return-value]


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--pattern", default=None, help="Input pattern such as t,f,t.")
@click.option("--candidates", "pair", default=None, help="Two orders to compare, e.g. SOV,SVO.")
@click.option("--scan", is_flag=True, help="List every pattern whose OT and HG winners differ.")
def analyze(model_path: str, pattern: str | None, pair: str | None, scan: bool) -> None:
    """Tableaux and ganging-up verdicts for one input or all of them."""
    model = _read_model(model_path)
    if model.kind is ModelKind.OT_STRATA:
        _fail("analyze needs a weighted model")
    w = model.weights
    if scan:
        events = scan_ganging(w)
        if not events:
            click.echo("no pattern has differing OT and HG winners")
        for r in events:
            click.echo(f"{r.input.label}: {r.verdict()}")
        return
    if pattern is None:
        _fail("give --pattern or --scan")
    p = _parse_pattern(pattern)
    ranking = ranking_from_weights(w)
    click.echo(render_ot_tableau(ranking, p))
    click.echo(render_hg_tableau(w, p))
    ot, hg = ot_winner(ranking, p), hg_winner(w, p)
    click.echo(f"OT winner {ot.name}; HG winner {hg.name}")
    if pair is not None:
        pairs = [_parse_orders(pair)]
    else:
        pairs = list(itertools.combinations(WordOrder, 2))
    events = [ganging_analysis(w, p, a, b) for a, b in pairs]
    for r in events:
        if r.ganging_event or pair is not None:
            click.echo(r.verdict())
    if not any(r.ganging_event for r in events):
        click.echo("no ganging-up event")


_REPRO_ROWS = [
    ("always-SVO baseline", "baseline"),
    ("modal upper bound", "upper_bound"),
    ("perceptron (HG-ML)", "perceptron"),
    ("GLA (SOT train, ML test)", "gla"),
    ("MaxEnt (argmax)", "maxent"),
    ("GLA ML train / ML test", "gla_ml_train_ml_test"),
    ("GLA ML train / SOT test", "gla_ml_train_sot_test"),
    ("GLA SOT train / ML test", "gla_sot_train_ml_test"),
    ("GLA SOT train / SOT test", "gla_sot_train_sot_test"),
    ("KL perceptron (noisy HG)", "kl_perceptron"),
    ("KL GLA (SOT sample)", "kl_gla"),
    ("KL MaxEnt (analytic)", "kl_maxent"),
    ("KL uniform", "kl_uniform"),
]


@main.command()
@click.option("--seeds", type=click.IntRange(min=1), default=10, show_default=True, help="Number of seed sets.")
@click.option("--base-seed", type=int, default=0, show_default=True)
@click.option("--test-size", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=DEFAULT_SAMPLES, show_default=True)
@click.option("--noise-variance", type=click.FloatRange(min=0), default=DEFAULT_NOISE_VARIANCE, show_default=True)
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Per-seed metrics as CSV.")
def repro(seeds: int, base_seed: int, test_size: int, samples: int, noise_variance: float,
          output: str | None) -> None:
    """Run the full accuracy and variation protocol over several seeds."""
    config = ProtocolConfig(test_size=test_size, samples=samples, noise_variance=noise_variance)
    results = []
    for s in range(base_seed, base_seed + seeds):
        results.append(run_protocol(s, config))
        log.info("seed %d done", s)
    click.echo(f"seeds {base_seed}..{base_seed + seeds - 1}; test sets are {test_size}-sentence resamples "
               f"of the count table (seed + 1000); KL smoothing add-eps 1/(2*{samples})")
    click.echo(f"{'measure':<28}{'mean':>10}{'std':>10}")
    for label, key in _REPRO_ROWS:
        mean, std = mean_std([r.metrics[key] for r in results])
        scale, unit = (1, "") if key.startswith("kl_") else (100, "%")
        click.echo(f"{label:<28}{mean * scale:>9.2f}{unit or ' '}{std * scale:>9.2f}{unit or ' '}")
    ordered = sum(r.metrics["kl_maxent"] < r.metrics["kl_perceptron"] < r.metrics["kl_gla"] for r in results)
    click.echo(f"KL ordering MaxEnt < perceptron < GLA in {ordered} of {seeds} seed sets")
    if output is not None:
        keys = [k for _, k in _REPRO_ROWS]
        lines = ["seed," + ",".join(keys)]
        lines += [f"{r.seed}," + ",".join(f"{r.metrics[k]:.6f}" for k in keys) for r in results]
        _emit("\n".join(lines) + "\n", output)


if __name__ == "__main__":  # pragma: no cover
    main()
