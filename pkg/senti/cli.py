"""senti command line: mask extraction, corpus generation, training, transfer,
evaluation and ANP filtering.

Exit codes: 0 success, 2 bad arguments or configuration, 3 file-system
failure, 4 data-format, shape or contract failure.
"""

from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Optional

import rich
import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn
from rich.table import Table
from typer import Option

from . import __version__
from .errors import ConfigError, ContractError, FormatError, SentiError
from .loggers import senti_logger
from .masks import MaskFusionConfig, extract_object_masks, filter_anp
from .masks.formats import read_caption_manifest, read_segmentation, write_object_masks
from .tensor import RngState
from .training import (
    SyntheticCorpusSpec,
    TrainConfig,
    TrainState,
    eval_alignment,
    eval_hue_shift,
    eval_polarity,
    generate_corpus,
    load_checkpoint,
    load_corpus,
    save_checkpoint,
    save_corpus,
    train,
)
from .transfer import ALIGNMENTS, TransferJob, TransferRequest, run_transfer
from .utilities import imageio
from .utilities.atomic import atomic_write

log = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4

main_app = typer.Typer(add_completion=False, help="Object-level image sentiment transfer.")
err_console = Console(stderr=True)


def _exit_code(error: Exception) -> int:
    if isinstance(error, ConfigError):
        return EXIT_USAGE
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_DATA


def guarded(func):
    """Report library and file-system errors on stderr and map them to exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (SentiError, OSError) as error:
            code = _exit_code(error)
            log.debug("command failed", exc_info=True)
            err_console.print(f"[red]error:[/red] {error}", highlight=False)
            raise typer.Exit(code) from None

    return wrapper


@main_app.callback()
def main_callback(
    verbose: bool = Option(False, "--verbose", "-v", help="Log debug messages to stderr."),
):
    senti_logger.configure_logging(verbose, log_file=senti_logger.LOG_FILE)


@main_app.command(name="extract-masks")
@guarded
def extract_masks(
    image: Path = Option(..., help="Image the captions and segmentation describe."),
    captions: Path = Option(..., help="Caption manifest: noun<TAB>attention-file per line."),
    seg: Path = Option(..., help="8-bit segmentation PNG, pixel value = class label."),
    alpha: float = Option(1.4, help="Fusion exponent on the attention sum."),
    out_dir: Path = Option(..., help="Directory receiving one <noun>.png mask per noun."),
) -> None:
    """Fuse caption attention with a segmentation map into object masks."""
    if not alpha > 0:
        raise typer.BadParameter("alpha must be positive", param_hint="--alpha")
    height, width = imageio.image_size(image)
    segmentation = read_segmentation(seg)
    if segmentation.shape != (height, width):
        raise FormatError(f"segmentation map is {segmentation.shape}, image is {(height, width)}")
    masks = extract_object_masks(read_caption_manifest(captions), segmentation, MaskFusionConfig(alpha))
    written = write_object_masks(out_dir, masks)

    table = Table("noun", "pixels", "mask")
    for (noun, mask), path in zip(masks.items(), written):
        table.add_row(noun, str(int(mask.sum())), str(path))
    rich.print(table)


@main_app.command(name="make-corpus")
@guarded
def make_corpus(
    out_dir: Path = Option(..., help="Directory receiving images, masks and corpus.tsv."),
    count: Optional[int] = Option(None, help="Number of images (default from the corpus config)."),
    seed: Optional[int] = Option(None, help="Random seed (default from the corpus config)."),
    image_size: Optional[int] = Option(None, help="Image side in pixels (default from the corpus config)."),
    config: Optional[Path] = Option(None, help="TOML file overriding corpus defaults."),
) -> None:
    """Generate the synthetic two-palette corpus."""
    spec = SyntheticCorpusSpec.load(config, count=count, seed=seed, image_size=image_size)
    manifest = save_corpus(generate_corpus(spec), out_dir)
    rich.print(f"[green]{spec.count} images[/green] written, manifest {manifest}")


@main_app.command(name="train")
@guarded
def train_command(
    corpus: Path = Option(..., help="Corpus manifest (or the directory holding corpus.tsv)."),
    out: Path = Option(..., help="Checkpoint file to write."),
    config: Optional[Path] = Option(None, help="TOML file overriding training defaults."),
    iters: Optional[int] = Option(None, help="Training steps (default from the config)."),
    seed: Optional[int] = Option(None, help="Random seed (default from the config)."),
    resume: Optional[Path] = Option(None, help="Checkpoint to continue training from."),
    log_every: Optional[int] = Option(None, help="Log a loss report every N steps."),
) -> None:
    """Train the networks on a corpus and write a checkpoint."""
    train_config = TrainConfig.load(config, iters=iters, seed=seed, log_every=log_every)
    samples = load_corpus(corpus)
    state = TrainState.from_checkpoint(load_checkpoint(resume)) if resume else None

    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeRemainingColumn(),
        console=err_console,
        transient=True,
    ) as progress:
        task = progress.add_task("training", total=train_config.iters)

        def on_step(iteration, report):
            progress.update(task, advance=1, description=f"g_m {report.g_m:.4f}")

        run = train(samples, train_config, state=state, on_step=on_step)

    save_checkpoint(run.state.to_checkpoint(), out)
    last = run.reports[-1]
    rich.print(
        f"trained to iteration [green]{run.state.iteration}[/green]: "
        f"total {last.total:.4f}, g_m {last.g_m:.4f}, checkpoint {out}"
    )


def _parse_float(text: str, what: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{where}: {what} '{text}' is not a number") from None


def read_jobs(path: Path, strength: float, align_t: float) -> list[TransferJob]:
    """Job file: "mask<TAB>reference<TAB>reference-mask[<TAB>strength[<TAB>align_t]]"."""
    base = path.parent
    jobs = []
    with open(path, "r", encoding="utf-8") as fp:
        lines = fp.read().splitlines()
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        where = f"{path}:{number}"
        fields = line.split("\t")
        if not 3 <= len(fields) <= 5:
            raise FormatError(f"{where}: expected 3 to 5 tab-separated fields, got {len(fields)}")
        mask, reference, reference_mask = (base / field.strip() for field in fields[:3])
        job_strength = _parse_float(fields[3], "strength", where) if len(fields) > 3 else strength
        job_align = _parse_float(fields[4], "align_t", where) if len(fields) > 4 else align_t
        try:
            jobs.append(
                TransferJob(
                    mask=imageio.read_mask(mask),
                    reference=imageio.read_image(reference),
                    reference_mask=imageio.read_mask(reference_mask),
                    strength=job_strength,
                    align_t=job_align,
                )
            )
        except ContractError as error:
            raise FormatError(f"{where}: {error}") from None
    return jobs


@main_app.command()
@guarded
def transfer(
    model: Path = Option(..., help="Trained checkpoint."),
    input: Path = Option(..., help="Input PNG image."),  # noqa: A002
    jobs: Path = Option(..., help="Job file, one object per line."),
    out: Path = Option(..., help="Output PNG image."),
    strength: float = Option(1.0, help="Blend strength for jobs that do not set one."),
    align_t: float = Option(1.0, help="Content alignment strength for jobs that do not set one."),
    alignment: str = Option("content", help=f"Alignment variant: {', '.join(ALIGNMENTS)}."),
    workers: int = Option(1, help="Threads running jobs concurrently."),
) -> None:
    """Transfer reference-object sentiment onto input objects, one job at a time."""
    for name, value in (("--strength", strength), ("--align-t", align_t)):
        if not 0.0 <= value <= 1.0:
            raise typer.BadParameter("must lie in [0, 1]", param_hint=name)
    if alignment not in ALIGNMENTS:
        raise typer.BadParameter(f"must be one of {', '.join(ALIGNMENTS)}", param_hint="--alignment")

    params = load_checkpoint(model).params
    request = TransferRequest(imageio.read_image(input), tuple(read_jobs(jobs, strength, align_t)), alignment)
    result = run_transfer(request, params, workers=workers)
    imageio.write_image(out, result.image)

    table = Table("job", "input hue", "reference hue", "output hue")
    for index, diagnostics in enumerate(result.diagnostics):
        table.add_row(
            str(index),
            f"{diagnostics.input_hue:.1f}",
            f"{diagnostics.reference_hue:.1f}",
            f"{diagnostics.output_hue:.1f}",
        )
    rich.print(table)


@main_app.command(name="eval")
@guarded
def evaluate(
    model: Path = Option(..., help="Trained checkpoint."),
    corpus: Path = Option(..., help="Corpus manifest (or the directory holding corpus.tsv)."),
    trials: int = Option(20, help="Transfers per measurement."),
    seed: int = Option(0, help="Random seed for picking objects."),
    config: Optional[Path] = Option(None, help="Corpus TOML file defining the palettes."),
) -> None:
    """Measure hue gap closure, palette hit rates and content alignment."""
    if trials < 1:
        raise typer.BadParameter("must be at least 1", param_hint="--trials")
    params = load_checkpoint(model).params
    samples = load_corpus(corpus)
    palettes = SyntheticCorpusSpec.load(config).palettes
    root = RngState(seed)

    ratio = eval_hue_shift(params, samples, trials, root.fork(0), palettes)
    polarity = eval_polarity(params, samples, trials, root.fork(1), palettes)
    alignment = eval_alignment(params, samples, trials, root.fork(2))

    table = Table("measure", "value")
    table.add_row("hue gap closure", f"{ratio:.3f}")
    for name, rate in polarity.rates.items():
        table.add_row(f"true-{name} rate", f"{rate:.3f}")
    table.add_row("average palette rate", f"{polarity.average:.3f}")
    table.add_row("content stats nearer reference", f"{alignment:.3f}")
    rich.print(table)


def _read_pairs(path: Path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fp:
        for number, line in enumerate(fp.read().splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition("\t")
            if not sep:
                raise FormatError(f"{path}:{number}: expected 'sample-id<TAB>value'")
            pairs.append((key.strip(), value.strip()))
    return pairs


@main_app.command(name="filter-anp")
@guarded
def filter_anp_command(
    anp_list: Path = Option(..., help="Lines of sample-id<TAB>adjective_noun."),
    caption_nouns: Path = Option(..., help="Lines of sample-id<TAB>noun1,noun2,..."),
    out: Optional[Path] = Option(None, help="Write retained lines here instead of stdout."),
) -> None:
    """Keep samples whose ANP noun appears among their caption nouns."""
    nouns = {key: [noun.strip() for noun in value.split(",") if noun.strip()] for key, value in _read_pairs(caption_nouns)}
    kept = []
    anps = _read_pairs(anp_list)
    for sample_id, anp in anps:
        _, sep, noun = anp.partition("_")
        if not sep:
            raise FormatError(f"{anp_list}: '{anp}' is not an adjective_noun pair")
        if filter_anp(noun, nouns.get(sample_id, [])):
            kept.append(f"{sample_id}\t{anp}\n")

    if out is None:
        typer.echo("".join(kept), nl=False)
    else:
        with atomic_write(out, "w") as fp:
            fp.writelines(kept)
    err_console.print(f"kept {len(kept)} of {len(anps)} samples")


@main_app.command()
def version() -> None:
    """Print the package version."""
    rich.print(f"senti [green]{__version__}[/green]")


def main():
    main_app(prog_name="senti")
