"""
Command-line entry point: ``dla <command> ...`` or ``python -m dla_toolkit``.

Exit codes: 0 success, 1 usage error, 2 data error. Every run prints the
resolved configuration to stderr before doing any work.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import click

from dla_toolkit.baselines.lines import baseline_to_polygon, polygon_to_baseline
from dla_toolkit.config import ToolkitConfig, load_config
from dla_toolkit.errors import DataError, DegenerateBaseline, EmptyInput, EmptyMask
from dla_toolkit.geometry.debug import save_pgm
from dla_toolkit.log import log_event, setup_logging
from dla_toolkit.metrics.evaluate import build_class_order, evaluate_corpus, page_label_map
from dla_toolkit.metrics.report import build_report, render_json, render_text
from dla_toolkit.page.models import Page, TextLine
from dla_toolkit.page.pagexml import list_page_files, read_page_file, write_page_file
from dla_toolkit.page.stats import DATASET_CLASSES, max_objects_per_page, split_stats
from dla_toolkit.pipeline.post_process import post_process
from dla_toolkit.pipeline.schemas import PageHeader
from dla_toolkit.pipeline.synth import SynthSpec, generate_corpus
from dla_toolkit.proposals.detections_io import read_detections, write_detections
from dla_toolkit.proposals.nms import roi_count

logger = logging.getLogger(__name__)

DirPath = click.Path(exists=True, file_okay=False, path_type=Path)
FilePath = click.Path(exists=True, dir_okay=False, path_type=Path)


class RunContext:
    def __init__(self, config_path: Optional[Path], jobs: int):
        self.config_path = config_path
        self.jobs = jobs

    def resolve(self, **overrides) -> ToolkitConfig:
        config = load_config(self.config_path, overrides=overrides)
        click.echo("# resolved configuration", err=True)
        for line in config.as_lines() + [f"jobs = {self.jobs}"]:
            click.echo(line, err=True)
        return config

    def map(self, fn: Callable, items: Sequence) -> List:
        """Apply ``fn`` to every item, results in input order"""
        if self.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                return list(executor.map(fn, items))
        return [fn(item) for item in items]


def _tolerance(ctx, param, value):
    if value is None or value == "auto":
        return value
    try:
        tolerance = float(value)
    except ValueError:
        raise click.BadParameter("expected 'auto' or a number of pixels")
    if tolerance < 0:
        raise click.BadParameter("must not be negative")
    return tolerance


def _class_list(text: Optional[str]) -> List[str]:
    return [label.strip() for label in (text or "").split(",") if label.strip()]


@click.group()
@click.option("--config", "config_path", type=FilePath, help="flat 'key = value' configuration file")
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1), help="pages processed in parallel")
@click.pass_context
def cli(ctx, config_path, log_level, jobs):
    """Document layout analysis toolkit"""
    setup_logging(log_level)
    ctx.obj = RunContext(config_path, jobs)


@cli.command("eval")
@click.argument("gt_dir", type=DirPath)
@click.argument("hyp_dir", type=DirPath)
@click.option("--format", "fmt", default="text", show_default=True, type=click.Choice(["text", "json"]))
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path), help="write the report here")
@click.option("--dataset", type=click.Choice(sorted(DATASET_CLASSES)), help="use a dataset's class order")
@click.option("--classes", help="comma-separated class order")
@click.option("--tolerance", callback=_tolerance, help="'auto' or pixels")
@click.option("--step", type=click.FloatRange(min=0, min_open=True), help="baseline sampling step")
@click.option("--skip-absent-classes", is_flag=True, help="leave classes absent from gt and hyp out of mIoU")
@click.option("--exclude-background", is_flag=True, help="leave the background class out of mIoU and f.w.IoU")
@click.option("--debug-dir", type=click.Path(file_okay=False, path_type=Path), help="dump label maps as PGM")
@click.pass_obj
def eval_command(run: RunContext, gt_dir, hyp_dir, fmt, output, dataset, classes, tolerance, step,
                 skip_absent_classes, exclude_background, debug_dir):
    """Score the PAGE files of HYP_DIR against same-named files in GT_DIR"""
    config = run.resolve(
        tolerance=tolerance,
        step=step,
        skip_absent_classes=True if skip_absent_classes else None,
        include_background=False if exclude_background else None,
    )
    gt_files = list_page_files(gt_dir)
    if not gt_files:
        raise EmptyInput(f"no PAGE files in {gt_dir}")

    def _load(path: Path):
        gt = read_page_file(path)
        hyp_path = hyp_dir / path.name
        if hyp_path.exists():
            hyp = read_page_file(hyp_path)
        else:
            log_event(logger, "hypothesis_missing", logging.WARNING, page=path.stem)
            hyp = Page(image_filename=gt.image_filename, width=gt.width, height=gt.height)
        return path.stem, gt, hyp

    pairs = run.map(_load, gt_files)
    labels = {region.class_label for _, gt, hyp in pairs for page in (gt, hyp) for region in page.regions}
    preferred = DATASET_CLASSES[dataset] if dataset else _class_list(classes)
    class_order = build_class_order(labels, preferred)

    result = evaluate_corpus(pairs, class_order, config.evaluation, jobs=run.jobs)
    report = build_report(result, class_order, config.evaluation)
    text = render_json(report) if fmt == "json" else render_text(report)
    if output:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)

    if debug_dir:
        debug_dir.mkdir(parents=True, exist_ok=True)
        for page_id, gt, hyp in pairs:
            save_pgm(page_label_map(gt, class_order), debug_dir / f"{page_id}_gt.pgm")
            save_pgm(page_label_map(hyp, class_order), debug_dir / f"{page_id}_hyp.pgm")


@cli.command("post-process")
@click.argument("detections_file", type=FilePath)
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--nms-threshold", type=click.FloatRange(0, 1))
@click.option("--roi-cap", type=click.IntRange(min=1))
@click.option("--n-train-max", type=click.IntRange(min=0), help="most objects on any training page")
@click.option("--score-threshold", type=click.FloatRange(0, 1))
@click.option("--textline-label", help="class label of text-line detections")
@click.option("--insertion-iou", type=click.Choice(["mask", "box"]))
@click.pass_obj
def post_process_command(run: RunContext, detections_file, out_dir, nms_threshold, roi_cap, n_train_max,
                         score_threshold, textline_label, insertion_iou):
    """Turn a detections file into one PAGE file per page"""
    config = run.resolve(nms_threshold=nms_threshold, roi_cap=roi_cap, n_train_max=n_train_max,
                         score_threshold=score_threshold, textline_label=textline_label,
                         insertion_iou=insertion_iou)
    headers, detections = read_detections(detections_file)
    out_dir.mkdir(parents=True, exist_ok=True)

    def _one(header: PageHeader) -> Path:
        page = post_process(detections[header.page_id], config.pipeline, (header.width, header.height),
                            header.page_id, header.image_filename)
        return write_page_file(page, out_dir / f"{header.page_id}.xml")

    written = run.map(_one, [headers[page_id] for page_id in sorted(headers)])
    click.echo(f"wrote {len(written)} PAGE file(s) to {out_dir}")


def _read_split(directory: Path) -> List[Page]:
    files = list_page_files(directory)
    if not files:
        raise EmptyInput(f"no PAGE files in {directory}")
    return [read_page_file(path) for path in files]


@cli.command("stats")
@click.argument("page_dirs", nargs=-1, type=DirPath)
@click.option("--split", "splits", multiple=True, metavar="NAME=DIR", help="named split, repeatable")
@click.option("--dataset", type=click.Choice(sorted(DATASET_CLASSES)), help="order rows like a dataset")
@click.option("--format", "fmt", default="text", show_default=True, type=click.Choice(["text", "csv"]))
@click.pass_obj
def stats_command(run: RunContext, page_dirs, splits, dataset, fmt):
    """Region and text-line counts per class, one column per split"""
    run.resolve()
    named: Dict[str, Path] = {path.name: path for path in page_dirs}
    for item in splits:
        name, sep, directory = item.partition("=")
        if not sep or not name or not Path(directory).is_dir():
            raise click.BadParameter(f"expected NAME=DIR with an existing DIR, got {item!r}", param_hint="--split")
        named[name] = Path(directory)
    if not named:
        raise click.UsageError("give at least one PAGE directory or --split")

    pages = dict(zip(named, run.map(_read_split, list(named.values()))))
    frame = split_stats(pages, DATASET_CLASSES.get(dataset, ()))
    click.echo(frame.to_csv() if fmt == "csv" else frame.to_string())
    for name, split_pages in pages.items():
        n = max_objects_per_page(split_pages)
        click.echo(f"{name}: max_objects_per_page = {n}, rois = {roi_count(n)}")


@cli.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--pages", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--regions", default=4, show_default=True, type=click.IntRange(min=0))
@click.option("--lines", default=3, show_default=True, type=click.IntRange(min=0))
@click.option("--classes", default="paragraph,marginalia", show_default=True, help="comma-separated labels")
@click.option("--jitter", default=0.0, show_default=True, type=click.FloatRange(min=0))
@click.option("--fp", "false_positives", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--fn", "false_negatives", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--width", default=600, show_default=True, type=click.IntRange(min=1))
@click.option("--height", default=800, show_default=True, type=click.IntRange(min=1))
@click.pass_obj
def synth_command(run: RunContext, out_dir, seed, pages, regions, lines, classes, jitter,
                  false_positives, false_negatives, width, height):
    """Write ground-truth PAGE files and a matching detections file"""
    config = run.resolve()
    labels = _class_list(classes)
    if not labels:
        raise click.BadParameter("needs at least one class label", param_hint="--classes")
    spec = SynthSpec(
        n_regions=regions, lines_per_region=lines, class_labels=tuple(labels), jitter=jitter,
        false_positives=false_positives, false_negatives=false_negatives, width=width, height=height,
        textline_label=config.pipeline.textline_label, line_geometry=config.pipeline.line_geometry,
    )
    try:
        corpus = generate_corpus(seed, pages, spec)
    except ValueError as e:
        raise click.UsageError(str(e))

    headers, detections = [], []
    for page, page_detections in corpus:
        page_id = Path(page.image_filename).stem
        write_page_file(page, out_dir / "gt" / f"{page_id}.xml")
        headers.append(PageHeader(page_id=page_id, width=page.width, height=page.height,
                                  image_filename=page.image_filename))
        detections.extend(page_detections)
    write_detections(out_dir / "detections.tsv", headers, detections)
    click.echo(f"wrote {len(corpus)} page(s) to {out_dir}")


def _convert_lines(page: Page, convert: Callable[[TextLine], TextLine]) -> Page:
    regions = tuple(region.model_copy(update={"lines": tuple(map(convert, region.lines))}) for region in page.regions)
    return page.model_copy(update={"regions": regions, "orphan_lines": tuple(map(convert, page.orphan_lines))})


@cli.command("lines")
@click.argument("mode", type=click.Choice(["to-polygons", "to-baselines"]))
@click.argument("page_file", type=FilePath)
@click.argument("output", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--offset-above", type=click.FloatRange(min=0, min_open=True))
@click.option("--offset-below", type=click.FloatRange(min=0, min_open=True))
@click.pass_obj
def lines_command(run: RunContext, mode, page_file, output, offset_above, offset_below):
    """Rebuild text-line polygons from baselines, or baselines from polygons"""
    config = run.resolve(offset_above=offset_above, offset_below=offset_below)
    geometry = config.pipeline.line_geometry
    page = read_page_file(page_file, line_geometry=geometry)

    def _to_polygon(line: TextLine) -> TextLine:
        if line.baseline is None:
            return line
        try:
            return line.model_copy(update={"polygon": baseline_to_polygon(line.baseline, geometry)})
        except DegenerateBaseline as e:
            log_event(logger, "line_unchanged", logging.WARNING, line=line.id, reason=str(e))
            return line

    def _to_baseline(line: TextLine) -> TextLine:
        try:
            baseline = polygon_to_baseline(line.polygon, geometry, page.dims)
        except EmptyMask as e:
            log_event(logger, "line_unchanged", logging.WARNING, line=line.id, reason=str(e))
            return line
        return line.model_copy(update={"baseline": baseline})

    converted = _convert_lines(page, _to_polygon if mode == "to-polygons" else _to_baseline)
    write_page_file(converted, output)
    click.echo(f"{mode}: {converted.line_count} line(s) written to {output}")


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="dla", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except (DataError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    return 0
