"""Command-line pipeline: phantoms -> preprocess -> split -> train -> attack -> report/visualize.

Every command resolves a RunConfig (defaults <- --config file <- --set flags),
stamps artifacts with the config hash and seed, and writes into one workspace
directory. Stage order is enforced through artifact presence; a stage refuses
to overwrite its outputs unless --force is given.
"""

from __future__ import annotations

import contextlib
import csv
import os
import shutil
from pathlib import Path

import click
import numpy as np
import torch

from . import cnn as cnn_mod
from . import evaluation, gan, interpret
from .config import RunConfig, config_hash, config_lines, load_run_config
from .dataset import (
    DatasetIndex,
    ImageRecord,
    Side,
    Split,
    StageLabel,
    load_manifest,
    save_manifest,
    split_patient_aware,
)
from .errors import KoasynthError, MissingArtifactError
from .gan.training import Direction
from .phantoms import build_phantom_index
from .pngio import read_png, write_png, write_png_rgb
from .preprocess import preprocess_pipeline

ATTACK_DIRECTIONS = {
    StageLabel.NONE_DOUBTFUL: (Direction.TOWARD_FUTURE,),
    StageLabel.MODERATE_SEVERE: (Direction.TOWARD_PAST,),
    StageLabel.MILD: (Direction.TOWARD_FUTURE, Direction.TOWARD_PAST),
}


class Workspace:
    def __init__(self, root: Path, cfg: RunConfig):
        self.root = root
        self.cfg = cfg
        self.hash = config_hash(cfg)

    def stamp_lines(self) -> list[str]:
        return [f"config_hash={self.hash}", f"seed={self.cfg.seed}"]

    def stamp_dict(self) -> dict[str, str]:
        return {"config_hash": self.hash, "seed": str(self.cfg.seed)}

    def ensure_root(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        stored = self.root / "config.txt"
        body = "\n".join([f"# config_hash={self.hash}"] + config_lines(self.cfg)) + "\n"
        if stored.exists():
            if stored.read_text(encoding="utf-8") != body:
                raise KoasynthError(
                    f"workspace {self.root} was created with a different config "
                    f"(see {stored}); use a fresh --out or matching config"
                )
        else:
            stored.write_text(body, encoding="utf-8")

    def stage_dir(self, name: str, force: bool) -> Path:
        path = self.root / name
        if path.exists():
            if not force:
                raise KoasynthError(f"stage output {path} already exists; pass --force to overwrite")
            shutil.rmtree(path)
        path.mkdir(parents=True)
        return path

    def require(self, relative: str, producer: str) -> Path:
        path = self.root / relative
        if not path.exists():
            raise MissingArtifactError(f"missing artifact {path}; run `{producer}` first")
        return path

    @contextlib.contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise KoasynthError(
                f"workspace {self.root} is locked by another command (remove {lock_path} if stale)"
            )
        try:
            os.close(fd)
            yield
        finally:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(lock_path)


def _stamped_csv(path: Path, stamp: list[str], header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in stamp:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_stamp_hash(path: Path) -> str | None:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# config_hash="):
                return line.strip().split("config_hash=", 1)[1].split()[0]
            if not line.startswith("#"):
                break
    return None


def _check_same_hash(paths: list[Path], expected: str) -> None:
    for path in paths:
        found = _read_stamp_hash(path)
        if found is not None and found != expected:
            raise KoasynthError(
                f"mixed-config inputs: {path} carries config_hash {found}, expected {expected}"
            )


pass_workspace = click.make_pass_decorator(Workspace)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Key-value config file; flags override file values.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config entry (dotted keys, e.g. gan.epochs=5).")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
@click.option("--out", type=click.Path(file_okay=False), default="runs/default",
              show_default=True, help="Workspace directory for artifacts.")
@click.pass_context
def main(ctx, config_path, overrides, seed, out):
    """Temporal-state synthesis pipeline for staged knee radiographs."""
    kv = {}
    for item in overrides:
        if "=" not in item:
            raise click.UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        kv[key.strip()] = value.strip()
    if seed is not None:
        kv["seed"] = str(seed)
    try:
        cfg = load_run_config(config_path, kv)
    except (ValueError, AttributeError) as exc:
        raise click.UsageError(f"bad configuration: {exc}")
    ctx.obj = Workspace(Path(out), cfg)


def _run_stage(ws: Workspace, name: str, force: bool, body) -> None:
    ws.ensure_root()
    with ws.lock():
        torch.manual_seed(ws.cfg.seed)
        stage = ws.stage_dir(name, force)
        try:
            body(stage)
        except BaseException:
            shutil.rmtree(stage, ignore_errors=True)  # never leave partial outputs
            raise


def _cli_guard(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (KoasynthError, ValueError, OSError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def phantoms(ws: Workspace, force):
    """Generate the labeled phantom corpus (PNG files plus manifest)."""

    def body(stage: Path):
        cfg = ws.cfg
        index = build_phantom_index(
            per_class=cfg.phantom_per_class,
            base_seed=cfg.seed,
            noise_sigma=cfg.phantom_noise_sigma,
            image_size=cfg.phantom_image_size,
        )
        for rec in index.records:
            write_png(stage / rec.path, rec.pixels, text=ws.stamp_dict())
        save_manifest(stage / "manifest.csv", index.records,
                      header_comment=f"config_hash={ws.hash} seed={cfg.seed}")
        counts = {s.display: n for s, n in index.counts_by_stage.items()}
        click.echo(f"phantoms: {len(index.records)} records {counts} -> {stage}")

    _run_stage(ws, "phantoms", force, body)


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@click.option("--assert-real-counts", is_flag=True,
              help="Require the manifest to match the published grouped stage totals.")
@pass_workspace
@_cli_guard
def preprocess(ws: Workspace, force, assert_real_counts):
    """Standardize laterality, invert negatives, equalize contrast."""

    def body(stage: Path):
        manifest = ws.cfg.manifest or ws.require("phantoms/manifest.csv", "phantoms")
        index = load_manifest(manifest)
        if assert_real_counts and not index.matches_real_corpus():
            raise KoasynthError(
                f"manifest stage counts {index.counts_by_stage} do not match the published totals"
            )
        provenance_rows = []
        out_records = []
        for rec in index.records:
            result = preprocess_pipeline(rec, tau=ws.cfg.negative_tau)
            name = Path(rec.path).name
            write_png(stage / name, result.pixels, text=ws.stamp_dict())
            provenance_rows.append(
                [name, int(result.flipped), int(result.inverted), int(result.constant_warning)]
            )
            out_records.append(
                ImageRecord(path=name, patient_id=rec.patient_id, side=Side.LEFT, kl_grade=rec.kl_grade)
            )
        save_manifest(stage / "manifest.csv", out_records,
                      header_comment=f"config_hash={ws.hash} seed={ws.cfg.seed}")
        _stamped_csv(stage / "provenance.csv", ws.stamp_lines(),
                     ["path", "flipped", "inverted", "constant_warning"], provenance_rows)
        click.echo(f"preprocess: {len(out_records)} images -> {stage}")

    _run_stage(ws, "preprocess", force, body)


def _write_split_manifest(path: Path, records: list[ImageRecord], ws: Workspace) -> None:
    # Manifests carry basenames only, so artifacts stay byte-identical across workspaces.
    relative = [
        ImageRecord(path=Path(r.path).name, patient_id=r.patient_id, side=r.side, kl_grade=r.kl_grade)
        for r in records
    ]
    save_manifest(path, relative, header_comment=f"config_hash={ws.hash} seed={ws.cfg.seed}")


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def split(ws: Workspace, force):
    """Patient-aware 70/15/15 split, plus the 90/10 translation-domain split."""

    def body(stage: Path):
        manifest = ws.require("preprocess/manifest.csv", "preprocess")
        index = load_manifest(manifest)
        parts = split_patient_aware(index, ws.cfg.fractions, ws.cfg.seed)
        for name, records in (("train", parts.train), ("validation", parts.validation), ("test", parts.test)):
            _write_split_manifest(stage / f"{name}.csv", records, ws)

        # Translation domains: end-stage images that the shared test split never sees.
        pool = DatasetIndex.from_records(parts.train + parts.validation)
        vf = ws.cfg.gan_val_fraction
        for domain, stage_label in (("x", StageLabel.NONE_DOUBTFUL), ("y", StageLabel.MODERATE_SEVERE)):
            domain_records = pool.by_stage(stage_label)
            if ws.cfg.gan_domain_size:
                if len(domain_records) < ws.cfg.gan_domain_size:
                    raise KoasynthError(
                        f"domain {domain} holds {len(domain_records)} records, "
                        f"fewer than gan_domain_size={ws.cfg.gan_domain_size}"
                    )
                domain_records = domain_records[: ws.cfg.gan_domain_size]
            domain_split = split_patient_aware(
                DatasetIndex.from_records(domain_records), (1.0 - vf, vf, 0.0), ws.cfg.seed + 1
            )
            _write_split_manifest(stage / f"gan_train_{domain}.csv", domain_split.train, ws)
            _write_split_manifest(stage / f"gan_val_{domain}.csv", domain_split.validation, ws)
        click.echo(
            f"split: train/val/test = {len(parts.train)}/{len(parts.validation)}/{len(parts.test)} -> {stage}"
        )

    _run_stage(ws, "split", force, body)


def _load_split_records(ws: Workspace, name: str) -> list[ImageRecord]:
    path = ws.require(f"split/{name}.csv", "split")
    _check_same_hash([path], ws.hash)
    index = load_manifest(path)
    base = ws.root / "preprocess"
    for rec in index.records:
        rec.path = str(base / Path(rec.path).name)
    return index.records


def _records_to_tensor(records: list[ImageRecord]) -> torch.Tensor:
    return gan.to_model_range(np.stack([r.pixels for r in records]))


@main.command("train-gan")
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def train_gan(ws: Workspace, force):
    """Train the cycle-consistent generator pair and select the best epoch."""

    def body(stage: Path):
        cfg = ws.cfg.gan
        train_x = _records_to_tensor(_load_split_records(ws, "gan_train_x"))
        train_y = _records_to_tensor(_load_split_records(ws, "gan_train_y"))
        val_x = _records_to_tensor(_load_split_records(ws, "gan_val_x"))
        val_y = _records_to_tensor(_load_split_records(ws, "gan_val_y"))
        click.echo(
            f"train-gan: domains X={len(train_x)}+{len(val_x)} Y={len(train_y)}+{len(val_y)}"
        )
        state = gan.new_train_state(cfg, seed=ws.cfg.seed)
        ckpt_dir = stage / "checkpoints"
        ckpt_dir.mkdir()

        def checkpoint_fn(epoch: int, st):
            gan.save_checkpoint(ckpt_dir / f"epoch_{epoch:04d}.pt", st, cfg, meta=ws.stamp_dict())

        def log_fn(entry):
            click.echo(
                f"  epoch {entry.epoch}: total_g={entry.train.get('total_g', 0):.4f} "
                f"val G+F={entry.val_g_total + entry.val_f_total:.4f}"
            )

        history = gan.fit(
            state, train_x, train_y, val_x, val_y, cfg,
            epochs=cfg.epochs, seed=ws.cfg.seed,
            max_steps=cfg.max_steps or None,
            checkpoint_fn=checkpoint_fn, log_fn=log_fn,
        )
        gan.write_history_csv(stage / "history.csv", history, header_lines=ws.stamp_lines())
        best = gan.select_checkpoint(history)
        best_path = ckpt_dir / f"epoch_{best:04d}.pt"
        if not best_path.exists():  # checkpoint_every may skip the argmin epoch
            stored = sorted(ckpt_dir.glob("epoch_*.pt"))
            if not stored:
                raise KoasynthError("no checkpoints were stored during training")
            best_path = min(
                stored, key=lambda p: abs(int(p.stem.split("_")[1]) - best)
            )
        shutil.copyfile(best_path, stage / "best.pt")
        (stage / "selected_epoch.txt").write_text(
            "\n".join([f"# {line}" for line in ws.stamp_lines()] + [str(best)]) + "\n", encoding="utf-8"
        )
        click.echo(f"train-gan: selected epoch {best} -> {stage / 'best.pt'}")

    _run_stage(ws, "train-gan", force, body)


@main.command("train-cnn")
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def train_cnn(ws: Workspace, force):
    """Train the staged-disease classifier with early stopping."""

    def body(stage: Path):
        parts = Split(
            train=_load_split_records(ws, "train"),
            validation=_load_split_records(ws, "validation"),
            test=_load_split_records(ws, "test"),
            fractions=ws.cfg.fractions,
        )
        trained = cnn_mod.train_classifier(
            parts, ws.cfg.cnn, seed=ws.cfg.seed,
            log_fn=lambda rec: click.echo(
                f"  epoch {rec.epoch}: train={rec.train_loss:.4f} val={rec.val_loss:.4f} "
                f"acc={rec.val_accuracy:.3f}"
            ),
        )
        cnn_mod.save_classifier(stage / "model.pt", trained, meta=ws.stamp_dict())
        cnn_mod.write_classifier_history_csv(stage / "history.csv", trained.history,
                                             header_lines=ws.stamp_lines())
        click.echo(f"train-cnn: {len(trained.history)} epochs -> {stage / 'model.pt'}")

    _run_stage(ws, "train-cnn", force, body)


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def attack(ws: Workspace, force):
    """One-shot adversarial attack on the classifier via the trained generators."""

    def body(stage: Path):
        bundle = gan.load_transform_bundle(ws.require("train-gan/best.pt", "train-gan"))
        trained = cnn_mod.load_classifier(ws.require("train-cnn/model.pt", "train-cnn"))
        test_records = _load_split_records(ws, "test")
        reports = []
        shift_rows = []
        for stage_label in StageLabel:
            cohort_pool = [r for r in test_records if r.stage == stage_label]
            if not cohort_pool:
                continue
            cohort = evaluation.rank_by_confidence(
                trained, cohort_pool, stage_label, min(ws.cfg.attack_k, len(cohort_pool))
            )
            for direction in ATTACK_DIRECTIONS[stage_label]:
                report = evaluation.one_shot_attack(bundle, trained, cohort, direction)
                reports.append(report)
                for target in StageLabel:
                    shift_rows.append([
                        stage_label.display, direction.value, target.display,
                        report.counts[target], f"{report.percentages[target]:.2f}",
                    ])
                per_image_rows = [
                    [Path(rec.image_id).name, f"{rec.pre_confidence:.6f}",
                     *(f"{p:.6f}" for p in rec.post_probabilities)]
                    for rec in report.per_image
                ]
                _stamped_csv(
                    stage / f"per_image_{stage_label.display}_{direction.value}.csv",
                    ws.stamp_lines(),
                    ["image_id", "pre_confidence", "post_p_NoneDoubtful", "post_p_Mild", "post_p_ModerateSevere"],
                    per_image_rows,
                )
        _stamped_csv(stage / "shifts.csv", ws.stamp_lines(),
                     ["original_class", "direction", "target_class", "count", "percent"], shift_rows)
        table = evaluation.render_attack_table(reports)
        (stage / "report.txt").write_text(
            "\n".join([f"# {line}" for line in ws.stamp_lines()] + [table]) + "\n", encoding="utf-8"
        )
        click.echo(table)

    _run_stage(ws, "attack", force, body)


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def report(ws: Workspace, force):
    """Classifier quality metrics on the shared test split."""

    def body(stage: Path):
        model_path = ws.require("train-cnn/model.pt", "train-cnn")
        trained = cnn_mod.load_classifier(model_path)
        meta_hash = torch.load(model_path, map_location="cpu", weights_only=False)["meta"].get("config_hash")
        if meta_hash is not None and meta_hash != ws.hash:
            raise KoasynthError(
                f"mixed-config inputs: classifier carries config_hash {meta_hash}, expected {ws.hash}"
            )
        test_records = _load_split_records(ws, "test")
        if not test_records:
            raise KoasynthError("test split is empty")
        probs = trained.predict_proba(np.stack([r.pixels for r in test_records]))
        truths = [int(r.stage) for r in test_records]
        preds = probs.argmax(axis=1)
        matrix, class_report = evaluation.confusion_and_report(truths, preds)
        aucs = evaluation.roc_auc_ovr(probs, truths)

        _stamped_csv(stage / "confusion.csv", ws.stamp_lines(),
                     ["true\\pred", *(s.display for s in StageLabel)],
                     [[StageLabel(i).display, *matrix.counts[i].tolist()] for i in range(3)])
        _stamped_csv(stage / "auc.csv", ws.stamp_lines(), ["class", "auc_ovr"],
                     [[s.display, "missing" if aucs[i] is None else f"{aucs[i]:.6f}"]
                      for i, s in enumerate(StageLabel)])
        text = evaluation.render_classification_table(class_report)
        (stage / "classification_report.txt").write_text(
            "\n".join([f"# {line}" for line in ws.stamp_lines()] + [text]) + "\n", encoding="utf-8"
        )
        click.echo(text)

    _run_stage(ws, "report", force, body)


@main.command()
@click.option("--force", is_flag=True, help="Overwrite existing stage output.")
@pass_workspace
@_cli_guard
def visualize(ws: Workspace, force):
    """Progress strips, saliency overlays, attention maps and the embedding plots."""

    def body(stage: Path):
        bundle = gan.load_transform_bundle(ws.require("train-gan/best.pt", "train-gan"))
        trained = cnn_mod.load_classifier(ws.require("train-cnn/model.pt", "train-cnn"))
        test_records = _load_split_records(ws, "test")
        selected = int(
            [l for l in (ws.root / "train-gan" / "selected_epoch.txt").read_text().splitlines()
             if not l.startswith("#")][0]
        )
        ckpts = [
            gan.load_transform_bundle(p)
            for p in sorted((ws.root / "train-gan" / "checkpoints").glob("epoch_*.pt"))
            if int(p.stem.split("_")[1]) <= selected
        ]

        mild = [r for r in test_records if r.stage == StageLabel.MILD]
        probes = (mild or test_records)[: max(1, ws.cfg.strip_probe_count)]
        for i, probe in enumerate(probes):
            panel = interpret.progress_panel(ckpts, probe.pixels)
            write_png(stage / f"progress_panel_{i:02d}.png", panel, text=ws.stamp_dict())

        # Saliency + attention composites for the strongest attack examples.
        for stage_label, direction, target in (
            (StageLabel.MILD, Direction.TOWARD_FUTURE, StageLabel.MODERATE_SEVERE),
            (StageLabel.MILD, Direction.TOWARD_PAST, StageLabel.NONE_DOUBTFUL),
        ):
            pool = [r for r in test_records if r.stage == stage_label]
            if not pool:
                continue
            cohort = evaluation.rank_by_confidence(trained, pool, stage_label, min(12, len(pool)))
            attack_report = evaluation.one_shot_attack(bundle, trained, cohort, direction)
            scored = sorted(
                zip(cohort, attack_report.per_image),
                key=lambda pair: -pair[1].post_probabilities[int(target)],
            )[:6]
            for rank, (rec, img_rec) in enumerate(scored):
                transformed = gan.transform(rec.pixels, direction, bundle)
                overlay = interpret.saliency_overlay(rec.pixels, transformed)
                write_png_rgb(
                    stage / f"saliency_{direction.value}_{rank}.png", overlay, text=ws.stamp_dict()
                )
                cam = interpret.grad_cam(trained.model, transformed, target)
                composite = interpret.heatmap_to_rgb(cam, base=transformed)
                write_png_rgb(
                    stage / f"gradcam_{direction.value}_{rank}.png", composite, text=ws.stamp_dict()
                )

        # Shared embedding of originals and both synthetic directions.
        cap = max(9, int(np.ceil(3.5 * ws.cfg.tsne_perplexity)))
        originals = test_records[:cap]
        pixels = np.stack([r.pixels for r in originals])
        future = gan.transform(pixels, Direction.TOWARD_FUTURE, bundle)
        past = gan.transform(pixels, Direction.TOWARD_PAST, bundle)
        all_images = np.concatenate([pixels, future, past])
        feats = cnn_mod.dense_features(trained.model, all_images)
        probs = trained.predict_proba(all_images)
        sources = (["OriginalTest"] * len(originals) + ["SyntheticFuture"] * len(originals)
                   + ["SyntheticPast"] * len(originals))
        stages = [StageLabel(int(c)) for c in probs.argmax(axis=1)]
        names = [Path(r.path).name for r in originals]
        ids = names + [f"future:{n}" for n in names] + [f"past:{n}" for n in names]
        points = interpret.embed_points(
            feats, sources, stages, ids,
            perplexity=ws.cfg.tsne_perplexity, seed=ws.cfg.seed, n_iter=ws.cfg.tsne_iterations,
        )
        interpret.write_embedding_csv(stage / "embedding.csv", points, header_lines=ws.stamp_lines())
        slope, intercept, r2 = interpret.fit_linear(points)
        (stage / "embedding_fit.txt").write_text(
            "\n".join([f"# {line}" for line in ws.stamp_lines()]
                      + [f"slope={slope:.6f}", f"intercept={intercept:.6f}", f"r2={r2:.6f}"]) + "\n",
            encoding="utf-8",
        )
        assignment = interpret.rasterize_grid(points)
        montage = interpret.render_raster_montage(list(all_images), assignment)
        write_png(stage / "tsne_raster.png", montage, text=ws.stamp_dict())
        _scatter_plot(stage / "tsne_scatter.png", points, slope, intercept)
        click.echo(f"visualize: embedding of {len(points)} points (fit r2={r2:.3f}) -> {stage}")

    _run_stage(ws, "visualize", force, body)


def _scatter_plot(path: Path, points, slope: float, intercept: float) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    markers = {"OriginalTest": "o", "SyntheticFuture": "^", "SyntheticPast": "v"}
    colors = {
        StageLabel.NONE_DOUBTFUL: "#2a7fba",
        StageLabel.MILD: "#e0a400",
        StageLabel.MODERATE_SEVERE: "#b5312f",
    }
    fig, ax = plt.subplots(figsize=(7, 6))
    for source, marker in markers.items():
        for stage_label, color in colors.items():
            xs = [p.x for p in points if p.source == source and p.stage == stage_label]
            ys = [p.y for p in points if p.source == source and p.stage == stage_label]
            if xs:
                ax.scatter(xs, ys, marker=marker, c=color, s=22, alpha=0.8,
                           label=f"{source}/{stage_label.display}")
    xs = np.array([p.x for p in points])
    grid = np.linspace(xs.min(), xs.max(), 50)
    ax.plot(grid, slope * grid + intercept, "k--", linewidth=1, label="OLS fit")
    ax.legend(fontsize=6, loc="best")
    ax.set_title("Embedding of original and synthesized test images")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@main.command("verify-arch")
@pass_workspace
@_cli_guard
def verify_arch(ws: Workspace):
    """Build both network specs and assert every reference parameter count."""
    from .gan.networks import layer_param_counts

    cfg = ws.cfg.gan
    problems: list[str] = []
    gen_spec = gan.build_generator(cfg)
    disc_spec = gan.build_discriminator(cfg)
    expected = {
        "generator": (gen_spec, gan.GENERATOR_TOTAL_PARAMS, gan.ResnetGenerator(cfg)),
        "discriminator": (disc_spec, gan.DISCRIMINATOR_TOTAL_PARAMS, gan.PatchDiscriminator(cfg)),
    }
    defaults = cfg.image_size == 224 and cfg.base_filters == 64 and cfg.residual_blocks == 9
    for name, (spec, total, module) in expected.items():
        if defaults and spec.total_params != total:
            problems.append(f"{name}: total {spec.total_params:,} expected {total:,}")
        torch_rows = layer_param_counts(module)
        spec_rows = [(l.kind, l.params) for l in spec.parameterized_layers()]
        if torch_rows != spec_rows:
            for i, (trow, srow) in enumerate(zip(torch_rows, spec_rows)):
                if trow != srow:
                    problems.append(
                        f"{name} layer {i} ({srow[0]}): torch has {trow[1]} params, expected {srow[1]}"
                    )
                    break
        click.echo(f"{name}: total params {spec.total_params:,}")
        for layer in spec.parameterized_layers():
            click.echo(f"  {layer.kind:<14} {str(layer.output_shape):<18} {layer.params:,}")
    if problems:
        raise KoasynthError("; ".join(problems))
    click.echo("verify-arch: all parameter counts match")


if __name__ == "__main__":
    main()
