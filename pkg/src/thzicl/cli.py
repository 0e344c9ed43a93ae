"""Command-line surface: phantom, render, crop, classify, evaluate.

Exit codes: 0 success, 1 runtime failure, 2 usage error. A TOML config file
(--config) supplies defaults; command-line flags win.
"""
from __future__ import annotations

import sys

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import fields, replace
from pathlib import Path

import click

from . import client as client_mod
from . import evaluate as eval_mod
from . import phantom as phantom_mod
from . import prompts as prompts_mod
from . import render as render_mod
from . import spectra, volume_io


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _parse_range(text: str, name: str = "range") -> tuple[int, int]:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise click.UsageError(f"{name} must look like 'a:b', got {text!r}")
    if lo >= hi:
        raise click.UsageError(f"{name} must satisfy a < b, got {text!r}")
    return lo, hi


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}")


def _endpoint_from_config(cfg: dict, **overrides) -> client_mod.EndpointConfig:
    section = cfg.get("endpoint", {})
    valid = {f.name for f in fields(client_mod.EndpointConfig)}
    kwargs = {k: v for k, v in section.items() if k in valid}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return client_mod.EndpointConfig(**kwargs)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file.")
@click.option("--verbose", is_flag=True, default=False)
@click.pass_context
def main(ctx, config_path, verbose):
    """THz spectra pipeline and in-context-learning classification harness."""
    ctx.obj = {"config": _load_config(config_path), "verbose": verbose}


@main.command("phantom")
@click.option("--nf", type=int, default=None)
@click.option("--nx", type=int, default=None)
@click.option("--ny", type=int, default=None)
@click.option("--band", type=str, default=None, help="Visible band as 'lo:hi' (half-open).")
@click.option("--peak", type=int, default=None)
@click.option("--noise-sigma", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out-volume", type=click.Path(), default="phantom.thzv", show_default=True)
@click.option("--out-annotations", type=click.Path(), default="annotations.csv", show_default=True)
@click.pass_context
def cmd_phantom(ctx, nf, nx, ny, band, peak, noise_sigma, seed, out_volume, out_annotations):
    """Generate the synthetic plate + disc volume and its ground truth."""
    section = ctx.obj["config"].get("phantom", {})
    valid = {f.name for f in fields(phantom_mod.PhantomSpec)}
    kwargs = {k: v for k, v in section.items() if k in valid}
    for key, value in (("nf", nf), ("nx", nx), ("ny", ny), ("peak_frame", peak),
                       ("noise_sigma", noise_sigma), ("seed", seed)):
        if value is not None:
            kwargs[key] = value
    if band is not None:
        kwargs["band_lo"], kwargs["band_hi"] = _parse_range(band, "--band")
    spec = phantom_mod.PhantomSpec()
    if "nf" in kwargs and "peak_frame" not in kwargs:
        # keep defaults consistent when only dimensions shrink
        lo = kwargs.setdefault("band_lo", max(0, kwargs["nf"] * 14 // 64))
        hi = kwargs.setdefault("band_hi", max(lo + 1, kwargs["nf"] * 55 // 64))
        kwargs["peak_frame"] = (lo + hi) // 2
    if {"nx", "ny"} & kwargs.keys():
        nx_eff = kwargs.get("nx", spec.nx)
        ny_eff = kwargs.get("ny", spec.ny)
        kwargs.setdefault("plate_rect", phantom_mod.Rect(
            nx_eff // 10, ny_eff // 10, max(nx_eff // 10 + 1, 2 * nx_eff // 5), max(ny_eff // 10 + 1, 9 * ny_eff // 10)))
        kwargs.setdefault("c4_disc", phantom_mod.Disc(7 * nx_eff // 10, ny_eff // 2, max(1, nx_eff // 7)))
    try:
        spec = replace(spec, **kwargs)
        vol, ann = phantom_mod.generate_phantom(spec)
        volume_io.write_volume(vol, out_volume)
        phantom_mod.write_annotations(ann, out_annotations)
    except (ValueError, volume_io.VolumeIoError) as exc:
        if isinstance(exc, ValueError):
            raise click.UsageError(str(exc))
        _fail(str(exc))
    yes = sum(1 for v in ann.labels.values() if v == phantom_mod.YES_C4)
    click.echo(
        f"phantom {spec.nf}x{spec.nx}x{spec.ny} band [{spec.band_lo}:{spec.band_hi}) "
        f"peak {spec.peak_frame}: {yes} YES_C4 / {spec.nf - yes} NO_C4 -> "
        f"{out_volume}, {out_annotations}"
    )


def _read_volume_or_fail(path) -> volume_io.ThzVolume:
    try:
        return volume_io.read_volume(path)
    except volume_io.VolumeIoError as exc:
        _fail(str(exc))


def _render_options(ctx, panel_scale, label) -> render_mod.RenderOptions:
    section = ctx.obj["config"].get("render", {})
    opts = render_mod.RenderOptions(
        panel_scale=panel_scale if panel_scale is not None else section.get("panel_scale", 4),
        show_frame_label=label if label is not None else section.get("show_frame_label", False),
    )
    return opts


@main.command("render")
@click.argument("volume", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--frames", type=str, default=None, help="Half-open frame range 'a:b'.")
@click.option("--panel-scale", type=int, default=None)
@click.option("--label/--no-label", "label", default=None)
@click.pass_context
def cmd_render(ctx, volume, out_dir, frames, panel_scale, label):
    """Render dual-plot PNG frames from a RAW volume."""
    vol = _read_volume_or_fail(volume)
    lo, hi = (0, vol.nf) if frames is None else _parse_range(frames, "--frames")
    if not (0 <= lo < hi <= vol.nf):
        raise click.UsageError(f"frame range {lo}:{hi} outside [0, {vol.nf})")
    opts = _render_options(ctx, panel_scale, label)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transformed = spectra.transform_volume(vol)
    for d in range(lo, hi):
        fs = spectra.frame_spectra_from_transformed(transformed, d)
        img = render_mod.render_frame(fs, opts)
        (out / render_mod.frame_filename(d)).write_bytes(img.png)
    click.echo(f"rendered {hi - lo} frames to {out_dir}")


@main.command("crop")
@click.argument("volume", type=click.Path())
@click.argument("frame", type=int)
@click.argument("cx", type=int)
@click.argument("cy", type=int)
@click.option("--size", type=int, default=render_mod.DEFAULT_CROP_SIZE, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_crop(volume, frame, cx, cy, size, out_path):
    """Extract a demonstration crop (size x size per panel, side by side)."""
    vol = _read_volume_or_fail(volume)
    try:
        fs = spectra.frame_spectra(vol, frame)
        img = render_mod.extract_crop(fs, render_mod.CropSpec(center_x=cx, center_y=cy, size=size))
    except (spectra.SpectraError, render_mod.RenderError) as exc:
        _fail(str(exc))
    path = out_path or render_mod.crop_filename(frame, cx, cy)
    Path(path).write_bytes(img.png)
    click.echo(f"wrote {img.width}x{img.height} crop to {path}")


@main.command("classify")
@click.argument("volume", type=click.Path())
@click.option("--shot", type=click.Choice(["zero", "one"]), required=True)
@click.option("--backend", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--crop", "crop_path", type=click.Path(), default=None,
              help="Demonstration crop PNG (required for --shot one).")
@click.option("--frames", type=str, default=None, help="Half-open frame range 'a:b'.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--panel-scale", type=int, default=None)
@click.pass_context
def cmd_classify(ctx, volume, shot, backend, crop_path, frames, out_path, panel_scale):
    """Run the prompt pipeline over a volume and write predictions JSONL."""
    if shot == "one" and crop_path is None:
        raise click.UsageError("--shot one requires --crop")
    cfg_doc = ctx.obj["config"]
    vol = _read_volume_or_fail(volume)
    lo, hi = (0, vol.nf) if frames is None else _parse_range(frames, "--frames")
    if not (0 <= lo < hi <= vol.nf):
        raise click.UsageError(f"frame range {lo}:{hi} outside [0, {vol.nf})")
    templates_dir = cfg_doc.get("templates_dir")
    templates = prompts_mod.load_templates(templates_dir)
    opts = _render_options(ctx, panel_scale, label=False)
    crop_png = Path(crop_path).read_bytes() if crop_path else None
    shot_fmt = prompts_mod.ShotFormat.ONE_SHOT if shot == "one" else prompts_mod.ShotFormat.ZERO_SHOT
    bundles = []
    transformed = spectra.transform_volume(vol)
    for d in range(lo, hi):
        fs = spectra.frame_spectra_from_transformed(transformed, d)
        png = render_mod.render_frame(fs, opts).png
        bundles.append(prompts_mod.assemble(shot_fmt, templates, d, png, crop_png))
    endpoint = _endpoint_from_config(cfg_doc)
    if backend == "remote":
        try:
            client_mod._resolve_api_key(endpoint)
        except client_mod.AuthMissing as exc:
            _fail(str(exc))
    policy_kwargs = cfg_doc.get("mock", {})
    policy = client_mod.MockPolicy(**policy_kwargs)
    try:
        records = client_mod.run_batch(bundles, backend, endpoint, out_path, policy)
    except client_mod.ClientError as exc:
        _fail(str(exc))
    ok = sum(1 for r in records if r.status == "OK")
    click.echo(f"classified {len(records)} frames ({ok} OK) -> {out_path}")


@main.command("evaluate")
@click.argument("predictions", nargs=-1, type=click.Path(), required=False)
@click.option("--annotations", type=click.Path(), required=True)
@click.option("--compare", nargs=2, type=click.Path(), default=None,
              help="Zero-shot and one-shot prediction files for change analysis.")
@click.option("--format", "fmt", type=click.Choice(["json", "markdown"]), default="markdown",
              show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_evaluate(predictions, annotations, compare, fmt, out_path):
    """Score prediction files against annotations; optionally compare runs."""
    if not predictions and compare is None:
        raise click.UsageError("provide prediction files or --compare")
    try:
        truth = eval_mod.load_annotations(annotations)
        runs = {}
        for path in predictions:
            runs[Path(path).stem] = client_mod.load_predictions(path)
        compare_names = None
        if compare is not None:
            zero_path, one_path = compare
            zname, oname = Path(zero_path).stem, Path(one_path).stem
            if oname == zname:
                oname += "-one"
            runs.setdefault(zname, client_mod.load_predictions(zero_path))
            runs.setdefault(oname, client_mod.load_predictions(one_path))
            compare_names = (zname, oname)
        report = eval_mod.evaluate_runs(runs, truth, compare_names)
        doc = eval_mod.render_report(report, fmt)
    except (eval_mod.EvaluationError, OSError, ValueError) as exc:
        _fail(str(exc))
    if out_path:
        Path(out_path).write_text(doc, encoding="utf-8")
        click.echo(f"wrote report to {out_path}")
    else:
        click.echo(doc, nl=False)


if __name__ == "__main__":
    main()
