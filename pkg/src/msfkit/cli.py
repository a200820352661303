"""Command-line interface: extract descriptors, write Gram files, run experiments.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from configparser import ConfigParser, Error as ConfigParserError
from pathlib import Path

import numpy as np

from . import dataio
from .errors import ConfigError, ConvergenceError, DataError, DegenerateSampleError
from .featmap import ExtractorSpec, LayerSpec, ScaleSet, output_side
from .kernels import KernelSpec, gram, normalize_gram
from .pipeline import FitConfig, SplitPlan, evaluate
from .spp import PyramidSpec, descriptor_length

_KNOWN_KEYS = {
    "scales": {"sides"},
    "pyramid": {"levels"},
    "extractor": {"seed", "in_channels", "layers"},
    "kernel": {"kind", "gamma", "normalize"},
    "svm": {"c", "tol"},
    "mkl": {"step", "outer_tol", "max_outer"},
    "experiment": {"train_counts", "repetitions", "seed"},
    "paths": {"cache_dir"},
}


@dataclass(frozen=True)
class RunConfig:
    scales: ScaleSet
    pyramid: PyramidSpec
    extractor: ExtractorSpec
    kernel: KernelSpec
    normalize: bool
    svm_c: float
    svm_tol: float
    mkl_step: float
    mkl_outer_tol: float
    mkl_max_outer: int
    train_counts: tuple[int, ...]
    repetitions: int
    seed: int
    cache_dir: Path | None

    def fit_config(self, jobs: int | None = None) -> FitConfig:
        return FitConfig(
            kernel=self.kernel,
            normalize=self.normalize,
            C=self.svm_c,
            svm_tol=self.svm_tol,
            mkl_step=self.mkl_step,
            mkl_outer_tol=self.mkl_outer_tol,
            mkl_max_outer=self.mkl_max_outer,
            jobs=jobs,
        )

    def methods(self) -> list[str]:
        return [f"single-{s}" for s in self.scales.sides] + ["sv", "mkl"]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _parse_layers(text: str) -> tuple[LayerSpec, ...]:
    layers = []
    for tok in text.replace(",", " ").split():
        parts = tok.split(":")
        if len(parts) != 4:
            raise ValueError(f"layer {tok!r} must be filters:size:stride:pool")
        layers.append(LayerSpec(*(int(p) for p in parts)))
    return tuple(layers)


def load_config(path) -> RunConfig:
    """Parse and validate an INI config; unknown sections or keys are errors."""
    path = Path(path)
    parser = ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ConfigParserError as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def get(section, key, default):
        return parser.get(section, key, fallback=default)

    try:
        scales = ScaleSet(_ints(get("scales", "sides", "128 192 256")))
        pyramid = PyramidSpec(_ints(get("pyramid", "levels", "1 2 4")))
        extractor = ExtractorSpec(
            seed=int(get("extractor", "seed", "7")),
            in_channels=int(get("extractor", "in_channels", "1")),
            layers=_parse_layers(get("extractor", "layers", "8:5:2:2 16:3:2:2")),
        )
        kind = get("kernel", "kind", "linear")
        gamma = get("kernel", "gamma", None)
        if kind == "gaussian" and gamma is None:
            raise ValueError("gaussian kernel needs a gamma key")
        kernel = KernelSpec(kind=kind, gamma=float(gamma) if gamma is not None else None)
        normalize = parser.getboolean("kernel", "normalize", fallback=True)
        cache_dir = get("paths", "cache_dir", None)
        config = RunConfig(
            scales=scales,
            pyramid=pyramid,
            extractor=extractor,
            kernel=kernel,
            normalize=normalize,
            svm_c=float(get("svm", "c", "1.0")),
            svm_tol=float(get("svm", "tol", "1e-4")),
            mkl_step=float(get("mkl", "step", "1.0")),
            mkl_outer_tol=float(get("mkl", "outer_tol", "1e-4")),
            mkl_max_outer=int(get("mkl", "max_outer", "200")),
            train_counts=_ints(get("experiment", "train_counts", "5 25")),
            repetitions=int(get("experiment", "repetitions", "10")),
            seed=int(get("experiment", "seed", "0")),
            cache_dir=(path.parent / cache_dir) if cache_dir else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if not config.train_counts or any(c < 1 for c in config.train_counts):
        raise ConfigError(f"train_counts must be positive, got {config.train_counts}")
    if config.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if not (config.svm_c > 0):
        raise ConfigError("svm c must be positive")
    for side in config.scales.sides:
        try:
            out = output_side(config.extractor, side)
        except ValueError as exc:
            raise ConfigError(f"scale {side}: {exc}") from exc
        if out < config.pyramid.max_level:
            raise ConfigError(
                f"scale {side}: feature-map side {out} is smaller than the "
                f"finest pyramid level {config.pyramid.max_level}"
            )
    return config


def cmd_extract(args) -> int:
    config = load_config(args.config)
    stats: dict = {}
    ds = dataio.load_dataset(
        args.manifest, config.scales, config.extractor, config.pyramid,
        cache_dir=config.cache_dir, stats=stats,
    )
    for side, block in zip(ds.scales, ds.blocks):
        print(f"scale={side} samples={block.shape[0]} descriptor_length={block.shape[1]}")
    print(f"classes={len(ds.classes)} extract_calls={stats['extract_calls']} "
          f"cache_hits={stats['cache_hits']}")
    return 0


def cmd_gram(args) -> int:
    config = load_config(args.config)
    ds = dataio.load_dataset(
        args.manifest, config.scales, config.extractor, config.pyramid,
        cache_dir=config.cache_dir,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for side, block in zip(ds.scales, ds.blocks):
        g = gram(block, config.kernel, tag=side)
        if config.normalize:
            g = normalize_gram(g)
        results.append((side, g))
    for side, g in results:
        dataio.write_tensor(out_dir / f"gram_{side}.tens", g.entries.shape, g.entries)
        diag = np.diag(g.entries)
        print(f"gram scale={side} order={g.order} "
              f"diag_min={diag.min():.6f} diag_max={diag.max():.6f}")
    return 0


def _format_cm(counts, classes, rates=False):
    lines = ["actual\\predicted\t" + "\t".join(classes)]
    for name, row in zip(classes, counts):
        cells = [f"{v:.4f}" if rates else str(int(v)) for v in row]
        lines.append(name + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def cmd_exp(args) -> int:
    config = load_config(args.config)
    ds = dataio.load_dataset(
        args.manifest, config.scales, config.extractor, config.pyramid,
        cache_dir=config.cache_dir,
    )
    fit = config.fit_config(jobs=args.jobs)
    methods = config.methods()
    reports = {}
    for count in config.train_counts:
        plan = SplitPlan(train_per_class=count, repetitions=config.repetitions, seed=config.seed)
        for method in methods:
            rep = evaluate(ds, plan, method, fit, diagnose=args.diagnose)
            reports[(method, count)] = rep
            print(f"method={method} train={count} "
                  f"oa={100 * rep.oa_mean:.2f}±{100 * rep.oa_std:.2f}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        oa_path = out_dir / "oa.tsv"
        header = "method\t" + "\t".join(str(c) for c in config.train_counts)
        lines = [header]
        for method in methods:
            cells = [
                f"{100 * reports[(method, c)].oa_mean:.2f}±{100 * reports[(method, c)].oa_std:.2f}"
                for c in config.train_counts
            ]
            lines.append(method + "\t" + "\t".join(cells))
        written.append(oa_path)
        oa_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

        for (method, count), rep in reports.items():
            base = out_dir / f"confusion_{method}_{count}.tsv"
            written.append(base)
            base.write_text(_format_cm(rep.confusion.counts, ds.classes), encoding="utf-8")
            rates = out_dir / f"confusion_{method}_{count}_rates.tsv"
            written.append(rates)
            rates.write_text(
                _format_cm(rep.confusion.rates(), ds.classes, rates=True), encoding="utf-8"
            )

        weight_lines = ["train_count\tclass\t" + "\t".join(f"d_{s}" for s in ds.scales)]
        for count in config.train_counts:
            rep = reports[("mkl", count)]
            for name, row in zip(ds.classes, rep.mkl_weights):
                weight_lines.append(
                    f"{count}\t{name}\t" + "\t".join(f"{w:.4f}" for w in row)
                )
        weights_path = out_dir / "mkl_weights.tsv"
        written.append(weights_path)
        weights_path.write_text("\n".join(weight_lines) + "\n", encoding="utf-8")
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="msfkit",
        description="Multi-scale descriptor extraction, Gram files, and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, brief in (
        ("extract", "compute per-scale descriptors (fills the cache when configured)"),
        ("gram", "write one Gram tensor file per scale"),
        ("exp", "run the experiment grid and write report tables"),
    ):
        p = sub.add_parser(name, help=brief)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--manifest", required=True, help="dataset manifest")
        p.add_argument("--jobs", type=int, default=None, help="max parallel work units")
        if name in ("gram", "exp"):
            p.add_argument("--out", required=True, help="output directory")
        if name == "exp":
            p.add_argument(
                "--diagnose", action="store_true",
                help="score the training set itself (smoke test; separable data gives 100%%)",
            )
    args = parser.parse_args(argv)
    commands = {"extract": cmd_extract, "gram": cmd_gram, "exp": cmd_exp}
    try:
        return commands[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DegenerateSampleError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
