"""Command-line front door wiring the library into reproducible runs.

Every subcommand is deterministic under (flags, seed, inputs), writes its
artifacts under --out next to a manifest.json recording the full flag set,
input file hashes, tool version, and wall-clock time. Exit codes are a
stable contract: 0 success, 2 for usage or input problems, 3 for numeric
failures.
"""

import functools
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click

from . import __version__
from .decompose import (
    connectivity_aware_decompose,
    decomposition_stats,
    random_decompose,
    save_decomposition,
)
from .graphs import load_edge_list, normalized_adjacency
from .partition import multilevel_partition, partition_stats
from .propagate import (
    decay_curve,
    gcn_stack,
    random_unit_features,
    weights_with_top_singular,
    write_decay_csv,
)
from .train import (
    BACKBONES,
    DEPTHSWEEP_COLUMNS,
    KSWEEP_COLUMNS,
    ModelConfig,
    SBMSpec,
    depth_sweep,
    generate_sbm,
    k_sweep,
    load_model_config,
    write_history_csv,
    write_rows_csv,
)
from .train import train as train_model
from .verify import (
    check_kron_identities,
    check_linearization,
    check_regimes,
    check_split_spectrum,
)

# public suite tokens, kept stable for scripting
VERIFY_SUITES = (
    ("lemma1", check_linearization),
    ("lemma3", check_split_spectrum),
    ("kron", check_kron_identities),
    ("regimes", check_regimes),
)
_SUITE_BY_NAME = dict(VERIFY_SUITES)

_STRATEGY_ALIASES = {
    "ca": "connectivity_aware",
    "connectivity_aware": "connectivity_aware",
    "random": "random",
    "none": "none",
}
_BACKBONE_ALIASES = {
    "gcn": "gcn",
    "res": "resgcn",
    "resgcn": "resgcn",
    "dense": "densegcn",
    "densegcn": "densegcn",
    "jk": "jknet",
    "jknet": "jknet",
}


@dataclass(frozen=True)
class RunManifest:
    """Record of one invocation, written next to every output artifact."""

    subcommand: str
    flags: dict
    seed: int
    input_hashes: dict
    version: str
    wall_clock_seconds: float
    created: str = field(default="")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def _emit_manifest(out_dir, subcommand, flags, seed, inputs, started):
    manifest = RunManifest(
        subcommand=subcommand,
        flags={k: _jsonable(v) for k, v in flags.items()},
        seed=int(seed),
        input_hashes={str(p): _sha256(p) for p in inputs},
        version=__version__,
        wall_clock_seconds=time.time() - started,
        created=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    )
    path = Path(out_dir) / "manifest.json"
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


def _out_dir(out):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _guarded(fn):
    """Map library errors to the exit-code contract (2 input, 3 numeric)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ArithmeticError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _parse_int_list(text):
    """Accept '1..8', '2,4,6,8', or a mix like '1,4..6'."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo_text, hi_text = part.split("..", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("expected at least one integer")
    return out


def _int_list_option(ctx, param, value):
    try:
        return _parse_int_list(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _name_list_option(aliases):
    def callback(ctx, param, value):
        names = []
        for part in str(value).split(","):
            part = part.strip()
            if not part:
                continue
            if part not in aliases:
                raise click.BadParameter(
                    f"unknown value {part!r}; choose from "
                    + ", ".join(sorted(set(aliases)))
                )
            names.append(aliases[part])
        if not names:
            raise click.BadParameter("expected at least one name")
        return names

    return callback


def _sbm_options(fn):
    options = [
        click.option("--nodes", default=400, show_default=True, type=int,
                     help="node count of the synthetic graph"),
        click.option("--blocks", default=4, show_default=True, type=int,
                     help="number of planted blocks / classes"),
        click.option("--p-in", default=0.08, show_default=True, type=float,
                     help="intra-block edge probability"),
        click.option("--p-out", default=0.005, show_default=True, type=float,
                     help="inter-block edge probability"),
        click.option("--dim", default=8, show_default=True, type=int,
                     help="feature dimension"),
        click.option("--noise", default=0.5, show_default=True, type=float,
                     help="feature noise scale"),
        click.option("--data-seed", default=7, show_default=True, type=int,
                     help="seed for the synthetic graph draw"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _make_data(nodes, blocks, p_in, p_out, dim, noise, data_seed):
    spec = SBMSpec(n=int(nodes), b=int(blocks), p_in=p_in, p_out=p_out,
                   d=int(dim), noise=noise)
    return generate_sbm(spec, seed=int(data_seed))


@click.group(context_settings={"auto_envvar_prefix": "DEGNN"})
@click.version_option(__version__)
def main():
    """Connectivity-aware graph decomposition and certification toolkit."""


@main.command()
@click.option("--edges", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="whitespace edge-list file")
@click.option("--p", required=True, type=int, help="number of parts")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-imbalance", default=1.3, show_default=True, type=float)
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def partition(edges, p, seed, max_imbalance, out):
    """Split a graph into p balanced parts with a small edge cut."""
    started = time.time()
    g = load_edge_list(edges)
    part = multilevel_partition(g, p, seed, max_imbalance=max_imbalance)
    stats = partition_stats(g, part)
    out_dir = _out_dir(out)
    labels_path = out_dir / "partition.txt"
    labels_path.write_text(
        "".join(f"{v}\n" for v in part.labels), encoding="utf-8"
    )
    (out_dir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit_manifest(
        out_dir, "partition",
        {"edges": edges, "p": p, "seed": seed,
         "max_imbalance": max_imbalance, "out": out},
        seed, [edges], started,
    )
    click.echo(
        f"p={p} cut_edges={stats['cut_edges']} "
        f"imbalance={stats['imbalance']:.4f}"
    )
    click.echo(f"wrote {labels_path}")


@main.command()
@click.option("--edges", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", default="ca", show_default=True,
              type=click.Choice(["ca", "connectivity_aware", "random"]))
@click.option("--k", required=True, type=int, help="number of pieces")
@click.option("--p", default=4, show_default=True, type=int,
              help="partition count used by the connectivity-aware strategy")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--skeleton/--no-skeleton", default=True, show_default=True,
              help="replicate a shared spanning forest into every piece")
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def decompose(edges, strategy, k, p, seed, skeleton, out):
    """Split a graph's edges into k pieces, one file per piece."""
    started = time.time()
    g = load_edge_list(edges)
    source = _STRATEGY_ALIASES[strategy]
    if source == "random":
        dec = random_decompose(g, k, seed)
    else:
        dec = connectivity_aware_decompose(
            g, p, k, seed, with_skeleton=skeleton
        )
    out_dir = _out_dir(out)
    save_decomposition(dec, out_dir)
    stats = decomposition_stats(g, dec)
    (out_dir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit_manifest(
        out_dir, "decompose",
        {"edges": edges, "strategy": strategy, "k": k, "p": p, "seed": seed,
         "skeleton": skeleton, "out": out},
        seed, [edges], started,
    )
    click.echo(
        f"k={dec.k} source={dec.source} "
        f"skeleton_edges={stats['skeleton_edges']} "
        f"duplication={stats['duplication_factor']:.4f}"
    )
    click.echo(f"wrote {out_dir}/piece_0.txt .. piece_{dec.k - 1}.txt")


@main.command()
@click.option("--which", "suites", multiple=True,
              type=click.Choice([name for name, _ in VERIFY_SUITES]),
              help="suite to run; repeatable; default all")
@click.option("--trials", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="also write report.json and a manifest here")
@_guarded
def verify(suites, trials, seed, out):
    """Run randomized identity suites and report pass counts."""
    started = time.time()
    names = list(suites) or [name for name, _ in VERIFY_SUITES]
    reports = []
    for name in names:
        rep = _SUITE_BY_NAME[name](trials=trials, seed=seed)
        reports.append((name, rep))
        click.echo(
            f"{name}: {rep.passed}/{rep.total} pass "
            f"(max err {rep.max_err:.3e})"
        )
    if out is not None:
        out_dir = _out_dir(out)
        payload = {
            name: {"passed": rep.passed, "total": rep.total,
                   "max_err": rep.max_err, "ok": rep.ok}
            for name, rep in reports
        }
        (out_dir / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        _emit_manifest(
            out_dir, "verify",
            {"which": names, "trials": trials, "seed": seed, "out": out},
            seed, [], started,
        )
    if any(not rep.ok for _, rep in reports):
        sys.exit(3)


@main.command()
@click.option("--edges", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--depths", default="1..8", show_default=True,
              callback=_int_list_option,
              help="depths to evaluate, e.g. 1..12 or 2,4,6")
@click.option("--dim", default=2, show_default=True, type=int,
              help="feature width of the probe stack")
@click.option("--sigma-w", default=0.5, show_default=True, type=float,
              help="largest singular value each weight is scaled to")
@click.option("--slope", default=0.2, show_default=True, type=float)
@click.option("--samples", default=16, show_default=True, type=int)
@click.option("--epsilon", default=1e-6, show_default=True, type=float)
@click.option("--input-scale", default=1.0, show_default=True, type=float,
              help="max-abs entry of the sampled inputs")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def decay(edges, depths, dim, sigma_w, slope, samples, epsilon, input_scale,
          seed, out):
    """Bound vs realized singular values and entropy across depth."""
    started = time.time()
    g = load_edge_list(edges)
    depths = sorted(set(depths))
    a_mat = normalized_adjacency(g)
    weights = [
        weights_with_top_singular((dim, dim), sigma_w, seed + 1 + i)
        for i in range(max(depths))
    ]
    stack = gcn_stack(a_mat, weights, slope=slope)
    inputs = [
        x * input_scale
        for x in random_unit_features(g.n, dim, samples, seed)
    ]
    rows = decay_curve(
        stack, depths, n_samples=samples, epsilon=epsilon, seed=seed,
        inputs=inputs,
    )
    out_dir = _out_dir(out)
    csv_path = out_dir / "decay.csv"
    write_decay_csv(rows, csv_path)
    _emit_manifest(
        out_dir, "decay",
        {"edges": edges, "depths": depths, "dim": dim, "sigma_w": sigma_w,
         "slope": slope, "samples": samples, "epsilon": epsilon,
         "input_scale": input_scale, "seed": seed, "out": out},
        seed, [edges], started,
    )
    last = rows[-1]
    click.echo(
        f"depths {depths[0]}..{depths[-1]}: final bound={last['bound']:.3e} "
        f"max_sv={last['max_sv']:.3e} entropy={last['entropy_bits']:.2f} bits"
    )
    click.echo(f"wrote {csv_path}")


def _model_config(config, backbone, depth, hidden, k):
    if config is not None:
        return load_model_config(config)
    return ModelConfig(
        backbone=_BACKBONE_ALIASES[backbone], depth=depth, hidden=hidden,
        k_schedule=tuple([k] * depth),
    )


@main.command()
@click.option("--config", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="key=value model file; overrides the model flags")
@click.option("--backbone", default="gcn", show_default=True,
              type=click.Choice(sorted(_BACKBONE_ALIASES)))
@click.option("--depth", default=2, show_default=True, type=int)
@click.option("--hidden", default=16, show_default=True, type=int)
@click.option("--k", default=1, show_default=True, type=int,
              help="pieces per layer (uniform schedule)")
@click.option("--decompose", "strategy", default="none", show_default=True,
              type=click.Choice(sorted(_STRATEGY_ALIASES)),
              help="adjacency decomposition fed to the model")
@click.option("--p", default=4, show_default=True, type=int)
@click.option("--discount/--no-discount", default=False, show_default=True,
              help="divide shared entries so the pieces sum to the original")
@click.option("--skeleton/--no-skeleton", default=True, show_default=True)
@_sbm_options
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def train(config, backbone, depth, hidden, k, strategy, p, discount,
          skeleton, nodes, blocks, p_in, p_out, dim, noise, data_seed, seed,
          out):
    """Train one model on a synthetic block-model graph."""
    started = time.time()
    cfg = _model_config(config, backbone, depth, hidden, k)
    data = _make_data(nodes, blocks, p_in, p_out, dim, noise, data_seed)
    source = _STRATEGY_ALIASES[strategy]
    result = train_model(
        cfg, data, source=source, seed=seed, p=p, discount=discount,
        with_skeleton=skeleton,
    )
    out_dir = _out_dir(out)
    write_history_csv(result, out_dir / "history.csv")
    summary = {
        "test_acc": result.test_acc,
        "best_epoch": result.best_epoch,
        "epochs_run": result.epochs_run,
        "final_train_loss": result.train_loss[-1],
        "best_val_acc": max(result.val_acc),
        "seed": result.seed,
    }
    (out_dir / "result.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    inputs = [config] if config is not None else []
    _emit_manifest(
        out_dir, "train",
        {"config": config, "backbone": backbone, "depth": cfg.depth,
         "hidden": cfg.hidden, "k": k, "decompose": strategy, "p": p,
         "discount": discount, "skeleton": skeleton, "nodes": nodes,
         "blocks": blocks, "p_in": p_in, "p_out": p_out, "dim": dim,
         "noise": noise, "data_seed": data_seed, "seed": seed, "out": out},
        seed, inputs, started,
    )
    click.echo(
        f"test_acc={result.test_acc:.4f} best_epoch={result.best_epoch} "
        f"epochs_run={result.epochs_run}"
    )
    click.echo(f"wrote {out_dir / 'history.csv'}")


@main.command()
@click.option("--k", "k_values", default="1..8", show_default=True,
              callback=_int_list_option,
              help="piece counts to sweep, e.g. 1..8 or 1,2,4")
@click.option("--seeds", default="0..4", show_default=True,
              callback=_int_list_option)
@click.option("--backbone", default="gcn", show_default=True,
              type=click.Choice(sorted(_BACKBONE_ALIASES)))
@click.option("--depth", default=2, show_default=True, type=int)
@click.option("--hidden", default=16, show_default=True, type=int)
@click.option("--decompose", "strategy", default="ca", show_default=True,
              type=click.Choice(sorted(_STRATEGY_ALIASES)))
@click.option("--p", default=4, show_default=True, type=int)
@click.option("--discount/--no-discount", default=False, show_default=True)
@click.option("--skeleton/--no-skeleton", default=True, show_default=True)
@_sbm_options
@click.option("--seed", default=0, show_default=True, type=int,
              help="offset added to every sweep seed")
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def ksweep(k_values, seeds, backbone, depth, hidden, strategy, p, discount,
           skeleton, nodes, blocks, p_in, p_out, dim, noise, data_seed, seed,
           out):
    """Sweep the number of decomposed pieces; one CSV row per run."""
    started = time.time()
    cfg = ModelConfig(
        backbone=_BACKBONE_ALIASES[backbone], depth=depth, hidden=hidden,
        k_schedule=tuple([1] * depth),
    )
    data = _make_data(nodes, blocks, p_in, p_out, dim, noise, data_seed)
    source = _STRATEGY_ALIASES[strategy]
    rows = k_sweep(
        cfg, data, k_values, [seed + s for s in seeds], source=source, p=p,
        discount=discount, with_skeleton=skeleton,
    )
    out_dir = _out_dir(out)
    csv_path = out_dir / "ksweep.csv"
    write_rows_csv(rows, KSWEEP_COLUMNS, csv_path)
    _emit_manifest(
        out_dir, "ksweep",
        {"k": k_values, "seeds": seeds, "backbone": backbone, "depth": depth,
         "hidden": hidden, "decompose": strategy, "p": p,
         "discount": discount, "skeleton": skeleton, "nodes": nodes,
         "blocks": blocks, "p_in": p_in, "p_out": p_out, "dim": dim,
         "noise": noise, "data_seed": data_seed, "seed": seed, "out": out},
        seed, [], started,
    )
    for row in rows:
        if row["kind"] == "aggregate":
            click.echo(
                f"k={row['k']}: mean={row['test_mean']:.4f} "
                f"std={row['test_std']:.4f}"
            )
    click.echo(f"wrote {csv_path}")


@main.command()
@click.option("--depths", default="2,4,6,8", show_default=True,
              callback=_int_list_option)
@click.option("--backbones", default="gcn", show_default=True,
              callback=_name_list_option(_BACKBONE_ALIASES),
              help="comma list, e.g. gcn,dense,res,jk")
@click.option("--decompose", "sources", default="none,ca", show_default=True,
              callback=_name_list_option(_STRATEGY_ALIASES),
              help="comma list of decomposition strategies to compare")
@click.option("--seeds", default="0..4", show_default=True,
              callback=_int_list_option)
@click.option("--hidden", default=16, show_default=True, type=int)
@click.option("--k", default=4, show_default=True, type=int,
              help="pieces per layer for decomposed cells")
@click.option("--p", default=4, show_default=True, type=int)
@click.option("--discount/--no-discount", default=False, show_default=True)
@click.option("--skeleton/--no-skeleton", default=True, show_default=True)
@_sbm_options
@click.option("--seed", default=0, show_default=True, type=int,
              help="offset added to every sweep seed")
@click.option("--out", default="degnn_out", show_default=True,
              type=click.Path(file_okay=False))
@_guarded
def depthsweep(depths, backbones, sources, seeds, hidden, k, p, discount,
               skeleton, nodes, blocks, p_in, p_out, dim, noise, data_seed,
               seed, out):
    """Compare depths, backbones, and decompositions; CSV per cell."""
    started = time.time()
    cfg = ModelConfig(
        backbone=backbones[0], depth=2, hidden=hidden, k_schedule=(1, 1),
    )
    data = _make_data(nodes, blocks, p_in, p_out, dim, noise, data_seed)
    rows = depth_sweep(
        cfg, data, depths, backbones, sources,
        [seed + s for s in seeds], k=k, p=p, discount=discount,
        with_skeleton=skeleton,
    )
    out_dir = _out_dir(out)
    csv_path = out_dir / "depthsweep.csv"
    write_rows_csv(rows, DEPTHSWEEP_COLUMNS, csv_path)
    _emit_manifest(
        out_dir, "depthsweep",
        {"depths": depths, "backbones": backbones, "decompose": sources,
         "seeds": seeds, "hidden": hidden, "k": k, "p": p,
         "discount": discount, "skeleton": skeleton, "nodes": nodes,
         "blocks": blocks, "p_in": p_in, "p_out": p_out, "dim": dim,
         "noise": noise, "data_seed": data_seed, "seed": seed, "out": out},
        seed, [], started,
    )
    for row in rows:
        if row["kind"] == "aggregate":
            click.echo(
                f"{row['backbone']} depth={row['depth']} "
                f"source={row['source']}: median={row['test_median']:.4f} "
                f"mean={row['test_mean']:.4f}"
            )
    click.echo(f"wrote {csv_path}")


if __name__ == "__main__":
    main()
