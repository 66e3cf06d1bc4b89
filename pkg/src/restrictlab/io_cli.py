"""CSV ingestion, built-in menus, report emission, and the command-line front end.

The CLI orchestrates; every number is produced by the library modules. All
output JSON embeds the parsed run configuration and the seed so a report is
reproducible from its own header. Config mistakes exit 2 before any file is
written; computation failures exit 3. Both print a one-line error JSON to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .complete import estimate_completeness, group_completeness
from .core import (
    BinaryLottery,
    Dataset,
    Game3x3,
    Menu,
    ProblemKind,
    ThreeOutcomeLottery,
)
from .errors import ConfigError, RestrictlabError
from .fit import OptConfig
from .models import parse_model
from .restrict import delta_histogram, estimate_restrictiveness
from .samplers import MuSpec, build_fosd_order, sample_mapping, substream


# ---------------------------------------------------------------------------
# Built-in menus and generators

# 18 three-outcome lotteries, in source order: three z1 levels against (24, 18),
# then three z2 levels between (24, 18), each under three probability profiles.
_BS18 = (
    (34, 24, 18, 0.1, 0.3, 0.6),
    (34, 24, 18, 0.4, 0.3, 0.3),
    (34, 24, 18, 0.6, 0.3, 0.1),
    (32, 24, 18, 0.1, 0.3, 0.6),
    (32, 24, 18, 0.4, 0.3, 0.3),
    (32, 24, 18, 0.6, 0.3, 0.1),
    (30, 24, 18, 0.1, 0.3, 0.6),
    (30, 24, 18, 0.4, 0.3, 0.3),
    (30, 24, 18, 0.6, 0.3, 0.1),
    (24, 23, 18, 0.3, 0.1, 0.6),
    (24, 23, 18, 0.3, 0.4, 0.3),
    (24, 23, 18, 0.3, 0.6, 0.1),
    (24, 21, 18, 0.3, 0.1, 0.6),
    (24, 21, 18, 0.3, 0.4, 0.3),
    (24, 21, 18, 0.3, 0.6, 0.1),
    (24, 19, 18, 0.3, 0.1, 0.6),
    (24, 19, 18, 0.3, 0.4, 0.3),
    (24, 19, 18, 0.3, 0.6, 0.1),
)

BUILTIN_MENUS = ("bernheim_sprenger_18",)


def builtin_menu(name: str) -> Menu:
    """A menu shipped with the package, uniform item weights."""
    if name != "bernheim_sprenger_18":
        raise ConfigError(
            f"unknown builtin menu {name!r}; available: {', '.join(BUILTIN_MENUS)}"
        )
    items = tuple(ThreeOutcomeLottery(*(float(v) for v in row)) for row in _BS18)
    return Menu(items, name=name)


def synthetic_gain_menu() -> Menu:
    """25 binary gain lotteries: five stake pairs crossed with five win probabilities."""
    stakes = ((20.0, 0.0), (40.0, 10.0), (50.0, 20.0), (80.0, 20.0), (100.0, 40.0))
    probs = (0.05, 0.25, 0.5, 0.75, 0.95)
    items = tuple(BinaryLottery(zh, zl, p) for zh, zl in stakes for p in probs)
    return Menu(items, name="synthetic_gain_25")


def make_random_games(n: int, seed: int) -> Menu:
    """n random 3x3 games; every payoff is an independent uniform integer in 0..100."""
    if n < 1:
        raise ConfigError("need at least one game")
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        r = rng.integers(0, 101, size=(3, 3))
        c = rng.integers(0, 101, size=(3, 3))
        items.append(
            Game3x3(
                f"g{i:03d}",
                tuple(tuple(float(v) for v in row) for row in r),
                tuple(tuple(float(v) for v in row) for row in c),
            )
        )
    return Menu(tuple(items), name=f"synthetic_games_{n}")


def menu_checksum(menu: Menu) -> str:
    """sha256 over the exact field values of every item, in menu order."""
    parts = [menu.item_kind]
    for it in menu.items:
        if isinstance(it, BinaryLottery):
            parts.append(f"{it.z_high!r},{it.z_low!r},{it.p!r}")
        elif isinstance(it, ThreeOutcomeLottery):
            parts.append(f"{it.z1!r},{it.z2!r},{it.z3!r},{it.p1!r},{it.p2!r},{it.p3!r}")
        else:
            flat = [f"{v!r}" for row in it.row_payoffs for v in row]
            flat += [f"{v!r}" for row in it.col_payoffs for v in row]
            parts.append(it.game_id + ":" + ",".join(flat))
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV ingestion


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, dict]]]:
    """Header plus (file line number, row dict) pairs; rejects ragged rows."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such file: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{p}: empty file, expected a CSV header")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        rows = []
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise ConfigError(f"{p}: row {reader.line_num} has the wrong field count")
            rows.append((reader.line_num, row))
    if not rows:
        raise ConfigError(f"{p}: no data rows")
    return header, rows


def _num(line: int, field: str, raw: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"row {line}: field {field!r} is not a number: {raw!r}") from None


def load_ce_dataset(path: str | Path) -> tuple[Menu, Dataset]:
    """Certainty-equivalent CSV to (menu of distinct lotteries, observations).

    Two shapes are accepted, told apart by the header: binary rows
    (subject_id, z_high, z_low, p, ce) and three-outcome rows
    (z1, z2, z3, p1, p2, p3, ce). A `cluster` column, when present, becomes
    the dataset's group labels. The menu is the set of distinct lotteries in
    lexicographic field order; rows mixing gain and loss domains are rejected.
    """
    header, rows = _read_rows(path)
    cols = set(header)
    if {"z_high", "z_low", "p", "ce"} <= cols:
        if "subject_id" not in cols:
            raise ConfigError(f"{path}: binary CE header needs a subject_id column")
        binary = True
    elif {"z1", "z2", "z3", "p1", "p2", "p3", "ce"} <= cols:
        binary = False
    else:
        raise ConfigError(
            f"{path}: unrecognized header {header}; expected subject_id,z_high,z_low,p,ce"
            " or z1,z2,z3,p1,p2,p3,ce"
        )
    has_cluster = "cluster" in cols

    keys: list[tuple] = []
    ces: list[float] = []
    groups: list[str] = []
    for line, row in rows:
        try:
            if binary:
                key = (
                    _num(line, "z_high", row["z_high"]),
                    _num(line, "z_low", row["z_low"]),
                    _num(line, "p", row["p"]),
                )
                BinaryLottery(*key)
            else:
                key = tuple(
                    _num(line, c, row[c]) for c in ("z1", "z2", "z3", "p1", "p2", "p3")
                )
                ThreeOutcomeLottery(*key)
        except ConfigError as exc:
            raise ConfigError(f"row {line}: {exc}") from None
        keys.append(key)
        ces.append(_num(line, "ce", row["ce"]))
        if has_cluster:
            groups.append(row["cluster"].strip())

    distinct = sorted(set(keys))
    if binary:
        items = tuple(BinaryLottery(*k) for k in distinct)
        domains = {it.domain for it in items}
        if len(domains) > 1:
            raise ConfigError(f"{path}: menu mixes gain and loss lotteries")
    else:
        items = tuple(ThreeOutcomeLottery(*k) for k in distinct)
    index = {k: i for i, k in enumerate(distinct)}
    menu = Menu(items, name=str(path))
    data = Dataset(
        np.array([index[k] for k in keys], dtype=np.int64),
        np.array(ces, dtype=float),
        np.array(groups) if has_cluster else None,
    )
    return menu, data


_PAYOFF_COLS = tuple(f"{side}{i}{j}" for side in "rc" for i in (1, 2, 3) for j in (1, 2, 3))


def load_game_dataset(path: str | Path) -> tuple[Menu, Dataset]:
    """Initial-play CSV to (menu of unique games, observed actions).

    Rows carry a game_id, 18 payoff columns r11..r33 and c11..c33, and either
    a 1-based `action` or aggregated counts n1, n2, n3 (expanded to one
    observation per subject). game_id is authoritative: identical payoffs
    under two ids are two menu items, while one id must keep identical
    payoffs everywhere it appears.
    """
    header, rows = _read_rows(path)
    cols = set(header)
    missing = [c for c in ("game_id", *_PAYOFF_COLS) if c not in cols]
    if missing:
        raise ConfigError(f"{path}: missing columns: {', '.join(missing)}")
    per_obs = "action" in cols
    aggregated = {"n1", "n2", "n3"} <= cols
    if per_obs == aggregated:
        raise ConfigError(
            f"{path}: need exactly one of an `action` column or n1,n2,n3 counts"
        )

    games: dict[str, tuple[int, tuple[float, ...]]] = {}
    order: list[str] = []
    item_idx: list[int] = []
    actions: list[int] = []
    for line, row in rows:
        gid = row["game_id"].strip()
        payoffs = tuple(_num(line, c, row[c]) for c in _PAYOFF_COLS)
        if gid in games:
            if games[gid][1] != payoffs:
                raise ConfigError(f"row {line}: game {gid!r} reappears with different payoffs")
            idx = games[gid][0]
        else:
            idx = len(order)
            games[gid] = (idx, payoffs)
            order.append(gid)
        if per_obs:
            a = _num(line, "action", row["action"])
            if a not in (1.0, 2.0, 3.0):
                raise ConfigError(f"row {line}: action {row['action']!r} not in {{1, 2, 3}}")
            item_idx.append(idx)
            actions.append(int(a) - 1)
        else:
            for k, col in enumerate(("n1", "n2", "n3")):
                cnt = _num(line, col, row[col])
                if cnt < 0 or cnt != int(cnt):
                    raise ConfigError(f"row {line}: count {col}={row[col]!r} is not a whole number")
                item_idx.extend([idx] * int(cnt))
                actions.extend([k] * int(cnt))
    if not item_idx:
        raise ConfigError(f"{path}: all observation counts are zero")

    items = []
    for gid in order:
        flat = games[gid][1]
        r = tuple(tuple(flat[3 * i + j] for j in range(3)) for i in range(3))
        c = tuple(tuple(flat[9 + 3 * i + j] for j in range(3)) for i in range(3))
        items.append(Game3x3(gid, r, c))
    menu = Menu(tuple(items), name=str(path))
    data = Dataset(np.array(item_idx, dtype=np.int64), np.array(actions, dtype=np.int64))
    return menu, data


# ---------------------------------------------------------------------------
# Mapping sample dump / reload


def dump_mapping_samples(path: str | Path, draws: np.ndarray, menu: Menu) -> None:
    """Write sampled mappings as CSV, one draw per row, bit-exact via repr."""
    draws = np.asarray(draws, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if draws.ndim == 2:
            writer.writerow(["draw"] + [f"item{i}" for i in range(draws.shape[1])])
            for m, row in enumerate(draws):
                writer.writerow([m] + [repr(float(v)) for v in row])
        elif draws.ndim == 3 and draws.shape[2] == 3:
            head = [f"item{i}_a{k + 1}" for i in range(draws.shape[1]) for k in range(3)]
            writer.writerow(["draw"] + head)
            for m, block in enumerate(draws):
                writer.writerow([m] + [repr(float(v)) for v in block.ravel()])
        else:
            raise ConfigError(f"unexpected sample shape {draws.shape}")


def read_mapping_samples(path: str | Path) -> np.ndarray:
    """Reload a dump_mapping_samples CSV; inverse of the dump, bit for bit."""
    header, rows = _read_rows(path)
    ncol = len(header) - 1
    vals = np.array(
        [[float(row[c]) for c in header[1:]] for _, row in rows], dtype=float
    )
    if header[-1].endswith("_a3"):
        return vals.reshape(len(rows), ncol // 3, 3)
    return vals


# ---------------------------------------------------------------------------
# Run configuration


@dataclasses.dataclass
class RunConfig:
    """Everything a subcommand run depends on, embedded in each output JSON."""

    command: str
    models: list[str]
    menu_source: str = ""
    data_path: str = ""
    mu: str = "uniform-fosd"
    kind: str = "mean"
    M: int = 100
    K: int = 10
    B: int = 200
    seed: int = 0
    alpha: float = 0.05
    outdir: str = "."
    weights: str = "uniform"
    epsilon: float = 0.5
    grid_points: int = 200
    n_starts: int = 20
    max_iters: int = 500
    by_cluster: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha {self.alpha} outside (0, 1)")
        for field, lo in (("M", 2), ("K", 2), ("B", 1), ("grid_points", 2), ("n_starts", 1)):
            if getattr(self, field) < lo:
                raise ConfigError(f"{field} must be at least {lo}")
        if self.weights not in ("uniform", "empirical"):
            raise ConfigError(f"weights mode {self.weights!r} not in (uniform, empirical)")
        if self.kind not in ("mean", "median"):
            raise ConfigError(f"kind {self.kind!r} not in (mean, median)")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")

    @property
    def level(self) -> float:
        return 1.0 - self.alpha

    def opt_config(self) -> OptConfig:
        return OptConfig(
            n_starts=self.n_starts,
            max_iters=self.max_iters,
            grid_points=self.grid_points,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_mu(text: str) -> MuSpec:
    """MuSpec from a flag value: uniform-fosd | beta-fosd:a,b | range-only."""
    head, _, arg = text.partition(":")
    if head == "beta-fosd":
        try:
            a_str, b_str = arg.split(",")
            return MuSpec("beta-fosd", a=float(a_str), b=float(b_str))
        except ValueError:
            raise ConfigError(f"beta mu needs the form beta-fosd:a,b, got {text!r}") from None
    if arg:
        raise ConfigError(f"mu {head!r} takes no arguments")
    return MuSpec(head)


def resolve_menu(source: str) -> tuple[Menu, Dataset | None]:
    """Menu (and dataset, when the source is a data file) from a CLI source string.

    Forms: builtin:NAME, synthetic-ce-25, synthetic-games:N[:SEED],
    ce-csv:PATH, games-csv:PATH.
    """
    head, _, arg = source.partition(":")
    if head == "builtin":
        return builtin_menu(arg), None
    if head == "synthetic-ce-25":
        return synthetic_gain_menu(), None
    if head == "synthetic-games":
        parts = arg.split(":") if arg else []
        if not parts or not parts[0]:
            raise ConfigError("synthetic-games needs a count: synthetic-games:N[:SEED]")
        n = int(parts[0])
        gen_seed = int(parts[1]) if len(parts) > 1 else 0
        return make_random_games(n, gen_seed), None
    if head == "ce-csv":
        return load_ce_dataset(arg)
    if head == "games-csv":
        return load_game_dataset(arg)
    raise ConfigError(f"unknown menu source {source!r}")


def empirical_weights(menu: Menu, data: Dataset) -> Menu:
    """The menu reweighted by observation frequencies."""
    counts = np.bincount(data.item_index, minlength=len(menu)).astype(float)
    if counts.sum() <= 0:
        raise ConfigError("empirical weights need at least one observation")
    return Menu(menu.items, counts / counts.sum(), name=menu.name)


_MODEL_HEADS = ("cpt", "cpt-loss", "cpt3", "pchm", "logit-level1", "logit-pchm", "table")


def split_model_list(spec: str) -> list[str]:
    """Split a comma-separated model list, keeping commas inside parameter lists.

    'cpt:alpha,cpt:alpha,gamma' is two models: a fragment starts a new model
    only when it begins with a known family name; anything else continues the
    previous model's parameter list.
    """
    models: list[str] = []
    for frag in (f.strip() for f in spec.split(",")):
        if not frag:
            continue
        if frag.partition(":")[0] in _MODEL_HEADS or not models:
            models.append(frag)
        else:
            models[-1] += "," + frag
    return models


def _data_kind(menu: Menu, cfg: RunConfig) -> ProblemKind:
    if menu.item_kind == "game":
        return ProblemKind.DISTRIBUTION
    return ProblemKind.MEDIAN if cfg.kind == "median" else ProblemKind.MEAN


# ---------------------------------------------------------------------------
# Subcommands


def _write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    doc = {"config": cfg.to_dict(), "seed": cfg.seed}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _cmd_restrict(cfg: RunConfig) -> list[Path]:
    menu, data = resolve_menu(cfg.menu_source)
    if cfg.weights == "empirical":
        if data is None:
            raise ConfigError("empirical weights need a data-file menu source")
        menu = empirical_weights(menu, data)
    model = parse_model(cfg.models[0], menu)
    report = estimate_restrictiveness(
        model, menu, parse_mu(cfg.mu), cfg.M, cfg.seed, cfg.level, cfg.opt_config()
    )
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "restrict_report.json"
    _write_json(json_path, cfg, {"restrictiveness": report.to_dict()})
    counts, edges = delta_histogram(report.deltas)
    hist_path = out / "restrict_deltas_hist.csv"
    with open(hist_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for k, c in enumerate(counts):
            writer.writerow([repr(float(edges[k])), repr(float(edges[k + 1])), int(c)])
    return [json_path, hist_path]


def _cmd_complete(cfg: RunConfig) -> list[Path]:
    menu, data = resolve_menu(cfg.menu_source)
    if data is None:
        raise ConfigError("complete needs a data-file menu source (ce-csv: or games-csv:)")
    kind = _data_kind(menu, cfg)
    model = parse_model(cfg.models[0], menu)
    out = Path(cfg.outdir)
    if cfg.by_cluster:
        if data.group is None:
            raise ConfigError("--by-cluster needs a cluster column in the data")
        result = group_completeness(
            model, data, kind, menu, cfg.K, cfg.seed, cfg.level, cfg.opt_config(), cfg.epsilon
        )
        payload = {"completeness_by_cluster": result.to_dict()}
    else:
        report = estimate_completeness(
            model, data, kind, menu, cfg.K, cfg.seed, cfg.level, cfg.opt_config(), cfg.epsilon
        )
        payload = {"completeness": report.to_dict()}
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "complete_report.json"
    _write_json(json_path, cfg, payload)
    return [json_path]


def _cmd_compare(cfg: RunConfig) -> list[Path]:
    menu, data = resolve_menu(cfg.menu_source)
    if data is None:
        raise ConfigError("compare needs a data-file menu source (ce-csv: or games-csv:)")
    kind = _data_kind(menu, cfg)
    r_menu = empirical_weights(menu, data) if cfg.weights == "empirical" else menu
    mu = parse_mu(cfg.mu)
    rows = []
    for spec in cfg.models:
        model = parse_model(spec, menu)
        comp = estimate_completeness(
            model, data, kind, menu, cfg.K, cfg.seed, cfg.level, cfg.opt_config(), cfg.epsilon
        )
        restr = estimate_restrictiveness(
            model, r_menu, mu, cfg.M, cfg.seed, cfg.level, cfg.opt_config()
        )
        rows.append(
            {
                "model": spec,
                "kappa_hat": comp.kappa_hat,
                "kappa_se": comp.sigma_hat / np.sqrt(comp.N),
                "N": comp.N,
                "r_hat": restr.r_hat,
                "r_se": restr.sigma_hat / np.sqrt(restr.M),
                "M": restr.M,
            }
        )
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "compare.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "kappa_hat", "kappa_se", "N", "r_hat", "r_se", "M"])
        for row in rows:
            writer.writerow(
                [
                    row["model"],
                    repr(float(row["kappa_hat"])),
                    repr(float(row["kappa_se"])),
                    row["N"],
                    repr(float(row["r_hat"])),
                    repr(float(row["r_se"])),
                    row["M"],
                ]
            )
    json_path = out / "compare.json"
    _write_json(json_path, cfg, {"rows": [dict(r) for r in rows]})
    return [csv_path, json_path]


def _cmd_sample(cfg: RunConfig) -> list[Path]:
    menu, _ = resolve_menu(cfg.menu_source)
    mu = parse_mu(cfg.mu)
    order = build_fosd_order(menu) if menu.is_lottery_menu and mu.kind != "range-only" else None
    draws = np.stack(
        [sample_mapping(menu, mu, substream(cfg.seed, m), order) for m in range(cfg.M)]
    )
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "samples.csv"
    dump_mapping_samples(path, draws, menu)
    return [path]


def _cmd_report(cfg: RunConfig) -> list[Path]:
    return render_report(cfg.data_path or cfg.outdir, cfg.outdir)


# ---------------------------------------------------------------------------
# Report rendering


def render_report(input_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Markdown summary plus PNG figures from previously written artifacts."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    src = Path(input_dir)
    out = Path(out_dir)
    found = [p for p in ("restrict_report.json", "complete_report.json", "compare.csv") if (src / p).exists()]
    if not found:
        raise ConfigError(f"nothing to report on in {src} (no report JSON or compare.csv)")
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    lines = ["# Run report", ""]

    if (src / "restrict_report.json").exists():
        doc = json.loads((src / "restrict_report.json").read_text(encoding="utf-8"))
        rep = doc["restrictiveness"]
        lines += [
            "## Restrictiveness",
            "",
            f"- model: `{rep['model']}`, mu: `{rep['mu']}`, M = {rep['M']}, seed = {rep['seed']}",
            f"- r_hat = {rep['r_hat']:.4f}, sigma_hat = {rep['sigma_hat']:.4f}",
        ]
        if rep["ci"] is not None:
            lines.append(
                f"- {100 * rep['level']:.0f}% CI: [{rep['ci'][0]:.4f}, {rep['ci'][1]:.4f}]"
            )
        else:
            lines.append("- degenerate draw set: all deltas identical, no CI")
        lines.append("")
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(rep["deltas"], bins=20, range=(0, 1), color="#4878d0", edgecolor="white")
        ax.axvline(rep["r_hat"], color="#d65f5f", lw=2, label=f"r_hat = {rep['r_hat']:.3f}")
        ax.set_xlabel("f-discrepancy")
        ax.set_ylabel("draws")
        ax.legend()
        fig.tight_layout()
        png = out / "restrict_deltas.png"
        fig.savefig(png, dpi=120)
        plt.close(fig)
        written.append(png)
        lines += [f"![delta histogram]({png.name})", ""]

    if (src / "complete_report.json").exists():
        doc = json.loads((src / "complete_report.json").read_text(encoding="utf-8"))
        if "completeness" in doc:
            rep = doc["completeness"]
            lines += [
                "## Completeness",
                "",
                f"- model: `{rep['model']}`, K = {rep['K']}, N = {rep['N']}, seed = {rep['seed']}",
                f"- CV errors: naive {rep['cv_naive']:.4f}, model {rep['cv_model']:.4f},"
                f" unrestricted {rep['cv_unrestricted']:.4f}",
                f"- kappa_hat = {rep['kappa_hat']:.4f},"
                f" {100 * rep['level']:.0f}% CI [{rep['ci'][0]:.4f}, {rep['ci'][1]:.4f}]",
                "",
            ]
            fig, ax = plt.subplots(figsize=(6, 2.4))
            ax.errorbar(
                [rep["kappa_hat"]],
                [0],
                xerr=[[rep["kappa_hat"] - rep["ci"][0]], [rep["ci"][1] - rep["kappa_hat"]]],
                fmt="o",
                color="#4878d0",
                capsize=4,
            )
            ax.set_yticks([])
            ax.set_xlim(min(0.0, rep["ci"][0] - 0.05), max(1.0, rep["ci"][1] + 0.05))
            ax.set_xlabel("kappa_hat with CI")
            fig.tight_layout()
            png = out / "complete_kappa.png"
            fig.savefig(png, dpi=120)
            plt.close(fig)
            written.append(png)
            lines += [f"![completeness]({png.name})", ""]
        else:
            groups = doc["completeness_by_cluster"]
            lines += [
                "## Completeness by cluster",
                "",
                f"- weighted kappa = {groups['weighted_kappa']:.4f}",
                "",
                "| cluster | kappa_hat | CI | N |",
                "| --- | --- | --- | --- |",
            ]
            for g, rep in sorted(groups["groups"].items()):
                lines.append(
                    f"| {g} | {rep['kappa_hat']:.4f} |"
                    f" [{rep['ci'][0]:.4f}, {rep['ci'][1]:.4f}] | {rep['N']} |"
                )
            for g, msg in sorted(groups["failures"].items()):
                lines.append(f"| {g} | failed: {msg} | | |")
            lines.append("")
            fig, ax = plt.subplots(figsize=(6, 4))
            names = sorted(groups["groups"])
            ks = [groups["groups"][g]["kappa_hat"] for g in names]
            ax.bar(names, ks, color="#4878d0")
            ax.set_ylabel("kappa_hat")
            ax.set_ylim(0, 1.05)
            fig.tight_layout()
            png = out / "complete_clusters.png"
            fig.savefig(png, dpi=120)
            plt.close(fig)
            written.append(png)
            lines += [f"![cluster completeness]({png.name})", ""]

    if (src / "compare.csv").exists():
        _, rows = _read_rows(src / "compare.csv")
        lines += [
            "## Model comparison",
            "",
            "| model | kappa_hat | SE | N | r_hat | SE | M |",
            "| --- | --- | --- | --- | --- | --- | --- |",
        ]
        names, rvals, kvals = [], [], []
        for _, row in rows:
            lines.append(
                f"| {row['model']} | {float(row['kappa_hat']):.4f} |"
                f" {float(row['kappa_se']):.4f} | {row['N']} |"
                f" {float(row['r_hat']):.4f} | {float(row['r_se']):.4f} | {row['M']} |"
            )
            names.append(row["model"])
            rvals.append(float(row["r_hat"]))
            kvals.append(float(row["kappa_hat"]))
        lines.append("")
        x = np.arange(len(names))
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(x - 0.2, rvals, width=0.4, label="restrictiveness", color="#4878d0")
        ax.bar(x + 0.2, kvals, width=0.4, label="completeness", color="#d65f5f")
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylim(0, 1.05)
        ax.legend()
        fig.tight_layout()
        png = out / "compare.png"
        fig.savefig(png, dpi=120)
        plt.close(fig)
        written.append(png)
        lines += [f"![model comparison]({png.name})", ""]

    md = out / "report.md"
    md.write_text("\n".join(lines), encoding="utf-8")
    return [md] + written


# ---------------------------------------------------------------------------
# Argument parsing and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="restrictlab",
        description="Restrictiveness and completeness of parametric behavioral models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--alpha", type=float, default=0.05, help="CI significance level")
        p.add_argument("--grid-points", type=int, default=200)
        p.add_argument("--n-starts", type=int, default=20)
        p.add_argument("--max-iters", type=int, default=500)

    p = sub.add_parser("restrict", help="Monte Carlo restrictiveness of one model")
    p.add_argument("--model", required=True, help="e.g. cpt3:alpha,gamma,eta or pchm")
    p.add_argument("--menu", required=True, help="builtin:NAME, synthetic-ce-25, synthetic-games:N[:SEED], ce-csv:PATH, games-csv:PATH")
    p.add_argument("--mu", default="uniform-fosd", help="uniform-fosd, beta-fosd:a,b, or range-only")
    p.add_argument("--M", type=int, default=100, help="number of sampled mappings")
    p.add_argument("--weights", default="uniform", help="menu weights: uniform or empirical")
    common(p)

    p = sub.add_parser("complete", help="K-fold completeness of one model on data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="ce-csv:PATH or games-csv:PATH")
    p.add_argument("--kind", default="mean", help="loss for CE data: mean or median")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=0.5, help="frequency smoothing")
    p.add_argument("--by-cluster", action="store_true", help="per-cluster reports")
    common(p)

    p = sub.add_parser("compare", help="restrictiveness + completeness for several models")
    p.add_argument("--models", required=True, help="comma-separated model ids")
    p.add_argument("--data", help="ce-csv:PATH or games-csv:PATH")
    p.add_argument("--games", help="shorthand for --data games-csv:PATH")
    p.add_argument("--mu", default="uniform-fosd")
    p.add_argument("--M", type=int, default=100)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--kind", default="mean")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--weights", default="uniform")
    common(p)

    p = sub.add_parser("sample", help="dump the sampled mappings a restrict run would use")
    p.add_argument("--menu", required=True)
    p.add_argument("--mu", default="uniform-fosd")
    p.add_argument("--M", type=int, default=100)
    common(p)

    p = sub.add_parser("report", help="render markdown + figures from written artifacts")
    p.add_argument("--from", dest="input_dir", default="", help="directory with report JSON/CSV (default: --out)")
    common(p)

    return parser


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    kwargs = dict(
        command=ns.command,
        seed=ns.seed,
        alpha=ns.alpha,
        outdir=ns.out,
        grid_points=ns.grid_points,
        n_starts=ns.n_starts,
        max_iters=ns.max_iters,
    )
    if ns.command == "restrict":
        kwargs.update(
            models=[ns.model], menu_source=ns.menu, mu=ns.mu, M=ns.M, weights=ns.weights
        )
    elif ns.command == "complete":
        kwargs.update(
            models=[ns.model],
            menu_source=ns.data,
            kind=ns.kind,
            K=ns.K,
            epsilon=ns.epsilon,
            by_cluster=ns.by_cluster,
        )
    elif ns.command == "compare":
        data = ns.data or (f"games-csv:{ns.games}" if ns.games else None)
        if not data:
            raise ConfigError("compare needs --data (or --games PATH)")
        models = split_model_list(ns.models)
        if not models:
            raise ConfigError("compare needs at least one model id")
        kwargs.update(
            models=models,
            menu_source=data,
            mu=ns.mu,
            M=ns.M,
            K=ns.K,
            kind=ns.kind,
            epsilon=ns.epsilon,
            weights=ns.weights,
        )
    elif ns.command == "sample":
        kwargs.update(models=[], menu_source=ns.menu, mu=ns.mu, M=ns.M)
    else:
        kwargs.update(models=[], data_path=ns.input_dir)
    return RunConfig(**kwargs)


_COMMANDS = {
    "restrict": _cmd_restrict,
    "complete": _cmd_complete,
    "compare": _cmd_compare,
    "sample": _cmd_sample,
    "report": _cmd_report,
}


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def run_cli(argv: list[str] | None = None) -> int:
    """Parse and run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        _emit_error("config", "invalid command line")
        return 2
    try:
        cfg = _config_from_args(ns)
        written = _COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        _emit_error("config", str(exc))
        return 2
    except RestrictlabError as exc:
        _emit_error("computation", str(exc))
        return 3
    for path in written:
        print(path)
    return 0


def main() -> None:
    sys.exit(run_cli())
