"""End-to-end runs: reference-table generation, calibration, simulation
study and prediction, driven by a :class:`~cpfabc.config.RunConfig`."""

from __future__ import annotations

import csv
import json
import logging
import multiprocessing as mp
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .abc import METHODS, PosteriorResult, ReferenceTable, fit_uwqrf, run_method
from .config import RunConfig
from .cpf import visitation_field
from .errors import ChecksumError, ConfigError, FormatError, PredictiveFailure
from .evaluation import SimStudyReport, bayes_pvalues, method_label, pca_check, posterior_predictive
from .landscape import load_raster, save_grid, synthetic_raster
from .obsmodel import Dataset, FieldStore, ParamVector, _draw_one, simulate_dataset, synthetic_design
from .sumstats import SummarySpec, build_spec, scale_statistics, summarize, summarize_counts

log = logging.getLogger(__name__)

__all__ = [
    "World",
    "build_world",
    "simulate_rows",
    "generate_table",
    "load_table",
    "calibrate",
    "simstudy",
    "predict",
    "report",
]


@dataclass(eq=False)
class World:
    config: RunConfig
    store: FieldStore
    design: object
    spec: SummarySpec
    prior: object

    @property
    def param_names(self) -> list[str]:
        return self.prior.names()


def build_world(cfg: RunConfig) -> World:
    """Landscapes, attribute maps, survey design and summary layout."""
    ls = cfg.landscape
    if ls.rasters:
        try:
            rasters = [load_raster(p) for p in ls.rasters]
        except OSError as exc:
            raise ConfigError(f"cannot read raster: {exc}") from exc
    else:
        syn = ls.synthetic
        n_fields = max(1, syn.width * syn.height // syn.cells_per_field)
        rasters = [synthetic_raster(syn.width, syn.height, syn.resolution, n_fields,
                                    seed=np.random.SeedSequence(syn.seed, spawn_key=(k,)),
                                    id=f"L{k:03d}") for k in range(syn.count)]
    profiles = ls.profile_map(cfg.design.n_periods)
    store = FieldStore(rasters, profiles, ls.attribute_seed)
    d = cfg.design
    design = synthetic_design(rasters, d.habitats, d.transects_per_habitat, d.years, d.n_periods,
                              d.transect_cells, d.exposure, d.window, d.seed)
    return World(cfg, store, design, build_spec(design), cfg.prior_spec())


# ---------------------------------------------------------------------------
# reference table


def _row_rng(seed: int, m: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m,)))


def simulate_rows(world: World, rows, seed: int):
    """Parameters, simulation seeds and statistics for table rows ``rows``.

    Row ``m`` only depends on ``(seed, m)``.
    """
    rows = list(rows)
    P = np.empty((len(rows), world.prior.dim))
    seeds = np.empty(len(rows), dtype=np.int64)
    counts = np.empty((len(rows), world.design.n_records), dtype=np.int64)
    for k, m in enumerate(rows):
        rng = _row_rng(seed, m)
        P[k] = _draw_one(world.prior, rng)
        seeds[k] = int(rng.integers(0, 2**63 - 1))
        psi = ParamVector.from_array(P[k])
        counts[k] = simulate_dataset(psi, world.design, world.store, seeds[k]).count
    return P, seeds, summarize_counts(counts, world.spec)


def _row_line(m, params, stats) -> str:
    return ",".join([str(int(m))] + [repr(float(v)) for v in params] + [repr(float(v)) for v in stats])


def _crc(line: str) -> int:
    return zlib.crc32(line.encode())


_WORKER: dict = {}


def _worker_rows(task):
    rows = task
    with threadpool_limits(1):
        return rows, simulate_rows(_WORKER["world"], rows, _WORKER["seed"])


def _pool(workers: int):
    return mp.get_context("fork").Pool(workers)


def generate_table(cfg: RunConfig, path, workers: int | None = None, resume: bool = False,
                   world: World | None = None) -> ReferenceTable:
    """Write the reference table to ``path`` (CSV) with a ``.json`` sidecar.

    Rows are appended chunk by chunk and the sidecar is refreshed after
    each chunk, so an interrupted run can be resumed; rows whose checksum
    does not match are regenerated. The final file is sorted by row.
    """
    world = world or build_world(cfg)
    workers = cfg.workers if workers is None else workers
    path = Path(path)
    side = path.with_suffix(path.suffix + ".json")
    names = world.param_names
    stat_names = world.spec.names()
    header = ",".join(["row"] + names + stat_names)
    M = cfg.table.M
    meta = {"spec_hash": world.spec.hash, "seed": cfg.seed, "M": M, "names": names,
            "stat_names": stat_names, "version": __version__}
    sim_seeds: dict[int, int] = {}

    done: dict[int, str] = {}
    if resume and path.exists() and side.exists():
        old = json.loads(side.read_text())
        if any(old.get(k) != meta[k] for k in ("spec_hash", "seed", "names", "stat_names")):
            raise ConfigError(f"{path}: existing table was built with different settings")
        crcs = {int(k): v for k, v in old.get("crc", {}).items()}
        sim_seeds.update({int(k): v for k, v in old.get("sim_seed", {}).items()})
        with open(path) as fh:
            lines = fh.read().split("\n")
        for line in lines[1:]:
            if not line:
                continue
            m = line.split(",", 1)[0]
            try:
                m = int(m)
            except ValueError:
                continue
            if m < M and crcs.get(m) == _crc(line) and m in sim_seeds:
                done[m] = line
        log.info("resuming: %d of %d rows valid", len(done), M)
    todo = [m for m in range(M) if m not in done]

    crc = {m: _crc(line) for m, line in done.items()}

    def flush():
        side.write_text(json.dumps({**meta, "crc": {str(k): crc[k] for k in sorted(crc)},
                                    "sim_seed": {str(k): sim_seeds[k] for k in sorted(crc)}}))

    with open(path, "w") as fh:
        fh.write(header + "\n")
        for m in sorted(done):
            fh.write(done[m] + "\n")
    flush()
    chunks = [todo[i:i + cfg.table.chunk] for i in range(0, len(todo), cfg.table.chunk)]
    _WORKER.update(world=world, seed=cfg.seed)
    try:
        if workers > 1 and len(chunks) > 1:
            pool = _pool(workers)
            results = pool.imap(_worker_rows, chunks)
        else:
            pool = None
            results = map(_worker_rows, chunks)
        with open(path, "a") as fh:
            for rows, (P, seeds, S) in results:
                for k, m in enumerate(rows):
                    line = _row_line(m, P[k], S[k])
                    sim_seeds[m] = int(seeds[k])
                    done[m] = line
                    crc[m] = _crc(line)
                    fh.write(line + "\n")
                fh.flush()
                flush()
        if pool is not None:
            pool.close()
            pool.join()
    finally:
        _WORKER.clear()
    # final pass: sorted rows and per-row simulation seeds
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for m in range(M):
            fh.write(done[m] + "\n")
    flush()
    return load_table(path)


def load_table(path) -> ReferenceTable:
    """Read a table written by :func:`generate_table`, checking every row."""
    path = Path(path)
    side = path.with_suffix(path.suffix + ".json")
    try:
        meta = json.loads(side.read_text())
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read reference table {path}: {exc}") from exc
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise FormatError(f"{path}: empty file")
    names, stat_names = meta["names"], meta["stat_names"]
    if lines[0] != ",".join(["row"] + names + stat_names):
        raise FormatError(f"{path}: header does not match its sidecar")
    crcs = meta.get("crc", {})
    sim = meta.get("sim_seed", {})
    rows, data = [], []
    p = len(names)
    for line in lines[1:]:
        m = int(line.split(",", 1)[0])
        if crcs.get(str(m)) != _crc(line):
            raise ChecksumError(f"{path}: row {m} fails its checksum")
        vals = line.split(",")
        if len(vals) != 1 + p + len(stat_names):
            raise FormatError(f"{path}: row {m} has {len(vals)} fields")
        rows.append(m)
        data.append([float(v) for v in vals[1:]])
    if sorted(rows) != list(range(meta["M"])):
        raise FormatError(f"{path}: rows missing; rerun with --resume")
    arr = np.array(data)
    seeds = np.array([sim.get(str(m), m) for m in rows], dtype=np.int64)
    return ReferenceTable(arr[:, :p], arr[:, p:], tuple(names), seeds, meta["spec_hash"],
                          tuple(stat_names))


# ---------------------------------------------------------------------------
# outputs


def _manifest(cfg: RunConfig, outdir: Path, extra: dict | None = None) -> None:
    import numba
    import scipy

    outdir.mkdir(parents=True, exist_ok=True)
    cfg.save(outdir / "config.resolved.yaml")
    info = {"seed": cfg.seed, "package": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}
    info.update(extra or {})
    (outdir / "manifest.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def _run_label(run) -> str:
    return METHODS[run.method] + ("" if run.epsilon is None else f" {100 * run.epsilon:g}%")


def _slug(label: str) -> str:
    return label.replace(" ", "_").replace("%", "pct").replace(".", "p")


def calibrate(cfg: RunConfig, table: ReferenceTable, observed: Dataset, outdir=None,
              world: World | None = None) -> list[PosteriorResult]:
    """Run every configured method on one observed dataset."""
    world = world or build_world(cfg)
    if table.spec_hash and table.spec_hash != world.spec.hash:
        raise ConfigError("reference table was built for a different survey design")
    obs = summarize(observed, world.spec)
    scaler = scale_statistics(table.stats)
    results = []
    for k, run in enumerate(cfg.abc.runs):
        mcfg = cfg.method_config(run.epsilon, _sub(cfg.seed, 11, k))
        results.append(run_method(run.method, table, obs, mcfg, scaler=scaler))
    if outdir is not None:
        outdir = Path(outdir)
        _manifest(cfg, outdir, {"spec_hash": world.spec.hash})
        _write_posteriors(results, outdir)
    return results


def _write_posteriors(results, outdir: Path) -> None:
    cols = ["parameter", "method", "q2.5", "q50", "q97.5", "mean", "point", "failure"]
    with open(outdir / "posterior.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for res in results:
            lab = method_label(res)
            for row in res.to_rows():
                row["method"] = lab
                w.writerow([repr(float(row[c])) if isinstance(row[c], (float, np.floating)) else row[c]
                            for c in cols])
    for res in results:
        res.to_csv(outdir / f"posterior_{_slug(method_label(res))}.csv")


def _sub(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF, *key])
               .generate_state(1)[0] & 0x7FFFFFFF)


def select_references(cfg: RunConfig, M: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2**31 - 1,)))
    if cfg.simstudy.n_ref >= M:
        raise ConfigError("n_ref must be smaller than the table size")
    return np.sort(rng.choice(M, size=cfg.simstudy.n_ref, replace=False))


def _study_task(task):
    ref_pos, run_idx = task
    st = _WORKER
    cfg, train, table, refs, scaler = st["cfg"], st["train"], st["table"], st["refs"], st["scaler"]
    run = cfg.abc.runs[run_idx]
    obs = table.stats[refs[ref_pos]]
    mcfg = cfg.method_config(run.epsilon, _sub(cfg.seed, 13, int(refs[ref_pos]), run_idx))
    with threadpool_limits(1):
        if run.method == "uwqrf":
            res = run_method("uwqrf", train, obs, mcfg, forests=st["forests"])
        else:
            res = run_method(run.method, train, obs, mcfg, scaler=scaler)
    return task, res


def _forest_task(i):
    cfg, train = _WORKER["cfg"], _WORKER["train"]
    with threadpool_limits(1):
        return i, fit_uwqrf(train, cfg.method_config(None, _sub(cfg.seed, 12)), only=i)[0]


def simstudy(cfg: RunConfig, table: ReferenceTable, outdir=None, workers: int | None = None) -> SimStudyReport:
    """Leave-references-out study.

    ``n_ref`` rows act as pseudo-observations; every method is calibrated on
    the table without any reference row. Results are assembled in a fixed
    order, so outputs do not depend on ``workers``.
    """
    workers = cfg.workers if workers is None else workers
    refs = select_references(cfg, table.M)
    train = table.drop(refs)
    _WORKER.clear()
    _WORKER.update(cfg=cfg, train=train, table=table, refs=refs, scaler=scale_statistics(train.stats))
    tasks = [(r, k) for r in range(refs.size) for k in range(len(cfg.abc.runs))]
    need_forests = any(run.method == "uwqrf" for run in cfg.abc.runs)
    try:
        pool = _pool(workers) if workers > 1 else None
        forests = [None] * table.p
        if need_forests:
            it = pool.imap(_forest_task, range(table.p)) if pool else map(_forest_task, range(table.p))
            for i, f in it:
                forests[i] = f
            if pool:
                # workers must see the forests: restart them after the fit
                pool.close()
                pool.join()
        _WORKER["forests"] = forests
        if pool and need_forests:
            pool = _pool(workers)
        it = pool.imap(_study_task, tasks, chunksize=1) if pool else map(_study_task, tasks)
        out = {}
        for task, res in it:
            out[task] = res
            log.info("ref %d, %s done", task[0], _run_label(cfg.abc.runs[task[1]]))
        if pool:
            pool.close()
            pool.join()
    finally:
        _WORKER.clear()
    results = [(int(refs[r]), table.params[refs[r]], out[(r, k)]) for r, k in tasks]
    report = SimStudyReport.from_results(results, table.names)
    if outdir is not None:
        outdir = Path(outdir)
        _manifest(cfg, outdir, {"spec_hash": table.spec_hash, "references": refs.tolist()})
        report.write(outdir)
    return report


# ---------------------------------------------------------------------------
# prediction


def predict(cfg: RunConfig, result: PosteriorResult, outdir, observed: Dataset | None = None,
            table: ReferenceTable | None = None, world: World | None = None) -> dict:
    """Intensity maps at the posterior medians and a predictive ensemble.

    Writes one ASCII grid of visitation intensity per (landscape, year,
    period), predictive counts in long format and, when ``observed`` is
    given, per-record Bayesian p-values; with ``table`` also the PCA
    projections of table, predictions and observation.
    """
    world = world or build_world(cfg)
    outdir = Path(outdir)
    _manifest(cfg, outdir, {"spec_hash": world.spec.hash})
    paths = {}
    med = result.quantiles[:, 1]
    if result.any_failed or not np.all(np.isfinite(med)):
        raise PredictiveFailure(f"{result.label}: failed parameters, nothing to predict")
    try:
        psi = ParamVector.from_array(med)
    except ValueError as exc:
        raise PredictiveFailure(f"posterior medians are not a valid parameter vector: {exc}") from exc
    grid_dir = outdir / "intensity"
    grid_dir.mkdir(exist_ok=True)
    for lnd in world.design.landscapes:
        for year in world.design.years:
            for k in range(1, world.design.n_periods + 1):
                amap = world.store.attributes(lnd, year, k)
                nu = visitation_field(amap, psi.theta).nu
                save_grid(grid_dir / f"{lnd}_y{year}_p{k}.asc", nu, amap.resolution)
    paths["intensity"] = str(grid_dir)

    p = cfg.predict
    bounds = cfg.method_config().bounds
    ens = posterior_predictive(result, world.design, world.store, p.n_draws, _sub(cfg.seed, 21),
                               bounds, p.max_redraw)
    paths["predictive"] = str(outdir / "predictive_counts.csv")
    with open(paths["predictive"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw", "site", "year", "period", "count"])
        for d in range(len(ens)):
            for (i, j, k), c in zip(world.design.records, ens.counts[d]):
                w.writerow([d, i, j, k, int(c)])
    if observed is not None and len(ens):
        pv = bayes_pvalues(ens, observed)
        paths["pvalues"] = str(outdir / "pvalues.csv")
        with open(paths["pvalues"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["site", "year", "period", "pvalue"])
            for (i, j, k), v in zip(world.design.records, pv):
                w.writerow([i, j, k, repr(float(v))])
        if table is not None:
            pred_stats = summarize_counts(ens.counts, world.spec)
            pca = pca_check(table.stats, pred_stats, summarize(observed, world.spec).values)
            paths["pca"] = str(outdir / "pca.csv")
            with open(paths["pca"], "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                k = pca.table.shape[1]
                w.writerow(["source", "index"] + [f"pc{j + 1}" for j in range(k)])
                for src, arr in (("table", pca.table), ("predicted", pca.predicted),
                                 ("observed", pca.observed[None, :])):
                    for n, row in enumerate(arr):
                        w.writerow([src, n] + [repr(float(v)) for v in row])
    return paths


def report(run_dir) -> Path:
    """Collect the CSV outputs of a run directory into ``summary.md``."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"{run_dir} is not a directory")
    parts = [f"# Run summary: {run_dir.name}", ""]
    man = run_dir / "manifest.json"
    if man.exists():
        parts += ["## Manifest", "", "```", man.read_text().strip(), "```", ""]
    for name in ("simstudy_summary.csv", "posterior.csv", "pvalues.csv"):
        f = run_dir / name
        if not f.exists():
            continue
        with open(f, newline="") as fh:
            rows = list(csv.reader(fh))
        parts += [f"## {name}", "", "| " + " | ".join(rows[0]) + " |",
                  "|" + "---|" * len(rows[0])]
        for r in rows[1:]:
            parts.append("| " + " | ".join(_short(v) for v in r) + " |")
        parts.append("")
    out = run_dir / "summary.md"
    out.write_text("\n".join(parts))
    return out


def _short(v: str) -> str:
    try:
        f = float(v)
    except ValueError:
        return v
    return f"{f:.4g}"
