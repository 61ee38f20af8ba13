"""Declarative experiment configurations and the staged pipeline.

Every stage reads its inputs from and writes its outputs to one output
directory::

    fom/train_XX.opsw, fom/test_XX.opsw, fom/predict_XX.opsw
    pod/basis.opsw, pod/singular_values.csv, pod/projection_errors.csv
    models/<method>_rNNN.opsw
    roms/<method>_rNNN_<set>_XX.opsw, roms/status.json
    tables/*.csv, tables/errors.txt, fields/*.csv, lcurve/*.csv
    manifest.json
"""

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, ntswe, opinf, pod, snapshots, synthetic
from .grid import Grid2D
from .integrate import IntegrationError, IntegratorConfig, integrate
from .rom import ReducedAffineModel, simulate
from .snapshots import KIND_BASIS, SnapshotSet

log = logging.getLogger(__name__)

TIKHONOV_SWEEP = [10.0 ** k for k in range(1, -8, -1)]
TQR_SWEEP = [10.0 ** k for k in range(-4, -11, -1)]


@dataclass
class ExperimentConfig:
    name: str
    experiment: str  # "geostrophic", "shear" or "synthetic"
    parametric: bool = False
    theta: float = math.pi / 4
    theta_domain: tuple = (math.pi / 6, math.pi / 3)
    n_train: int = 5
    t_train: float = 60.0
    t_predict: float | None = None
    sample_dt: float = 0.1
    grid_n: int = 100
    delta: float = ntswe.DELTA
    rtol: float = 1e-8
    atol: float = 1e-8
    r_list: list = field(default_factory=lambda: [75])
    regularizers: list = field(default_factory=lambda: ["tikhonov:0.01", "tqr:1e-6"])
    intrusive: bool = True
    derivative_mode: str = "exact"
    stride: int = 1
    r_lcurve: int = 20
    lcurve_tikhonov: list = field(default_factory=lambda: list(TIKHONOV_SWEEP))
    lcurve_tqr: list = field(default_factory=lambda: list(TQR_SWEEP))
    field_times: list = field(default_factory=list)
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in ("geostrophic", "shear", "synthetic"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.derivative_mode not in ("exact", "fd"):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")
        self.theta_domain = tuple(self.theta_domain)
        self.r_list = sorted(int(r) for r in self.r_list)
        for spec in self.regularizers:
            opinf.RegularizerSpec.parse(spec)
        if self.t_predict is not None and self.t_predict <= self.t_train:
            raise ValueError("t_predict must exceed t_train")

    def train_thetas(self) -> list[float]:
        if not self.parametric:
            return [self.theta]
        a, b = self.theta_domain
        return list(np.linspace(a, b, self.n_train))

    def test_thetas(self) -> list[float]:
        """Midpoints of successive training parameters."""
        if not self.parametric:
            return []
        t = self.train_thetas()
        return [0.5 * (t[k] + t[k + 1]) for k in range(len(t) - 1)]

    def grid(self) -> Grid2D:
        if self.experiment == "geostrophic":
            return ntswe.geostrophic_grid(self.grid_n)
        if self.experiment == "shear":
            return ntswe.shear_grid(self.grid_n)
        raise ValueError("synthetic experiments have no grid")

    def initial_state(self, theta: float) -> np.ndarray:
        if self.experiment == "geostrophic":
            return ntswe.initial_geostrophic(self.grid(), theta, self.delta)
        return ntswe.initial_shear(self.grid(), theta, self.delta)

    def rhs(self, theta: float):
        grid, p = self.grid(), ntswe.PhysicalParams(theta, self.delta)
        return lambda w: ntswe.rhs(grid, w, p)

    def solver(self, t_end: float, t_start: float = 0.0) -> IntegratorConfig:
        return IntegratorConfig(t_end=t_end, t_start=t_start, rtol=self.rtol, atol=self.atol,
                                sample_dt=self.sample_dt)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["theta_domain"] = list(self.theta_domain)
        return d

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


PRESETS = {
    "geostrophic": dict(experiment="geostrophic", t_train=60.0, t_predict=80.0,
                        r_list=[25, 35, 45, 55, 65, 75], field_times=[60.0, 80.0]),
    "geostrophic-parametric": dict(experiment="geostrophic", parametric=True, t_train=10.0,
                                   r_list=[25, 35, 45, 55, 65, 75], intrusive=False,
                                   field_times=[10.0]),
    "shear": dict(experiment="shear", t_train=60.0, t_predict=80.0,
                  r_list=[20, 30, 40, 50], field_times=[60.0, 80.0]),
    "shear-parametric": dict(experiment="shear", parametric=True, t_train=30.0,
                             r_list=[20, 30, 40, 50, 60, 65], intrusive=False,
                             field_times=[30.0]),
    "synthetic": dict(experiment="synthetic", parametric=True, t_train=4.75, sample_dt=0.25,
                      theta_domain=(math.pi / 6, math.pi / 3), n_train=3, r_list=[5],
                      regularizers=["none"], intrusive=False, r_lcurve=5),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(name=name, **{**PRESETS[name], **overrides})


# Output-directory bookkeeping.

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, stage: str, cfg: ExperimentConfig, inputs, outputs, extra=None) -> None:
    """Append a stage record (config echo plus content hashes) to manifest.json."""
    path = out / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {"stages": []}
    manifest["config"] = cfg.to_dict()
    record = {
        "stage": stage,
        "config_hash": cfg.hash(),
        "inputs": {str(p.relative_to(out)): _sha256(p) for p in sorted(set(inputs))},
        "outputs": {str(p.relative_to(out)): _sha256(p) for p in sorted(set(outputs))},
    }
    if extra:
        record["results"] = extra
    manifest["stages"] = [s for s in manifest["stages"] if s["stage"] != stage] + [record]
    path.write_text(json.dumps(manifest, indent=2, default=float) + "\n")


def _sets_meta(cfg, kind, k, theta):
    meta = {"experiment": cfg.name, "set": kind, "index": k, "solver_hash": cfg.hash()}
    if cfg.experiment != "synthetic":
        meta["grid"] = cfg.grid().descriptor()
    return meta


def fom_path(out: Path, kind: str, k: int) -> Path:
    return out / "fom" / f"{kind}_{k:02d}.opsw"


def _run_fom(args):
    cfg, kind, k, theta, path = args
    traj = integrate(cfg.rhs(theta), cfg.initial_state(theta), cfg.solver(cfg.t_train))
    ss = SnapshotSet(theta, traj.times, traj.states, _sets_meta(cfg, kind, k, theta) | {"stats": traj.stats})
    snapshots.save(path, ss)
    return path


def _synthetic_model(cfg) -> ReducedAffineModel:
    return synthetic.random_stable_model(cfg.r_list[-1], np.random.default_rng(cfg.seed))


def cmd_fom_run(cfg: ExperimentConfig, out) -> list[Path]:
    """Full-order trajectories for every training and test parameter."""
    out = Path(out)
    (out / "fom").mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, "train", k, th, fom_path(out, "train", k)) for k, th in enumerate(cfg.train_thetas())]
    jobs += [(cfg, "test", k, th, fom_path(out, "test", k)) for k, th in enumerate(cfg.test_thetas())]
    if cfg.experiment == "synthetic":
        paths = _synthetic_fom(cfg, out, jobs)
    elif cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            paths = list(pool.map(_run_fom, jobs))
    else:
        paths = []
        for job in jobs:
            t0 = time.perf_counter()
            paths.append(_run_fom(job))
            log.info("FOM %s[%d] theta=%.4f done in %.1fs", job[1], job[2], job[3], time.perf_counter() - t0)
    write_manifest(out, "fom-run", cfg, [], paths)
    return paths


def _synthetic_fom(cfg, out, jobs):
    model = _synthetic_model(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    n_samples = int(round(cfg.t_train / cfg.sample_dt)) + 1
    paths = []
    for _, kind, k, theta, path in jobs:
        (rs,) = synthetic.training_sets(model, [theta], n_samples=n_samples, dt=cfg.sample_dt, rng=rng)
        # Trajectories are concatenated; times index the columns.
        ss = SnapshotSet(theta, np.arange(rs.data.shape[1]) * cfg.sample_dt, rs.data,
                         _sets_meta(cfg, kind, k, theta))
        snapshots.save(path, ss)
        paths.append(path)
    model.save(out / "fom" / "generator.opsw")
    paths.append(out / "fom" / "generator.opsw")
    return paths


def load_fom(out, kind="train") -> list[SnapshotSet]:
    paths = sorted((Path(out) / "fom").glob(f"{kind}_*.opsw"))
    return [snapshots.load(p) for p in paths]


def save_basis(path, basis: pod.PodBasis, meta=None) -> None:
    snapshots.write_container(path, KIND_BASIS, basis.V, basis.sigma, meta=meta)


def load_basis(path) -> pod.PodBasis:
    c = snapshots.read_container(path, KIND_BASIS)
    return pod.PodBasis(c["data"], c["aux"])


def cmd_pod(cfg: ExperimentConfig, out) -> pod.PodBasis:
    """Global POD basis of the training snapshots plus singular-value tables."""
    out = Path(out)
    (out / "pod").mkdir(parents=True, exist_ok=True)
    train = load_fom(out, "train")
    if not train:
        raise FileNotFoundError(f"no training snapshots in {out / 'fom'}; run fom-run first")
    r_max = cfg.r_list[-1]
    if cfg.experiment == "synthetic":
        n = train[0].data.shape[0]
        basis = pod.PodBasis(np.eye(n)[:, :r_max], np.linalg.svd(concat_matrix(train), compute_uv=False))
    else:
        basis = pod.compute_pod(concat_matrix(train), r_max)
    sigma = basis.sigma
    rank = pod.numerical_rank(sigma)
    save_basis(out / "pod" / "basis.opsw", basis, {"experiment": cfg.name, "rank": rank})
    with open(out / "pod" / "singular_values.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "sigma", "normalized"])
        for i, s in enumerate(sigma, 1):
            w.writerow([i, repr(float(s)), repr(float(s / sigma[0]))])
    proj = {r: basis.projection_error(r) for r in cfg.r_list}
    with open(out / "pod" / "projection_errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "projection_error"])
        for r, e in proj.items():
            w.writerow([r, repr(e)])
    outputs = [out / "pod" / n for n in ("basis.opsw", "singular_values.csv", "projection_errors.csv")]
    write_manifest(out, "pod", cfg, sorted((out / "fom").glob("train_*.opsw")), outputs,
                   {"rank": rank, "projection_errors": proj})
    log.info("POD rank %d, projection errors %s", rank, proj)
    return basis


def concat_matrix(sets) -> np.ndarray:
    return snapshots.concat(sets).matrix


def model_path(out: Path, method: str, r: int) -> Path:
    return out / "models" / f"{method}_r{r:03d}.opsw"


def cmd_intrusive(cfg: ExperimentConfig, out) -> list[Path]:
    """Galerkin ROMs for every r, built once at the largest r and truncated."""
    out = Path(out)
    if cfg.experiment == "synthetic":
        raise ValueError("the synthetic experiment has no full-order operators to project")
    (out / "models").mkdir(parents=True, exist_ok=True)
    basis = load_basis(out / "pod" / "basis.opsw")
    full = pod.intrusive_reduce(basis.truncate(cfg.r_list[-1]), cfg.grid(), cfg.delta)
    paths = []
    for r in cfg.r_list:
        m = full.truncate(r)
        m.label, m.basis_ref = "intrusive", "pod/basis.opsw"
        path = model_path(out, "intrusive", r)
        m.save(path)
        paths.append(path)
    write_manifest(out, "intrusive", cfg, [out / "pod" / "basis.opsw"], paths)
    return paths


def reduced_training_data(cfg: ExperimentConfig, out, basis: pod.PodBasis):
    """Project every training set at the largest r (smaller r slice rows)."""
    out = Path(out)
    reduced = []
    for ss in load_fom(out, "train"):
        if cfg.experiment == "synthetic":
            gen = ReducedAffineModel.load(out / "fom" / "generator.opsw")
            f = gen.rhs_function(ss.parameter)
            rhs = lambda X, f=f: np.apply_along_axis(f, -1, X)
        else:
            rhs = cfg.rhs(ss.parameter)
        reduced.append(snapshots.project(ss, basis.V, mode=cfg.derivative_mode, rhs=rhs, stride=cfg.stride))
    return reduced


def _slice(rs: snapshots.ReducedSnapshotSet, r: int) -> snapshots.ReducedSnapshotSet:
    return snapshots.ReducedSnapshotSet(rs.parameter, rs.times, rs.data[:r], rs.ddata[:r])


def method_name(spec: str) -> str:
    return "opinf-" + opinf.RegularizerSpec.parse(spec).tag


def cmd_opinf(cfg: ExperimentConfig, out) -> list[Path]:
    """Inferred ROMs for every r and every configured regularizer."""
    out = Path(out)
    (out / "models").mkdir(parents=True, exist_ok=True)
    basis = load_basis(out / "pod" / "basis.opsw")
    reduced = reduced_training_data(cfg, out, basis)
    paths, results = [], {}
    for r in cfg.r_list:
        sets = [_slice(rs, r) for rs in reduced]
        for spec in cfg.regularizers:
            reg = opinf.RegularizerSpec.parse(spec)
            t0 = time.perf_counter()
            m = opinf.infer(sets, reg, label=method_name(spec))
            m.basis_ref = "pod/basis.opsw"
            seconds = time.perf_counter() - t0
            if cfg.experiment == "synthetic":
                gen = ReducedAffineModel.load(out / "fom" / "generator.opsw")
                m.diagnostics["recovery_errors"] = synthetic.operator_errors(m, gen.truncate(r))
            path = model_path(out, method_name(spec), r)
            m.save(path)
            paths.append(path)
            # Timing goes to the manifest only, so model files stay reproducible.
            results[f"{method_name(spec)}_r{r}"] = {**m.diagnostics, "seconds": seconds}
            log.info("OpInf %s r=%d rank=%s", spec, r, m.diagnostics.get("effective_rank"))
    inputs = [out / "pod" / "basis.opsw"] + sorted((out / "fom").glob("train_*.opsw"))
    write_manifest(out, "opinf", cfg, inputs, paths, results)
    return paths


def methods(cfg: ExperimentConfig) -> list[str]:
    names = ["intrusive"] if cfg.intrusive and cfg.experiment != "synthetic" else []
    return names + [method_name(s) for s in cfg.regularizers]


def rom_path(out: Path, method: str, r: int, kind: str, k: int) -> Path:
    return out / "roms" / f"{method}_r{r:03d}_{kind}_{k:02d}.opsw"


def cmd_rom_run(cfg: ExperimentConfig, out) -> dict:
    """Simulate every model at every training and test parameter.

    Runs extend to ``t_predict`` when configured. Blow-ups are recorded in
    ``roms/status.json`` rather than raised.
    """
    out = Path(out)
    (out / "roms").mkdir(parents=True, exist_ok=True)
    basis = load_basis(out / "pod" / "basis.opsw")
    t_end = cfg.t_predict or cfg.t_train
    status, paths = {}, []
    sets = [("train", k, th) for k, th in enumerate(cfg.train_thetas())]
    sets += [("test", k, th) for k, th in enumerate(cfg.test_thetas())]
    if cfg.experiment == "synthetic":
        starts = {(kind, k): ss.data[:, 0] for kind in ("train", "test")
                  for k, ss in enumerate(load_fom(out, kind))}
    else:
        starts = {(kind, k): cfg.initial_state(th) for kind, k, th in sets}
    for method in methods(cfg):
        for r in cfg.r_list:
            model = ReducedAffineModel.load(model_path(out, method, r))
            V = basis.V[:, :r]
            for kind, k, th in sets:
                key = rom_path(out, method, r, kind, k).stem
                w0 = starts[(kind, k)]
                try:
                    t0 = time.perf_counter()
                    traj = simulate(model, V.T @ w0, th, cfg.solver(t_end))
                except IntegrationError as exc:
                    status[key] = {"ok": False, "t_fail": exc.t, "message": str(exc)}
                    log.warning("ROM %s blew up: %s", key, exc)
                    continue
                path = rom_path(out, method, r, kind, k)
                snapshots.save_reduced(path, traj.times, traj.states, th,
                                       {"method": method, "r": r, "set": kind, "index": k})
                paths.append(path)
                status[key] = {"ok": True, "seconds": time.perf_counter() - t0, **traj.stats}
    (out / "roms" / "status.json").write_text(json.dumps(status, indent=2) + "\n")
    write_manifest(out, "rom-run", cfg, sorted((out / "models").glob("*.opsw")),
                   paths + [out / "roms" / "status.json"])
    return status


def prediction_reference(cfg: ExperimentConfig, out, k: int = 0) -> SnapshotSet:
    """FOM reference on ``[0, t_predict]``, continuing the training run on demand."""
    out = Path(out)
    path = fom_path(out, "predict", k)
    if path.exists():
        return snapshots.load(path)
    train = load_fom(out, "train")[k]
    th = train.parameter
    tail = integrate(cfg.rhs(th), train.data[:, -1], cfg.solver(cfg.t_predict, t_start=train.times[-1]))
    times = np.concatenate([train.times, tail.times[1:]])
    data = np.hstack([train.data, tail.states[:, 1:]])
    ss = SnapshotSet(th, times, data, train.meta | {"set": "predict"})
    snapshots.save(path, ss)
    return ss


def _load_rom(out, method, r, kind, k):
    path = rom_path(out, method, r, kind, k)
    if not path.exists():
        return None
    times, states, _, _ = snapshots.load_reduced(path)
    return times, states


def cmd_evaluate(cfg: ExperimentConfig, out) -> dict:
    """Error tables, prediction errors and field dumps."""
    out = Path(out)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "synthetic":
        return _evaluate_recovery(cfg, out)
    basis = load_basis(out / "pod" / "basis.opsw")
    train, test = load_fom(out, "train"), load_fom(out, "test")
    S_train = concat_matrix(train)
    K = train[0].data.shape[1]
    reports, param_rows, summary = [], [], {"errors": {}, "parameters": {}, "prediction": {}}
    for r in cfg.r_list:
        V = basis.V[:, :r]
        e_proj = metrics.projection_error(S_train, V)
        reports.append(metrics.ErrorReport("projection", r, e_proj, e_proj, _param_desc(cfg)))
        for method in methods(cfg):
            roms = [_load_rom(out, method, r, "train", k) for k in range(len(train))]
            if any(x is None for x in roms):
                summary["errors"][f"{method}_r{r}"] = None
                continue
            S_rom = np.hstack([states[:, :K] for _, states in roms])
            e = metrics.relative_error(S_train, S_rom, V)
            reports.append(metrics.ErrorReport(method, r, e, e_proj, _param_desc(cfg)))
            summary["errors"][f"{method}_r{r}"] = e
            if cfg.parametric:
                for kind, sets in (("train", train), ("test", test)):
                    for k, ss in enumerate(sets):
                        res = _load_rom(out, method, r, kind, k)
                        err = (metrics.relative_error(ss.data, res[1][:, :ss.data.shape[1]], V)
                               if res is not None else float("nan"))
                        row = {"method": method, "r": r, "set": kind, "index": k,
                               "theta": ss.parameter, "relative_error": err,
                               "projection_error": metrics.projection_error(ss.data, V)}
                        param_rows.append(row)
    metrics.write_table_csv(out / "tables" / "errors.csv", reports)
    (out / "tables" / "errors.txt").write_text(metrics.format_table(reports))
    summary["projection"] = {r: basis.projection_error(r) for r in cfg.r_list}
    outputs = [out / "tables" / "errors.csv", out / "tables" / "errors.txt"]
    if param_rows:
        _write_rows(out / "tables" / "parameter_errors.csv", param_rows)
        outputs.append(out / "tables" / "parameter_errors.csv")
        summary["parameters"] = param_rows
    if cfg.t_predict is not None and cfg.experiment != "synthetic":
        rows = _prediction_errors(cfg, out, basis)
        _write_rows(out / "tables" / "prediction.csv", rows)
        outputs.append(out / "tables" / "prediction.csv")
        summary["prediction"] = rows
    if cfg.field_times and cfg.experiment != "synthetic":
        outputs += _dump_fields(cfg, out, basis)
    (out / "tables" / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    outputs.append(out / "tables" / "summary.json")
    inputs = sorted((out / "roms").glob("*.opsw")) + sorted((out / "fom").glob("*.opsw"))
    write_manifest(out, "evaluate", cfg, inputs, outputs, summary)
    return summary


def _evaluate_recovery(cfg, out):
    gen = ReducedAffineModel.load(out / "fom" / "generator.opsw")
    rows = []
    for method in methods(cfg):
        for r in cfg.r_list:
            m = ReducedAffineModel.load(model_path(out, method, r))
            errs = synthetic.operator_errors(m, gen.truncate(r))
            rows.append({"method": method, "r": r, **errs, "max": max(errs.values())})
    _write_rows(out / "tables" / "recovery.csv", rows)
    summary = {"recovery": rows}
    (out / "tables" / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    write_manifest(out, "evaluate", cfg, sorted((out / "models").glob("*.opsw")),
                   [out / "tables" / "recovery.csv", out / "tables" / "summary.json"], summary)
    return summary


def _param_desc(cfg):
    if cfg.parametric:
        return f"theta in [{cfg.theta_domain[0]:.6f}, {cfg.theta_domain[1]:.6f}], M={cfg.n_train}"
    return f"theta={cfg.theta:.6f}"


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _prediction_errors(cfg, out, basis):
    ref = prediction_reference(cfg, out)
    grid = cfg.grid()
    n = grid.size
    w_end = ref.data[:, -1]
    rows = []
    for r in cfg.r_list:
        V = basis.V[:, :r]
        floor = w_end - V @ (V.T @ w_end)
        rows.append({"method": "projection", "r": r, "t": ref.times[-1],
                     "field_error": metrics.frobenius(floor), "height_error": metrics.frobenius(floor[2 * n:]),
                     "window_error": metrics.projection_error(ref.data, V)})
        for method in methods(cfg):
            res = _load_rom(out, method, r, "train", 0)
            if res is None:
                rows.append({"method": method, "r": r, "t": ref.times[-1], "field_error": float("nan"),
                             "height_error": float("nan"), "window_error": float("nan")})
                continue
            lifted = V @ res[1][:, -1]
            rows.append({"method": method, "r": r, "t": ref.times[-1],
                         "field_error": metrics.field_error(w_end, lifted),
                         "height_error": metrics.field_error(w_end[2 * n:], lifted[2 * n:]),
                         "window_error": metrics.relative_error(ref.data, res[1], V)})
    return rows


def _dump_fields(cfg, out, basis):
    """Height and potential vorticity at ``field_times`` for the largest r."""
    (out / "fields").mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    X, Y = grid.coords()
    r = cfg.r_list[-1]
    V = basis.V[:, :r]
    paths = []
    if cfg.parametric:
        # The middle test parameter, as in the parametric field comparisons.
        k = len(cfg.test_thetas()) // 2
        kind, refs = "test", load_fom(out, "test")
    else:
        k, kind, refs = 0, "train", None
    for t in cfg.field_times:
        if refs is not None:
            ref = refs[k]
        elif t > cfg.t_train + 1e-9:
            ref = prediction_reference(cfg, out, k)
        else:
            ref = load_fom(out, "train")[k]
        col = int(np.argmin(np.abs(ref.times - t)))
        th = ref.parameter
        cols = {"x": X.ravel(), "y": Y.ravel()}
        w = ref.data[:, col]
        cols["h_fom"] = ntswe.split(grid, w)[2].ravel()
        cols["q_fom"] = ntswe.potential_vorticity(grid, w, th).ravel()
        for method in methods(cfg):
            res = _load_rom(out, method, r, kind, k)
            if res is None or col >= res[1].shape[1]:
                continue
            wl = V @ res[1][:, col]
            cols[f"h_{method}"] = ntswe.split(grid, wl)[2].ravel()
            cols[f"q_{method}"] = ntswe.potential_vorticity(grid, wl, th).ravel()
        path = out / "fields" / f"{kind}_{k:02d}_t{t:06.2f}_r{r:03d}.csv"
        with open(path, "w", newline="") as fh:
            w_csv = csv.writer(fh)
            w_csv.writerow(list(cols))
            for row in zip(*cols.values()):
                w_csv.writerow([repr(float(v)) for v in row])
        paths.append(path)
    return paths


def cmd_lcurve(cfg: ExperimentConfig, out) -> dict:
    """Tikhonov and tQR L-curves at ``r_lcurve`` with their corners."""
    out = Path(out)
    (out / "lcurve").mkdir(parents=True, exist_ok=True)
    basis = load_basis(out / "pod" / "basis.opsw")
    if cfg.r_lcurve > basis.r:
        raise ValueError(f"r_lcurve={cfg.r_lcurve} exceeds the stored basis (r={basis.r})")
    reduced = [_slice(rs, cfg.r_lcurve) for rs in reduced_training_data(cfg, out, basis.truncate(cfg.r_lcurve))]
    chosen, outputs = {}, []
    for variant, params in (("tikhonov", cfg.lcurve_tikhonov), ("tqr", cfg.lcurve_tqr)):
        points, corner = opinf.lcurve_sweep(reduced, variant, params)
        path = out / "lcurve" / f"{variant}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["reg_param", "residual_norm", "solution_norm", "effective_rank", "corner"])
            for i, p in enumerate(points):
                w.writerow([repr(p.reg_param), repr(p.residual_norm), repr(p.solution_norm),
                            p.effective_rank, int(i == corner)])
        outputs.append(path)
        chosen[variant] = points[corner].reg_param
    (out / "lcurve" / "chosen.json").write_text(json.dumps(chosen, indent=2) + "\n")
    outputs.append(out / "lcurve" / "chosen.json")
    write_manifest(out, "lcurve", cfg, [out / "pod" / "basis.opsw"], outputs, {"chosen": chosen})
    return chosen


STAGES = {
    "fom-run": cmd_fom_run,
    "pod": cmd_pod,
    "intrusive": cmd_intrusive,
    "opinf": cmd_opinf,
    "rom-run": cmd_rom_run,
    "evaluate": cmd_evaluate,
    "lcurve": cmd_lcurve,
}


def run_all(cfg: ExperimentConfig, out, lcurve: bool = False) -> dict:
    cmd_fom_run(cfg, out)
    cmd_pod(cfg, out)
    if cfg.intrusive and cfg.experiment != "synthetic":
        cmd_intrusive(cfg, out)
    cmd_opinf(cfg, out)
    if lcurve:
        cmd_lcurve(cfg, out)
    cmd_rom_run(cfg, out)
    return cmd_evaluate(cfg, out)
