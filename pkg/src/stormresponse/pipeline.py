"""Run configuration, artifact manifest and the staged pipeline.

Every stage consumes and produces files only.  The manifest records, per
stage, a fingerprint of the relevant configuration keys plus content
hashes of inputs and outputs: unchanged stages are skipped on rerun, and a
manually edited intermediate file is detected as a hash mismatch against
the producing stage's record (override with force=True).
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import condext, contours, marginal, response, synth
from .data import (
    PeakExtractionConfig,
    StormPeakSample,
    extract_storm_peaks,
    load_hindcast,
    read_peaks_csv,
    write_peaks_csv,
)
from .errors import ConfigError, DataError
from .response import WaveConfig

STAGES = ("synth", "peaks", "fit-marginal", "fit-ht", "simulate-env",
          "respond", "cde", "contour", "zeta", "report")

_BUILTIN_STRUCTURES = {
    "A": response.structure_a,
    "B": response.structure_b,
    "C": response.structure_c,
}


@dataclass
class RunConfig:
    """Flat key=value configuration with section headers (INI syntax)."""

    workdir: Path = Path("run")
    input: Path | None = None
    structures: tuple[str, ...] = ("A", "B", "C")
    master_seed: int = 1234

    synth_years: float = 35.0
    synth_storms_per_year: float = 73.0

    peaks_threshold_quantile: float = 0.7
    peaks_min_gap: int = 4

    marginal_threshold_quantile: float = 0.8
    marginal_body: str = "interp"

    ht_threshold_quantile: float = 0.95
    ht_bandwidth_mult: float = 1.0

    env_n_sim: int = 1_000_000
    grid_nx: int = 40
    grid_ny: int = 40
    grid_hs_min: float | None = None
    grid_hs_max: float | None = None
    grid_s2_min: float | None = None
    grid_s2_max: float | None = None

    response_k: int = 500
    response_epsilon: float = 2.0
    response_l_hours: float = 3.0
    wave_window: float = 120.0
    wave_n_t: int = 480
    wave_z_min: float = -100.0
    wave_z_max: float = 150.0
    wave_n_z: int = 50
    jonswap_gamma: float = 3.3
    jonswap_r: float = 5.0

    p_list: tuple[float, ...] = (100.0, 1000.0)
    cde_p: float = 1000.0

    contour_models: tuple[str, ...] = (
        "gev:s2neg:exponential:exponential",
        "weibull:s2:linear:quadratic",
        "lognormal:s2:linear:linear",
    )
    contour_points: int = 360

    threads: int = 1

    def wave_config(self) -> WaveConfig:
        return WaveConfig(window=self.wave_window, n_t=self.wave_n_t,
                          z_min=self.wave_z_min, z_max=self.wave_z_max,
                          n_z=self.wave_n_z, gamma=self.jonswap_gamma,
                          r=self.jonswap_r)

    def path(self, name: str) -> Path:
        return Path(self.workdir) / name

    def input_path(self) -> Path:
        return Path(self.input) if self.input else self.path("hindcast.csv")


_KEY_MAP = {
    ("paths", "workdir"): ("workdir", Path),
    ("paths", "input"): ("input", Path),
    ("paths", "structures"): ("structures", "strlist"),
    ("seeds", "master"): ("master_seed", int),
    ("synth", "years"): ("synth_years", float),
    ("synth", "storms_per_year"): ("synth_storms_per_year", float),
    ("peaks", "threshold_quantile"): ("peaks_threshold_quantile", float),
    ("peaks", "min_gap"): ("peaks_min_gap", int),
    ("marginal", "threshold_quantile"): ("marginal_threshold_quantile", float),
    ("marginal", "body"): ("marginal_body", str),
    ("ht", "threshold_quantile"): ("ht_threshold_quantile", float),
    ("ht", "bandwidth_mult"): ("ht_bandwidth_mult", float),
    ("env", "n_sim"): ("env_n_sim", int),
    ("env", "grid_nx"): ("grid_nx", int),
    ("env", "grid_ny"): ("grid_ny", int),
    ("env", "hs_min"): ("grid_hs_min", float),
    ("env", "hs_max"): ("grid_hs_max", float),
    ("env", "s2_min"): ("grid_s2_min", float),
    ("env", "s2_max"): ("grid_s2_max", float),
    ("response", "k"): ("response_k", int),
    ("response", "epsilon"): ("response_epsilon", float),
    ("response", "l_hours"): ("response_l_hours", float),
    ("response", "window"): ("wave_window", float),
    ("response", "n_t"): ("wave_n_t", int),
    ("response", "z_min"): ("wave_z_min", float),
    ("response", "z_max"): ("wave_z_max", float),
    ("response", "n_z"): ("wave_n_z", int),
    ("response", "jonswap_gamma"): ("jonswap_gamma", float),
    ("response", "jonswap_r"): ("jonswap_r", float),
    ("return", "p_list"): ("p_list", "floatlist"),
    ("return", "cde_p"): ("cde_p", float),
    ("contours", "models"): ("contour_models", "strlist"),
    ("contours", "points"): ("contour_points", int),
    ("run", "threads"): ("threads", int),
}


def load_config(path) -> RunConfig:
    """Parse and validate a config file; unknown keys are errors."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    for section in parser.sections():
        for key, raw in parser[section].items():
            spec = _KEY_MAP.get((section.lower(), key.lower()))
            if spec is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, conv = spec
            try:
                if conv == "strlist":
                    value = tuple(s.strip() for s in raw.split(",") if s.strip())
                elif conv == "floatlist":
                    value = tuple(float(s) for s in raw.split(",") if s.strip())
                else:
                    value = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc
            setattr(cfg, attr, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if not 0 < cfg.peaks_threshold_quantile < 1:
        raise ConfigError("peaks threshold_quantile must lie in (0, 1)")
    if not 0 < cfg.marginal_threshold_quantile < 1:
        raise ConfigError("marginal threshold_quantile must lie in (0, 1)")
    if not 0 < cfg.ht_threshold_quantile < 1:
        raise ConfigError("ht threshold_quantile must lie in (0, 1)")
    if cfg.env_n_sim < 1000:
        raise ConfigError("env n_sim must be at least 1000")
    if cfg.response_k < 1 or cfg.response_epsilon <= 0:
        raise ConfigError("response k must be >= 1 and epsilon > 0")
    if any(p <= 1 for p in cfg.p_list) or cfg.cde_p <= 1:
        raise ConfigError("return periods must exceed one year")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for label in cfg.contour_models:
        _parse_model_label(label)
    for name in cfg.structures:
        if name not in _BUILTIN_STRUCTURES and not Path(name).suffix:
            raise ConfigError(f"unknown structure {name!r}: use A/B/C or a spec file path")


def _parse_model_label(label: str) -> contours.ModelSpec:
    parts = label.split(":")
    if len(parts) != 4 or parts[1] not in ("s2", "s2neg"):
        raise ConfigError(
            f"contour model {label!r} must be family:s2|s2neg:form1:form2")
    try:
        return contours.ModelSpec(parts[0], parts[2], parts[3],
                                  sign_transform=parts[1] == "s2neg")
    except DataError as exc:
        raise ConfigError(str(exc)) from exc


def _structure_by_name(cfg: RunConfig, name: str) -> response.StructureSpec:
    if name in _BUILTIN_STRUCTURES:
        return _BUILTIN_STRUCTURES[name]()
    return response.read_structure_file(name)


def _structure_tag(name: str) -> str:
    return Path(name).stem if name not in _BUILTIN_STRUCTURES else name


def _stage_seed(cfg: RunConfig, stage: str) -> int:
    offsets = {"synth": 0, "fit-marginal": 11, "fit-ht": 12, "simulate-env": 21,
               "respond": 31, "contour": 41}
    return cfg.master_seed + 1000 * offsets.get(stage, 99)


# ---------------------------------------------------------------------------
# Manifest

def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Per-stage record of config fingerprint and input/output hashes."""

    def __init__(self, path):
        self.path = Path(path)
        self.stages: dict = {}
        if self.path.exists():
            self.stages = json.loads(self.path.read_text()).get("stages", {})

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps({"stages": self.stages}, indent=2, sort_keys=True))

    def produced_hash(self, path: str) -> str | None:
        for record in self.stages.values():
            if path in record["outputs"]:
                return record["outputs"][path]
        return None

    def check_inputs(self, stage: str, inputs: list[Path], force: bool) -> dict:
        """Hash inputs; refuse manually edited intermediates unless forced."""
        hashes = {}
        for p in inputs:
            p = Path(p)
            if not p.exists():
                raise DataError(f"stage {stage}: missing input {p}")
            cur = file_sha256(p)
            recorded = self.produced_hash(str(p))
            if recorded is not None and recorded != cur and not force:
                raise DataError(
                    f"stage {stage}: input {p} differs from the hash recorded by its "
                    "producing stage (manually edited?); rerun upstream or use --force")
            hashes[str(p)] = cur
        return hashes

    def is_fresh(self, stage: str, config_hash: str, input_hashes: dict,
                 outputs: list[Path]) -> bool:
        record = self.stages.get(stage)
        if record is None:
            return False
        if record["config_hash"] != config_hash:
            return False
        if record["inputs"] != input_hashes:
            return False
        for p in outputs:
            p = Path(p)
            if not p.exists():
                return False
            if record["outputs"].get(str(p)) != file_sha256(p):
                return False
        return True

    def record(self, stage: str, config_hash: str, input_hashes: dict,
               outputs: list[Path]) -> None:
        self.stages[stage] = {
            "config_hash": config_hash,
            "inputs": input_hashes,
            "outputs": {str(p): file_sha256(p) for p in outputs},
            "timestamp": time.time(),
        }
        self.save()


_STAGE_KEYS = {
    "synth": ("synth_years", "synth_storms_per_year", "master_seed"),
    "peaks": ("peaks_threshold_quantile", "peaks_min_gap"),
    "fit-marginal": ("marginal_threshold_quantile", "marginal_body", "master_seed"),
    "fit-ht": ("ht_threshold_quantile", "ht_bandwidth_mult"),
    "simulate-env": ("env_n_sim", "grid_nx", "grid_ny", "grid_hs_min", "grid_hs_max",
                     "grid_s2_min", "grid_s2_max", "master_seed"),
    "respond": ("response_k", "response_epsilon", "response_l_hours", "wave_window",
                "wave_n_t", "wave_z_min", "wave_z_max", "wave_n_z", "jonswap_gamma",
                "jonswap_r", "p_list", "structures", "master_seed", "threads"),
    "cde": ("cde_p", "response_l_hours", "structures"),
    "contour": ("contour_models", "contour_points", "cde_p", "master_seed"),
    "zeta": ("contour_models", "structures"),
    "report": ("p_list", "cde_p", "contour_models", "structures",
               "jonswap_gamma", "jonswap_r"),
}


def stage_config_hash(cfg: RunConfig, stage: str) -> str:
    payload = {k: str(getattr(cfg, k)) for k in _STAGE_KEYS[stage]}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Stage implementations

def _load_peaks(cfg: RunConfig) -> StormPeakSample:
    meta = json.loads(cfg.path("peaks_meta.json").read_text())
    return read_peaks_csv(cfg.path("peaks.csv"), n_an=meta["n_an"],
                          years_spanned=meta["years_spanned"])


def _load_marginals(cfg: RunConfig):
    m_hs = marginal.marginal_from_dict(json.loads(cfg.path("marginal_hs.json").read_text()))
    m_s2 = marginal.marginal_from_dict(json.loads(cfg.path("marginal_s2.json").read_text()))
    return m_hs, m_s2


def _load_grid(cfg: RunConfig) -> condext.JointDensityGrid:
    payload = json.loads(cfg.path("grid.json").read_text())
    return condext.JointDensityGrid(
        hs_edges=np.asarray(payload["hs_edges"]),
        s2_edges=np.asarray(payload["s2_edges"]),
        mass=np.asarray(payload["mass"]),
        density=np.asarray(payload["density"]),
        n_sim=int(payload["n_sim"]))


def _load_cell_samples(cfg: RunConfig, tag: str) -> dict:
    atoms = np.load(cfg.path(f"responses_{tag}.npy"))
    meta = json.loads(cfg.path(f"responses_{tag}_meta.json").read_text())
    cells: dict = {}
    for i, j in {(int(a), int(b)) for a, b in atoms[:, :2]}:
        rows = atoms[(atoms[:, 0] == i) & (atoms[:, 1] == j)]
        cells[(i, j)] = response.WeightedResponseSample(
            crest=rows[:, 2], response=rows[:, 3], weight=rows[:, 4],
            epsilon=meta["epsilon"], hs=meta["hs_mid"][str(i)], s2=meta["s2_mid"][str(j)])
    return cells


def stage_synth(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    outputs = [cfg.path("hindcast.csv"), cfg.path("truth.json")]
    chash = stage_config_hash(cfg, "synth")
    if not force and manifest.is_fresh("synth", chash, {}, outputs):
        return outputs
    scfg = synth.SynthConfig(years=cfg.synth_years,
                             storms_per_year=cfg.synth_storms_per_year,
                             seed=_stage_seed(cfg, "synth"))
    series, truth = synth.generate_hindcast(scfg)
    cfg.path("").mkdir(parents=True, exist_ok=True)
    synth.write_hindcast_csv(series, outputs[0])
    outputs[1].write_text(json.dumps(truth, indent=2, sort_keys=True))
    manifest.record("synth", chash, {}, outputs)
    return outputs


def stage_peaks(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.input_path()]
    outputs = [cfg.path("peaks.csv"), cfg.path("peaks_meta.json")]
    chash = stage_config_hash(cfg, "peaks")
    ih = manifest.check_inputs("peaks", inputs, force)
    if not force and manifest.is_fresh("peaks", chash, ih, outputs):
        return outputs
    series = load_hindcast(inputs[0])
    sample = extract_storm_peaks(series, PeakExtractionConfig(
        threshold_quantile=cfg.peaks_threshold_quantile, min_gap=cfg.peaks_min_gap))
    write_peaks_csv(sample, outputs[0])
    outputs[1].write_text(json.dumps({
        "n_an": sample.n_an, "years_spanned": sample.years_spanned,
        "count": len(sample),
        "threshold_quantile": cfg.peaks_threshold_quantile,
        "min_gap": cfg.peaks_min_gap}, indent=2, sort_keys=True))
    manifest.record("peaks", chash, ih, outputs)
    return outputs


def stage_fit_marginal(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("peaks.csv"), cfg.path("peaks_meta.json")]
    outputs = [cfg.path("marginal_hs.json"), cfg.path("marginal_s2.json"),
               cfg.path("diagnostics_hs.csv"), cfg.path("diagnostics_s2.csv")]
    chash = stage_config_hash(cfg, "fit-marginal")
    ih = manifest.check_inputs("fit-marginal", inputs, force)
    if not force and manifest.is_fresh("fit-marginal", chash, ih, outputs):
        return outputs
    sample = _load_peaks(cfg)
    seed = _stage_seed(cfg, "fit-marginal")
    for series, model_path, diag_path in (
            (sample.hs, outputs[0], outputs[2]),
            (sample.s2, outputs[1], outputs[3])):
        model = marginal.fit_marginal(series, cfg.marginal_threshold_quantile,
                                      body=cfg.marginal_body, seed=seed)
        model_path.write_text(json.dumps(marginal.marginal_to_dict(model), sort_keys=True))
        diag = marginal.threshold_diagnostics(series, n_boot=100, seed=seed)
        marginal.write_diagnostics_csv(diag, diag_path)
    manifest.record("fit-marginal", chash, ih, outputs)
    return outputs


def stage_fit_ht(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("peaks.csv"), cfg.path("peaks_meta.json"),
              cfg.path("marginal_hs.json"), cfg.path("marginal_s2.json")]
    outputs = [cfg.path("ht.json")]
    chash = stage_config_hash(cfg, "fit-ht")
    ih = manifest.check_inputs("fit-ht", inputs, force)
    if not force and manifest.is_fresh("fit-ht", chash, ih, outputs):
        return outputs
    sample = _load_peaks(cfg)
    m_hs, m_s2 = _load_marginals(cfg)
    y1 = marginal.to_laplace(m_hs, sample.hs)
    y2 = marginal.to_laplace(m_s2, sample.s2)
    fit = condext.fit_ht(y1, y2, threshold_quantile=cfg.ht_threshold_quantile,
                         bw_mult=cfg.ht_bandwidth_mult)
    outputs[0].write_text(json.dumps(condext.ht_to_dict(fit), sort_keys=True))
    manifest.record("fit-ht", chash, ih, outputs)
    return outputs


def stage_simulate_env(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("ht.json"), cfg.path("marginal_hs.json"), cfg.path("marginal_s2.json")]
    outputs = [cfg.path("env_sample.csv"), cfg.path("density_grid.csv"), cfg.path("grid.json")]
    chash = stage_config_hash(cfg, "simulate-env")
    ih = manifest.check_inputs("simulate-env", inputs, force)
    if not force and manifest.is_fresh("simulate-env", chash, ih, outputs):
        return outputs
    fit = condext.ht_from_dict(json.loads(inputs[0].read_text()))
    m_hs, m_s2 = _load_marginals(cfg)
    hs, s2 = condext.simulate_joint(fit, (m_hs, m_s2), cfg.env_n_sim,
                                    seed=_stage_seed(cfg, "simulate-env"))
    with open(outputs[0], "w", newline="") as fh:
        fh.write("hs,s2\n")
        for a, b in zip(hs, s2):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
    lo_h = cfg.grid_hs_min if cfg.grid_hs_min is not None else float(hs.min()) * 0.999
    hi_h = cfg.grid_hs_max if cfg.grid_hs_max is not None else float(hs.max()) * 1.001
    lo_s = cfg.grid_s2_min if cfg.grid_s2_min is not None else float(s2.min()) * 0.999
    hi_s = cfg.grid_s2_max if cfg.grid_s2_max is not None else float(s2.max()) * 1.001
    grid = condext.estimate_density_grid(
        hs, s2, np.linspace(lo_h, hi_h, cfg.grid_nx + 1),
        np.linspace(lo_s, hi_s, cfg.grid_ny + 1))
    condext.write_density_csv(grid, outputs[1])
    outputs[2].write_text(json.dumps({
        "hs_edges": grid.hs_edges.tolist(), "s2_edges": grid.s2_edges.tolist(),
        "mass": grid.mass.tolist(), "density": grid.density.tolist(),
        "n_sim": grid.n_sim}, sort_keys=True))
    manifest.record("simulate-env", chash, ih, outputs)
    return outputs


def stage_respond(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("grid.json"), cfg.path("peaks_meta.json")]
    inputs += [Path(name) for name in cfg.structures if name not in _BUILTIN_STRUCTURES]
    outputs = []
    for name in cfg.structures:
        tag = _structure_tag(name)
        outputs += [cfg.path(f"responses_{tag}.npy"),
                    cfg.path(f"responses_{tag}_meta.json"),
                    cfg.path(f"rs_cdf_{tag}.csv"),
                    cfg.path(f"return_values_{tag}.csv")]
    chash = stage_config_hash(cfg, "respond")
    ih = manifest.check_inputs("respond", inputs, force)
    if not force and manifest.is_fresh("respond", chash, ih, outputs):
        return outputs
    grid = _load_grid(cfg)
    meta = json.loads(cfg.path("peaks_meta.json").read_text())
    lam = meta["n_an"]
    wave = cfg.wave_config()
    seed = _stage_seed(cfg, "respond")
    for name in cfg.structures:
        tag = _structure_tag(name)
        structure = _structure_by_name(cfg, name)
        cells = response.simulate_cell_responses(
            grid, structure, cfg.response_k, epsilon=cfg.response_epsilon,
            seed=seed, wave=wave, threads=cfg.threads)
        rows = []
        for (i, j), sample in sorted(cells.items()):
            block = np.column_stack([
                np.full(sample.crest.size, i), np.full(sample.crest.size, j),
                sample.crest, sample.response, sample.weight])
            rows.append(block)
        np.save(cfg.path(f"responses_{tag}.npy"), np.vstack(rows))
        cfg.path(f"responses_{tag}_meta.json").write_text(json.dumps({
            "epsilon": cfg.response_epsilon, "k": cfg.response_k,
            "l_hours": cfg.response_l_hours, "structure": name,
            "hs_mid": {str(i): float(v) for i, v in enumerate(grid.hs_mid)},
            "s2_mid": {str(j): float(v) for j, v in enumerate(grid.s2_mid)}},
            indent=2, sort_keys=True))
        dists = {key: response.response_cdf(s, cfg.response_l_hours)
                 for key, s in cells.items()}
        f_rs = response.storm_max_cdf(grid, dists)
        f_ra = response.annual_max_cdf(f_rs, lam)
        r_grid = np.linspace(f_rs.support[0], f_rs.support[1], 400)
        response.write_rs_cdf_csv(cfg.path(f"rs_cdf_{tag}.csv"),
                                  r_grid, f_rs(r_grid), f_ra(r_grid))
        pairs = [(p, response.return_value(f_ra, p)) for p in cfg.p_list]
        if cfg.cde_p not in cfg.p_list:
            pairs.append((cfg.cde_p, response.return_value(f_ra, cfg.cde_p)))
        response.write_return_values_csv(cfg.path(f"return_values_{tag}.csv"), pairs)
    manifest.record("respond", chash, ih, outputs)
    return outputs


def _read_return_values(path) -> dict:
    out = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            p, rp = line.strip().split(",")
            out[float(p)] = float(rp)
    return out


def stage_cde(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("grid.json")]
    for name in cfg.structures:
        tag = _structure_tag(name)
        inputs += [cfg.path(f"responses_{tag}.npy"),
                   cfg.path(f"responses_{tag}_meta.json"),
                   cfg.path(f"return_values_{tag}.csv")]
    outputs = []
    for name in cfg.structures:
        tag = _structure_tag(name)
        outputs += [cfg.path(f"cde_{tag}.csv"), cfg.path(f"exceedance_{tag}.csv")]
    chash = stage_config_hash(cfg, "cde")
    ih = manifest.check_inputs("cde", inputs, force)
    if not force and manifest.is_fresh("cde", chash, ih, outputs):
        return outputs
    grid = _load_grid(cfg)
    for name in cfg.structures:
        tag = _structure_tag(name)
        cells = _load_cell_samples(cfg, tag)
        dists = {key: response.response_cdf(s, cfg.response_l_hours)
                 for key, s in cells.items()}
        r_p = _read_return_values(cfg.path(f"return_values_{tag}.csv"))[cfg.cde_p]
        cde_grid = response.cde(grid, dists, r_p)
        response.write_cde_csv(cde_grid, cfg.path(f"cde_{tag}.csv"))
        log_sf = response.exceedance_map(dists, r_p, grid)
        response.write_exceedance_csv(log_sf, grid, cfg.path(f"exceedance_{tag}.csv"))
    manifest.record("cde", chash, ih, outputs)
    return outputs


def stage_contour(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("peaks.csv"), cfg.path("peaks_meta.json"), cfg.path("marginal_hs.json")]
    outputs = [cfg.path(f"contour_{label.replace(':', '_')}.csv")
               for label in cfg.contour_models]
    chash = stage_config_hash(cfg, "contour")
    ih = manifest.check_inputs("contour", inputs, force)
    if not force and manifest.is_fresh("contour", chash, ih, outputs):
        return outputs
    sample = _load_peaks(cfg)
    m_hs, _ = _load_marginals(cfg)
    seed = _stage_seed(cfg, "contour")
    for label, out in zip(cfg.contour_models, outputs):
        spec = _parse_model_label(label)
        model = contours.fit_conditional_model(sample, spec, seed=seed)
        contour = contours.iform_contour(m_hs, model, cfg.cde_p, sample.n_an,
                                         k=cfg.contour_points)
        contours.write_contour_csv(contour, out)
    manifest.record("contour", chash, ih, outputs)
    return outputs


def read_contour_csv(path) -> contours.Contour:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    return contours.Contour(angles=rows[:, 0], u1=rows[:, 1], u2=rows[:, 2],
                            hs=rows[:, 3], s2=rows[:, 4],
                            beta_index=float(np.hypot(rows[0, 1], rows[0, 2])),
                            p=np.nan, n_an=np.nan, clamped=False)


def read_cde_csv(path) -> response.CdeGrid:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    hs_edges = np.unique(np.concatenate([rows[:, 0], rows[:, 1]]))
    s2_edges = np.unique(np.concatenate([rows[:, 2], rows[:, 3]]))
    value = np.zeros((hs_edges.size - 1, s2_edges.size - 1))
    i = np.searchsorted(hs_edges, rows[:, 0])
    j = np.searchsorted(s2_edges, rows[:, 2])
    value[i, j] = rows[:, 4]
    area = np.outer(np.diff(hs_edges), np.diff(s2_edges))
    return response.CdeGrid(hs_edges=hs_edges, s2_edges=s2_edges, value=value,
                            r_p=np.nan,
                            normalization_residual=abs(float((value * area).sum()) - 1.0))


def stage_zeta(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = []
    for name in cfg.structures:
        inputs.append(cfg.path(f"cde_{_structure_tag(name)}.csv"))
    for label in cfg.contour_models:
        inputs.append(cfg.path(f"contour_{label.replace(':', '_')}.csv"))
    outputs = [cfg.path("zeta.csv")]
    chash = stage_config_hash(cfg, "zeta")
    ih = manifest.check_inputs("zeta", inputs, force)
    if not force and manifest.is_fresh("zeta", chash, ih, outputs):
        return outputs
    with open(outputs[0], "w", newline="") as fh:
        fh.write("structure,contour,zeta\n")
        for name in cfg.structures:
            tag = _structure_tag(name)
            cde_grid = read_cde_csv(cfg.path(f"cde_{tag}.csv"))
            for label in cfg.contour_models:
                contour = read_contour_csv(cfg.path(f"contour_{label.replace(':', '_')}.csv"))
                z = contours.zeta_overlap(contour, cde_grid)
                fh.write(f"{tag},{label},{z!r}\n")
    manifest.record("zeta", chash, ih, outputs)
    return outputs


def stage_report(cfg: RunConfig, manifest: RunManifest, force: bool = False) -> list[Path]:
    inputs = [cfg.path("zeta.csv"), cfg.path("peaks_meta.json"),
              cfg.path("marginal_hs.json"), cfg.path("ht.json")]
    for name in cfg.structures:
        inputs.append(cfg.path(f"return_values_{_structure_tag(name)}.csv"))
    outputs = [cfg.path("summary.json"), cfg.path("summary.txt")]
    chash = stage_config_hash(cfg, "report")
    ih = manifest.check_inputs("report", inputs, force)
    if not force and manifest.is_fresh("report", chash, ih, outputs):
        return outputs
    meta = json.loads(cfg.path("peaks_meta.json").read_text())
    m_hs = json.loads(cfg.path("marginal_hs.json").read_text())
    ht = json.loads(cfg.path("ht.json").read_text())
    zeta_rows = []
    with open(cfg.path("zeta.csv")) as fh:
        next(fh)
        for line in fh:
            tag, label, z = line.strip().split(",")
            zeta_rows.append({"structure": tag, "contour": label, "zeta": float(z)})
    returns = {}
    for name in cfg.structures:
        tag = _structure_tag(name)
        returns[tag] = _read_return_values(cfg.path(f"return_values_{tag}.csv"))
    summary = {
        "n_an": meta["n_an"],
        "storm_count": meta["count"],
        "marginal_hs": {k: m_hs["gpd"][k] for k in ("u", "sigma", "xi", "p_u")},
        "dependence": {k: ht[k] for k in ("alpha", "beta", "v")},
        "jonswap": {"gamma": cfg.jonswap_gamma, "r": cfg.jonswap_r,
                    "note": "gamma and r are community defaults, not fitted"},
        "return_values": returns,
        "cde_p": cfg.cde_p,
        "zeta": zeta_rows,
    }
    outputs[0].write_text(json.dumps(summary, indent=2, sort_keys=True))
    tags = [_structure_tag(n) for n in cfg.structures]
    lines = ["Return values r_P (N):"]
    for tag in tags:
        for p, rp in sorted(returns[tag].items()):
            lines.append(f"  structure {tag}  P={p:g}  r_P={rp:.6g}")
    lines.append("")
    lines.append(f"Contour overlap zeta at P={cfg.cde_p:g} "
                 "(+1 conservative, -1 non-conservative):")
    header = "  contour".ljust(44) + "".join(t.rjust(12) for t in tags)
    lines.append(header)
    for label in cfg.contour_models:
        row = "  " + label.ljust(42)
        for tag in tags:
            z = next(r["zeta"] for r in zeta_rows
                     if r["structure"] == tag and r["contour"] == label)
            row += f"{z:12.3f}"
        lines.append(row)
    outputs[1].write_text("\n".join(lines) + "\n")
    manifest.record("report", chash, ih, outputs)
    return outputs


_STAGE_FUNCS = {
    "synth": stage_synth,
    "peaks": stage_peaks,
    "fit-marginal": stage_fit_marginal,
    "fit-ht": stage_fit_ht,
    "simulate-env": stage_simulate_env,
    "respond": stage_respond,
    "cde": stage_cde,
    "contour": stage_contour,
    "zeta": stage_zeta,
    "report": stage_report,
}


def run_stage(name: str, cfg: RunConfig, force: bool = False) -> list[Path]:
    cfg.path("").mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.path("manifest.json"))
    return _STAGE_FUNCS[name](cfg, manifest, force=force)


def run_pipeline(cfg: RunConfig, force: bool = False, use_synth: bool = True):
    """Run all stages in order; any stage failure aborts with its name."""
    cfg.path("").mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.path("manifest.json"))
    order = list(STAGES) if use_synth else [s for s in STAGES if s != "synth"]
    done = []
    for name in order:
        try:
            _STAGE_FUNCS[name](cfg, manifest, force=force)
        except Exception as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        done.append(name)
    return done
