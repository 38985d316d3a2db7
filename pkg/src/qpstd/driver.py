"""Run orchestration: build a model from a configuration and execute it.

The scatter pipeline is: cold start from zero fields, inject the incident
wave with a smooth turn-on, step to steady state (monochromatic) or to the
configured length (pulsed), accumulate virtual-plane phasors over exactly
one drive cycle (monochromatic) or the whole run (pulsed), scale by the
incident phasor, and hand the result to the surface integrator for
angular scans at the requested radii.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import archive as ar
from .boundary import AbsorberProfile, build_mask
from .config import ConfigError, RunConfig
from .lattice import (
    GridSpec,
    ModelGeometry,
    Region,
    WaveField,
    build_geometry,
    build_potential,
    central_square_well,
)
from .ntdf import (
    FACES,
    ObservationCircle,
    SurfacePhasors,
    VirtualPlaneRecorder,
    evaluate_distant,
    spherical_wave_fields,
    make_phasors_from_analytic,
)
from .oracle import differential_cross_section, square_well_solution
from .parallel import DecomposedModel, Topology
from .source import (
    IncidentDirection,
    make_pulsed_gaussian_source,
    make_sinusoidal_source,
)
from .stepper import Propagator, phase_velocity_correction, stability_dtau
from .tfsf import build_injection, build_taper

TWO_PI = 2.0 * math.pi

SCAN_PLANES = {
    "xy": (0.0, 0.0),
    "yz": (0.0, 90.0),
    "xz": (90.0, 90.0),
}


def workers_from_env(default: int = 0) -> int:
    """Worker count: QPSTD_WORKERS env var wins, else config, else cpu count."""
    env = os.environ.get("QPSTD_WORKERS")
    if env:
        return max(1, int(env))
    if default > 0:
        return default
    return max(1, os.cpu_count() or 1)


@dataclass
class ModelSetup:
    cfg: RunConfig
    grid: GridSpec
    geometry: ModelGeometry
    mode: str
    kinetic_scale: float
    mask: np.ndarray
    potential: Optional[np.ndarray]
    source: object
    vmax: float
    workers: int
    topology: Optional[Topology]


def build_setup(cfg: RunConfig) -> ModelSetup:
    n = [int(x) for x in cfg.get_floats("lattice.n")]
    spacing = cfg.get_floats("lattice.spacing")
    if len(spacing) == 1:
        spacing = spacing * len(n)
    mode = cfg.get_str("stepper.mode")
    w_trans = 8 if mode == "fdtd" else cfg.get_int("tfsf.transition_grids")
    geometry = build_geometry(
        n,
        w_abc=cfg.get_int("geometry.abc_grids"),
        w_sf=cfg.get_int("geometry.sf_grids"),
        w_trans=w_trans,
        w_halo=cfg.get_int("parallel.n_halo"),
        stepper_mode=mode,
    )

    pot_kind = cfg.get_str("potential.kind")
    vmax = abs(cfg.get_float("potential.s")) if pot_kind == "square_well" else 0.0
    dtau = cfg.get_float("stepper.dtau")
    bound = stability_dtau(mode, spacing, vmax)
    if dtau <= 0:
        dtau = 0.99 * bound
    grid = GridSpec(
        n=tuple(n),
        spacing=tuple(spacing),
        dtau=dtau,
        min_grids_per_wavelength=cfg.get_float("lattice.min_grids_per_wavelength"),
    )

    potential = None
    if pot_kind == "square_well":
        spec = central_square_well(
            s=cfg.get_float("potential.s"),
            radius=cfg.get_float("potential.radius"),
            antialias=cfg.get_int("potential.antialias"),
        )
        potential = build_potential(spec, geometry, grid)
    elif pot_kind != "none":
        raise ConfigError(f"unknown potential.kind {pot_kind!r}")

    profile = AbsorberProfile(
        u0=cfg.get_float("abc.u0"),
        alpha=cfg.get_float("abc.alpha_per_grid"),
        width=cfg.get_int("abc.width_grids"),
        clipped=cfg.get_str("abc.profile") == "clipped",
    )
    if profile.width > geometry.w_abc:
        raise ConfigError("abc.width_grids exceeds the geometry's absorbing layer")
    mask = build_mask(profile, geometry, dtau).mask

    direction = IncidentDirection(
        theta_deg=cfg.get_float("incidence.theta_deg"),
        phi_deg=cfg.get_float("incidence.phi_deg"),
    )
    inc_mode = cfg.get_str("incidence.mode")
    eta_on = cfg.get_bool("stepper.monochromatic_eta")
    kinetic_scale = (
        phase_velocity_correction(dtau) if (eta_on and inc_mode == "sinusoidal") else 1.0
    )
    if inc_mode == "sinusoidal":
        source = make_sinusoidal_source(direction, geometry, grid, dtau)
    elif inc_mode == "pulsed":
        steps = cfg.get_int("run.steps")
        center = cfg.get_float("incidence.pulse.center")
        source = make_pulsed_gaussian_source(
            direction,
            geometry,
            grid,
            dtau,
            sigma=cfg.get_float("incidence.pulse.width"),
            center=None if center == 0.0 else center,
            run_tau=steps * dtau,
            kinetic_scale=kinetic_scale,
            interp=cfg.get_str("incidence.interp"),
        )
    else:
        raise ConfigError(f"unknown incidence.mode {inc_mode!r}")

    counts = (
        cfg.get_int("parallel.px"),
        cfg.get_int("parallel.py"),
        cfg.get_int("parallel.pz"),
    )[: grid.ndim]
    topology = None
    if any(c > 1 for c in counts):
        topology = Topology(
            counts=counts,
            n_halo=cfg.get_int("parallel.n_halo"),
            n_t=cfg.get_int("parallel.n_t"),
        )
    return ModelSetup(
        cfg=cfg,
        grid=grid,
        geometry=geometry,
        mode=mode,
        kinetic_scale=kinetic_scale,
        mask=mask,
        potential=potential,
        source=source,
        vmax=vmax,
        workers=workers_from_env(cfg.get_int("parallel.workers")),
        topology=topology,
    )


@dataclass
class ScatterResult:
    phasors: Dict[float, SurfacePhasors]
    steps_total: int
    sf_residual: float
    tf_peak: float
    grid: GridSpec
    geometry: ModelGeometry
    wall_seconds: float
    stability_bound: float


def run_scatter_model(cfg: RunConfig, progress=None) -> ScatterResult:
    """Step the internal model and return scaled surface phasors."""
    t0 = time.perf_counter()
    setup = build_setup(cfg)
    grid, geometry = setup.grid, setup.geometry
    dtau = grid.dtau
    omegas = cfg.get_floats("ntdf.omegas")
    recorder = VirtualPlaneRecorder(geometry, grid, omegas, setup.source)

    taper = build_taper(geometry, grid) if setup.mode == "pstd" else None
    injection = build_injection(
        geometry, grid, setup.source, setup.mode, taper=taper
    )
    sinusoidal = setup.source.mode == "sinusoidal"
    if sinusoidal:
        injection.ramp_steps = int(
            round(cfg.get_float("run.soft_start_periods") * TWO_PI / dtau)
        )
        warmup = int(round(cfg.get_float("run.warmup_periods") * TWO_PI / dtau))
        drive_omega = 1.0
        window = int(round(TWO_PI / (drive_omega * dtau)))
        if abs(window * dtau - TWO_PI / drive_omega) > 1e-9:
            raise ConfigError(
                "dtau must divide the drive period for one-cycle phasor "
                f"accumulation; got {TWO_PI / dtau:.6f} steps per period"
            )
        total = warmup + window
    else:
        warmup = 0
        window = cfg.get_int("run.steps")
        if window <= 0:
            raise ConfigError("pulsed runs need run.steps > 0")
        total = window

    if setup.topology is not None:
        model = DecomposedModel(
            grid,
            setup.topology,
            mode=setup.mode,
            kinetic_scale=setup.kinetic_scale,
            mask=setup.mask,
            potential=setup.potential,
            geometry=geometry,
            taper=taper,
            source=setup.source,
            workers=setup.workers,
        )
        # the decomposed model builds its own local injections; mirror the ramp
        if sinusoidal:
            for prop in model.props.values():
                prop.injection.ramp_steps = injection.ramp_steps
        for step_i in range(total):
            if step_i >= warmup:
                recorder.accumulate(model.gather("cur"), model.n, spec=None)
            model.step()
            if progress:
                progress(step_i + 1, total)
        final_field = model.gather("cur")
        steps_done = model.n
    else:
        prop = Propagator(
            grid,
            mode=setup.mode,
            kinetic_scale=setup.kinetic_scale,
            mask=setup.mask,
            potential=setup.potential,
            injection=injection,
            workers=setup.workers,
            nan_check_every=cfg.get_int("stepper.nan_check_every"),
        )
        state = WaveField.zeros(grid.n)
        holder: Dict[str, np.ndarray] = {}

        def hook(nlevel, spec):
            recorder.accumulate(holder["field"], nlevel, spec=spec)

        for step_i in range(total):
            recording = step_i >= warmup
            if setup.mode == "pstd":
                prop.on_spectrum = hook if recording else None
                holder["field"] = state.cur
            elif recording:
                recorder.accumulate(state.cur, state.n, spec=None)
            state = prop.step(state)
            if setup.source.mode == "pulsed":
                setup.source.advance()
            if progress:
                progress(step_i + 1, total)
        prop.on_spectrum = None
        final_field = state.cur
        steps_done = state.n

    phasors = recorder.finalize()
    region = geometry.region_map()
    sf_res = float(np.abs(final_field[region == int(Region.SF)]).max())
    tf_peak = float(np.abs(final_field[region == int(Region.TF)]).max())
    return ScatterResult(
        phasors=phasors,
        steps_total=steps_done,
        sf_residual=sf_res,
        tf_peak=tf_peak,
        grid=grid,
        geometry=geometry,
        wall_seconds=time.perf_counter() - t0,
        stability_bound=stability_dtau(setup.mode, grid.spacing, setup.vmax),
    )


def scan_circle(
    phasors: SurfacePhasors,
    plane: str,
    radius: float,
    n_points: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Complex scattered wave along one Euler circle (gamma in degrees)."""
    if plane not in SCAN_PLANES:
        raise ValueError(f"unknown scan plane {plane!r}; use xy, yz or xz")
    alpha, beta = SCAN_PLANES[plane]
    circle = ObservationCircle(radius=radius, alpha_deg=alpha, beta_deg=beta)
    gammas = np.arange(n_points) * (360.0 / n_points)
    pts = circle.points(gammas)
    vals = evaluate_distant(phasors, pts)
    return gammas, vals


def cross_section_from_scan(radius: float, values: np.ndarray) -> np.ndarray:
    """d(sigma)/d(Omega) = |r * psi|^2 for scaled phasors."""
    return (radius ** 2) * np.abs(values) ** 2


def cmd_scatter(cfg: RunConfig, outdir, progress=None) -> dict:
    """Full scatter run: archive, angular scans, manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run_scatter_model(cfg, progress=progress)
    outputs: List[Path] = []
    archive_path = outdir / cfg.get_str("output.archive")
    ar.write_phasor_archive(
        archive_path,
        result.phasors,
        meta={
            "steps": result.steps_total,
            "sf_residual": result.sf_residual,
            "tf_peak": result.tf_peak,
            "dtau": result.grid.dtau,
            "stability_bound": result.stability_bound,
            "wall_seconds": result.wall_seconds,
        },
    )
    outputs.append(archive_path)
    radii = cfg.get_floats("ntdf.scan_radii")
    planes = cfg.get_strs("ntdf.scan_planes")
    n_points = cfg.get_int("ntdf.scan_points")
    scans = {}
    for omega, ph in result.phasors.items():
        for plane in planes:
            for radius in radii:
                gammas, vals = scan_circle(ph, plane, radius, n_points)
                tag = f"scan_w{omega:g}_{plane}_r{radius:g}"
                p1 = ar.write_scan_csv(outdir / f"{tag}.csv", gammas, vals)
                p2 = ar.write_cross_section_csv(
                    outdir / f"{tag}_dsdo.csv",
                    gammas,
                    cross_section_from_scan(radius, vals),
                )
                outputs.extend([p1, p2])
                scans[(omega, plane, radius)] = (gammas, vals)
    manifest = ar.write_manifest(
        outdir / "manifest.json",
        cfg.snapshot(),
        outputs,
        extra={
            "dtau": result.grid.dtau,
            "stability_bound": result.stability_bound,
            "wall_seconds": result.wall_seconds,
            "steps": result.steps_total,
            "sf_residual": result.sf_residual,
            "topology": [
                cfg.get_int("parallel.px"),
                cfg.get_int("parallel.py"),
                cfg.get_int("parallel.pz"),
            ],
        },
    )
    return {
        "result": result,
        "archive": archive_path,
        "manifest": manifest,
        "scans": scans,
        "outputs": outputs,
    }


def cmd_ntdf_validate(cfg: RunConfig, outdir: Optional[Path] = None) -> dict:
    """Reconstruct an analytic spherical wave from closed-box surface data.

    Surface data for exp(ik r)/r is generated on the configured box, the
    wave is rebuilt on the three Euler circles at each radius, and per-point
    amplitude/phase errors are compared against the tolerances.
    """
    h = cfg.get_float("validate.spacing")
    ngrid = cfg.get_int("validate.plane_grids")
    half = (
        cfg.get_float("validate.half_extent_x"),
        cfg.get_float("validate.half_extent_y"),
        cfg.get_float("validate.half_extent_z"),
    )
    n3 = (ngrid, ngrid, ngrid)
    box_window = []
    for ax, hx in enumerate(half):
        offset = 0.5 * (n3[ax] - 1) - hx / h
        idx = int(round(offset))
        if abs(offset - idx) > 0.05:
            raise ConfigError(
                f"box half-extent {hx} does not land on a grid plane "
                f"(offset {offset:.4f} grids)"
            )
        box_window.append((idx, n3[ax] - 1 - idx))
    psi_fn, grad_fn = spherical_wave_fields(k=1.0)
    phasors = make_phasors_from_analytic(
        psi_fn, grad_fn, (h, h, h), n3, tuple(box_window), omega=1.0
    )
    radii = cfg.get_floats("validate.radii")
    npts = cfg.get_int("validate.points_per_circle")
    amp_tol = cfg.get_float("validate.amplitude_tol")
    phase_tol = cfg.get_float("validate.phase_tol_rad")
    rows = []
    worst = {"amp_err": 0.0, "phase_err": 0.0}
    for plane in ("xy", "yz", "xz"):
        for radius in radii:
            gammas, vals = scan_circle(phasors, plane, radius, npts)
            amp = np.abs(radius * vals)
            phase_err = np.abs(np.angle(radius * vals * np.exp(-1j * radius)))
            flat = float(amp.max() / max(amp.min(), 1e-300))
            for g, a, p in zip(gammas, amp, phase_err):
                rows.append((plane, radius, g, a, p))
            worst["amp_err"] = max(worst["amp_err"], float(np.abs(amp - 1.0).max()))
            worst["phase_err"] = max(worst["phase_err"], float(phase_err.max()))
            worst.setdefault("flatness", 0.0)
            worst["flatness"] = max(worst["flatness"], flat)
    passed = worst["amp_err"] <= amp_tol and worst["phase_err"] <= phase_tol
    report = {
        "passed": bool(passed),
        "max_amplitude_error": worst["amp_err"],
        "max_phase_error_rad": worst["phase_err"],
        "max_circle_flatness": worst.get("flatness", 1.0),
        "amplitude_tol": amp_tol,
        "phase_tol_rad": phase_tol,
        "radii": radii,
        "points_per_circle": npts,
    }
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / "ntdf_validate.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("plane,radius,gamma_deg,amp_times_r,phase_err_rad\n")
            for plane, radius, g, a, p in rows:
                fh.write(f"{plane},{radius:g},{g:.6f},{a:.17g},{p:.17g}\n")
        summary = outdir / "ntdf_validate_summary.json"
        import json

        with open(summary, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        report["csv"] = str(path)
        report["summary"] = str(summary)
    return report


def cmd_oracle_compare(cfg: RunConfig, archive_path, outdir: Optional[Path] = None) -> dict:
    """Compare solver far-field cross-sections against the partial-wave oracle."""
    phasors_all = ar.read_phasor_archive(archive_path)
    if cfg.get_str("potential.kind") != "square_well":
        raise ConfigError("oracle comparison needs potential.kind = square_well")
    omega = sorted(phasors_all)[0]
    phasors = phasors_all[omega]
    k = math.sqrt(omega)
    k_cfg = cfg.get_float("oracle.k")
    if k_cfg > 0 and abs(k_cfg - k) > 1e-9:
        raise ConfigError(
            f"oracle wavenumber {k_cfg} does not match the archive ({k:.6g})"
        )
    lmax = cfg.get_int("oracle.lmax_override")
    sol = square_well_solution(
        s=cfg.get_float("potential.s"),
        radius=cfg.get_float("potential.radius"),
        k=k,
        l_max=None if lmax <= 0 else lmax,
        radial_step=cfg.get_float("oracle.radial_step"),
    )
    radius = max(cfg.get_floats("ntdf.scan_radii"))
    n_points = cfg.get_int("ntdf.scan_points")
    direction = IncidentDirection(
        theta_deg=cfg.get_float("incidence.theta_deg"),
        phi_deg=cfg.get_float("incidence.phi_deg"),
    )
    k_inc = direction.unit
    reports = {}
    for plane in ("xy",):
        gammas, vals = scan_circle(phasors, plane, radius, n_points)
        dsdo_solver = cross_section_from_scan(radius, vals)
        alpha, beta = SCAN_PLANES[plane]
        circle = ObservationCircle(radius=radius, alpha_deg=alpha, beta_deg=beta)
        dirs = circle.directions(gammas)
        cos_theta = np.clip(dirs @ k_inc, -1.0, 1.0)
        theta = np.arccos(cos_theta)
        dsdo_oracle = differential_cross_section(sol, theta)
        floor = cfg.get_float("compare.floor_fraction") * dsdo_oracle.max()
        mask = dsdo_oracle >= floor
        rel = (dsdo_solver[mask] - dsdo_oracle[mask]) / dsdo_oracle[mask]
        rms = float(np.sqrt(np.mean(rel**2)))
        reports[plane] = {
            "rms_relative_deviation": rms,
            "points_used": int(mask.sum()),
            "points_total": int(gammas.size),
            "radius": radius,
            "passed": rms <= cfg.get_float("compare.rms_tol"),
        }
        if outdir is not None:
            outdir = Path(outdir)
            outdir.mkdir(parents=True, exist_ok=True)
            ar.write_joined_csv(
                outdir / f"oracle_compare_{plane}.csv",
                gammas,
                dsdo_solver,
                dsdo_oracle,
            )
    report = reports["xy"]
    report["rms_tol"] = cfg.get_float("compare.rms_tol")
    return report


def stability_report(cfg: RunConfig) -> dict:
    """Time-step bounds and resolution summary for the configured model."""
    spacing = cfg.get_floats("lattice.spacing")
    n = [int(x) for x in cfg.get_floats("lattice.n")]
    if len(spacing) == 1:
        spacing = spacing * len(n)
    vmax = (
        abs(cfg.get_float("potential.s"))
        if cfg.get_str("potential.kind") == "square_well"
        else 0.0
    )
    b_pstd = stability_dtau("pstd", spacing, vmax)
    b_fdtd = stability_dtau("fdtd", spacing, vmax)
    dtau = cfg.get_float("stepper.dtau")
    mode = cfg.get_str("stepper.mode")
    chosen = dtau if dtau > 0 else 0.99 * stability_dtau(mode, spacing, vmax)
    return {
        "mode": mode,
        "spacing": spacing,
        "grids_per_wavelength": [TWO_PI / h for h in spacing],
        "vmax": vmax,
        "bound_pstd": b_pstd,
        "bound_fdtd": b_fdtd,
        "dtau": chosen,
        "dtau_ok": chosen <= stability_dtau(mode, spacing, vmax) * (1 + 1e-12),
        "eta": phase_velocity_correction(chosen),
    }
