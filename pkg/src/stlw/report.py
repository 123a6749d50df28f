"""Experiment execution with file outputs: CSV tables, summary, figures, manifest."""

import csv
import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .grid import build_staggered_grid, grid_metrics
from .properties import verify_flux_properties
from .verify import convergence_study, l1_distance, smoothed_reference

CSV_HEADER = ["experiment", "h", "phi_id", "weak_residual", "entropy_a", "entropy_residual",
              "l1_error", "mass_drift", "rate"]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class RunOutcome:
    rows: list
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    discriminator: list = field(default_factory=list)
    flux_report: object = None

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_convergence_csv(path, name, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([name, _fmt(r.h), _fmt(r.weak_phi), _fmt(r.weak_residual),
                        _fmt(r.entropy_a), _fmt(r.entropy_residual), _fmt(r.l1_error),
                        _fmt(r.mass_drift), _fmt(r.rate)])


def write_profile_csv(path, profile, h):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "x_lo", "x_hi", "u"])
        for a, b, u in zip(profile.lo, profile.hi, np.asarray(profile.u).reshape(len(profile.lo), -1)[:, 0]):
            w.writerow([_fmt(h), _fmt(a), _fmt(b), _fmt(u)])


def write_table_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) or v is None else v for v in r])


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "stlw"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def plot_convergence(path, name, rows):
    """log2 h against log10 of the L1 error and the weak residual."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    lh = [math.log2(r.h) for r in rows]
    for label, vals in (("L1 error", [r.l1_error for r in rows]),
                        ("max |weak residual|", [r.weak_residual for r in rows])):
        pts = [(x, math.log10(v)) for x, v in zip(lh, vals) if v and v > 0 and not math.isnan(v)]
        if pts:
            ax.plot(*zip(*pts), marker="o", label=label)
    ax.set_xlabel("log2 h")
    ax.set_ylabel("log10 value")
    ax.set_title(name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_profile(path, name, profile, reference=None, window=None):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    u = np.asarray(profile.u).reshape(len(profile.lo), -1)[:, 0]
    x = np.ravel(np.column_stack([profile.lo, profile.hi]))
    ax.plot(x, np.repeat(u, 2), label="numerical")
    if reference is not None:
        xs = np.linspace(*(window or (profile.lo[0], profile.hi[-1])), 801)
        ax.plot(xs, reference(xs), "--", label="reference")
    if window is not None:
        ax.set_xlim(*window)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def sha256(path):
    hsh = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            hsh.update(chunk)
    return hsh.hexdigest()


def write_manifest(out_dir, files):
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w", newline="") as fh:
        for f in sorted(files):
            fh.write(f"{sha256(os.path.join(out_dir, f))}  {f}\n")
    return path


def _assertions(cfg, rows, discriminator, flux_report):
    """Evaluate the [assert] section; returns a list of Check."""
    checks = []
    l1 = [r.l1_error for r in rows]
    v = cfg.float("assert", "min_rate")
    if v is not None:
        rates = [r.rate for r in rows[1:]]
        checks.append(Check("min_rate", all(x >= v for x in rates), f"rates {rates}, need >= {v}"))
    v = cfg.float("assert", "max_final_l1")
    if v is not None:
        checks.append(Check("max_final_l1", l1[-1] <= v, f"final L1 {l1[-1]!r}, need <= {v}"))
    v = cfg.float("assert", "min_final_l1")
    if v is not None:
        checks.append(Check("min_final_l1", l1[-1] >= v, f"final L1 {l1[-1]!r}, need >= {v}"))
    if cfg.bool("assert", "l1_nondecreasing"):
        ok = all(b >= a for a, b in zip(l1, l1[1:]))
        checks.append(Check("l1_nondecreasing", ok, f"L1 {l1}"))
    if cfg.bool("assert", "weak_decreasing"):
        wr = [r.weak_residual for r in rows]
        ok = all(b < a for a, b in zip(wr, wr[1:]))
        checks.append(Check("weak_decreasing", ok, f"weak residuals {wr}"))
    v = cfg.float("assert", "max_balance")
    if v is not None:
        bal = max(r.run.max_balance_residual for r in rows)
        checks.append(Check("max_balance", bal <= v, f"balance residual {bal!r}, need <= {v}"))
    v = cfg.float("assert", "max_mass_drift")
    if v is not None:
        md = max(r.mass_drift for r in rows)
        checks.append(Check("max_mass_drift", md <= v, f"mass drift {md!r}, need <= {v}"))
    v = cfg.float("assert", "max_smoothed_l1")
    if v is not None and discriminator:
        worst = max(d[1] / d[3] for d in discriminator)
        checks.append(Check("max_smoothed_l1", worst <= v,
                            f"L1 to smoothed / |u0| up to {worst!r}, need <= {v}"))
    if flux_report is not None:
        bad = [k for k, ok in flux_report.passed.items() if not ok]
        checks.append(Check("flux_properties", not bad,
                            "all conditions hold" if not bad else f"violated: {', '.join(bad)}"))
    return checks


def discriminator_rows(cfg, exp, rows):
    """(h, L1 to Gaussian reference, L1 to true solution, |u0|_L1, quasi_ratio) per h."""
    u0 = exp.u0
    norm = u0.l1_norm()
    out = []
    for r in rows:
        smooth = l1_distance(r.run.profile, smoothed_reference(exp.t_report, r.h, u0), exp.window)
        dt = r.run.march.dt if hasattr(r.run.march, "dt") else r.run.march.solution.grid.meta["dt"]
        slab = build_staggered_grid(r.h, dt, 4 * dt, cfg.float("experiment", "x_lo"),
                                    cfg.float("experiment", "x_hi"))
        out.append((r.h, smooth, r.l1_error, norm, grid_metrics(slab).quasi_ratio))
    return out


def run_experiment(cfg, exp, out_dir, seed=None):
    """March, verify and write every output file; returns a RunOutcome."""
    os.makedirs(out_dir, exist_ok=True)
    name = cfg.name
    hs = cfg.floats("grid", "h")
    rows = convergence_study(exp, hs) if len(hs) >= 3 else _single_rows(exp, hs)
    files = []

    def emit(fname):
        files.append(fname)
        return os.path.join(out_dir, fname)

    write_convergence_csv(emit(f"{name}_convergence.csv"), name, rows)
    finest = rows[-1].run
    write_profile_csv(emit(f"{name}_profile.csv"), finest.profile, finest.h)
    ref = exp.reference(exp.t_report, finest.h) if exp.reference else None
    plot_profile(emit(f"{name}_profile.svg"), name, finest.profile, ref, exp.window)
    plot_convergence(emit(f"{name}_convergence.svg"), name, rows)

    disc = []
    if cfg.bool("reference", "smoothed"):
        disc = discriminator_rows(cfg, exp, rows)
        write_table_csv(emit(f"{name}_discriminator.csv"),
                        ["h", "l1_to_smoothed", "l1_to_true", "u0_l1_norm", "quasi_ratio"], disc)

    flux_report = None
    if cfg.bool("assert", "flux_properties"):
        flux_report = flux_properties(cfg, exp, seed)
        write_flux_report(emit(f"{name}_flux_properties.csv"), flux_report)

    checks = _assertions(cfg, rows, disc, flux_report)
    write_summary(emit(f"{name}_summary.txt"), cfg, rows, disc, checks)
    write_manifest(out_dir, files)
    files.append("manifest.txt")
    return RunOutcome(rows, checks, files, disc, flux_report)


def _single_rows(exp, hs):
    from .verify import ConvergenceRow, run_once
    rows = []
    for h in hs:
        run = run_once(exp, h)
        rep = run.residuals
        wk = rep.worst_weak() if rep else None
        ek = rep.worst_entropy() if rep else None
        rows.append(ConvergenceRow(h, run.l1_error,
                                   abs(rep.weak[wk]) if wk is not None else float("nan"), wk,
                                   rep.entropy[ek] if ek is not None else float("nan"),
                                   ek[0] if ek is not None else None,
                                   run.mass_drift, float("nan"), run))
    for prev, row in zip(rows, rows[1:]):
        if prev.l1_error > 0 and row.l1_error > 0:
            row.rate = math.log2(prev.l1_error / row.l1_error)
    return rows


def flux_properties(cfg, exp, seed=None):
    """Flux-condition report on the coarsest configured grid."""
    h = cfg.floats("grid", "h")[0]
    grid = exp.build_grid(h)
    scheme = exp.build_scheme(exp.model, grid)
    return verify_flux_properties(scheme.flux_def, scheme.source_def, grid, exp.model,
                                  seed=cfg.seed if seed is None else seed)


def write_flux_report(path, report):
    write_table_csv(path, ["condition", "value", "passed"],
                    [(k, float(v), str(bool(ok)).lower()) for k, v, ok in report.rows()])


def write_summary(path, cfg, rows, disc, checks):
    lines = [f"experiment: {cfg.name}", f"config: {os.path.basename(cfg.path)}", ""]
    lines.append(f"{'h':>10} {'L1 error':>12} {'rate':>7} {'weak':>11} {'entropy':>11} "
                 f"{'mass drift':>11} {'balance':>10} {'CFL':>4}")
    for r in rows:
        lines.append(f"{r.h:10.5g} {r.l1_error:12.5g} {r.rate:7.3f} {r.weak_residual:11.4g} "
                     f"{r.entropy_residual:11.4g} {r.mass_drift:11.3g} "
                     f"{r.run.max_balance_residual:10.3g} {r.run.cfl_violations:4d}")
    if disc:
        lines += ["", "discriminator (L1 distances over the window):",
                  f"{'h':>10} {'to smoothed':>12} {'to true':>10} {'quasi_ratio':>12}"]
        for h, s, t, n, q in disc:
            lines.append(f"{h:10.5g} {s:12.5g} {t:10.5g} {q:12.5g}")
        trend = all(b[2] >= a[2] for a, b in zip(disc, disc[1:]))
        lines.append("L1 to the true solution " + ("grows" if trend else "does not grow")
                     + " as h falls; the limit is the smoothed profile, not u0.")
    if checks:
        lines += ["", "assertions:"]
        for c in checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


__all__ = ["CSV_HEADER", "Check", "RunOutcome", "run_experiment", "write_convergence_csv",
           "write_profile_csv", "write_table_csv", "plot_convergence", "plot_profile",
           "write_manifest", "sha256", "discriminator_rows", "flux_properties",
           "write_flux_report", "write_summary"]
