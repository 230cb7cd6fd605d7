"""Command-line front end: config parsing, experiment orchestration and
deterministic report/plot-data emission.

``shrinktarget run <config>`` executes the enabled modes and writes a report
plus raw data into the output directory; ``validate`` parses and echoes the
resolved config; ``version`` prints the package version.  Identical configs
(and seed) produce byte-identical reports and raw files regardless of the
thread count; wall-clock provenance goes to a ``run.log`` sidecar so the
report itself stays reproducible.
"""

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, backend, diagnostics, dynamics, mcstats, targets, transfer
from .errors import ConfigError, ShrinkTargetError

MODES = (
    "sbc", "clt-paper-norm", "clt-self-norm", "identities", "assumption-c",
    "sp", "gal-koksma", "recurrence", "spectral",
)

DEFAULT_TOLERANCES = {
    "identity_residual": 1e-10,
    "sbc_mean_low": 0.95,
    "sbc_mean_high": 1.05,
    "sbc_std_low": 0.15,
    "sbc_std_high": 0.45,
    "ks_paper_max": 0.12,
    "ks_self_delta": 0.03,
    "sp_ratio_max": 2.0,
    "recurrence_abs": 1e-12,
    "recurrence_ratio_max": 5.0,
    "spectral_abs": 1e-6,
    "gal_koksma_max": 5.0,
}

_EXPERIMENT_KEYS = (
    "map", "center", "gamma", "C", "n_max", "M", "seed", "checkpoints",
    "modes", "transfer_model", "output_dir", "eta", "kappa", "i_threshold",
)


def _fmt(x) -> str:
    """17 significant digits: lossless for binary64."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class ExperimentConfig:
    map: str = "doubling"
    center: str = "generic-default"
    gamma: float = 1.0
    C: float = 1.0
    n_max: int = 100000
    M: int = 1000
    seed: int = 0
    checkpoints: list = None
    modes: list = None
    transfer_model: str = ""
    output_dir: str = "out"
    eta: float = 0.5
    kappa: float = 1.5
    i_threshold: int = 100
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def resolved_center(self) -> float:
        return _resolve_center(self.center)

    def echo(self) -> str:
        """Resolved config in the input format; re-parsing it round-trips."""
        lines = ["[experiment]"]
        lines.append(f"map = {self.map}")
        lines.append(f"center = {self.center}")
        lines.append(f"gamma = {_fmt(self.gamma)}")
        lines.append(f"C = {_fmt(self.C)}")
        lines.append(f"n_max = {self.n_max}")
        lines.append(f"M = {self.M}")
        lines.append(f"seed = {self.seed}")
        lines.append("checkpoints = " + ", ".join(str(c) for c in self.checkpoints))
        lines.append("modes = " + ", ".join(self.modes))
        if self.transfer_model:
            lines.append(f"transfer_model = {self.transfer_model}")
        lines.append(f"output_dir = {self.output_dir}")
        lines.append(f"eta = {_fmt(self.eta)}")
        lines.append(f"kappa = {_fmt(self.kappa)}")
        lines.append(f"i_threshold = {self.i_threshold}")
        lines.append("")
        lines.append("[tolerances]")
        for k in sorted(self.tolerances):
            lines.append(f"{k} = {_fmt(self.tolerances[k])}")
        return "\n".join(lines) + "\n"


def _resolve_center(spec: str) -> float:
    s = spec.strip()
    if s == "generic-default":
        return targets.GENERIC_CENTER
    if s.startswith("random(") and s.endswith(")"):
        from . import rng

        sd = int(s[len("random("):-1])
        return float(rng.uniforms(sd, 0, 1)[0])
    return float(s)


def _cfg_int(val, line, key, lo=1):
    try:
        v = int(val)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {val!r}", line)
    if v < lo:
        raise ConfigError(f"{key} must be >= {lo}", line)
    return v


def _cfg_float(val, line, key):
    try:
        return float(val)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {val!r}", line)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a line-oriented ``key = value`` document with [section] headers.

    Unknown keys, type mismatches and constraint violations raise ConfigError
    naming the offending line."""
    cfg = ExperimentConfig()
    seen_cp = False
    section = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("experiment", "tolerances"):
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if section == "tolerances":
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}", lineno)
            cfg.tolerances[key] = _cfg_float(val, lineno, key)
            continue
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key == "map":
            cfg.map = val
            try:
                dynamics.make_map(val)
            except ShrinkTargetError as e:
                raise ConfigError(f"bad map spec {val!r}: {e}", lineno)
        elif key == "center":
            cfg.center = val
            try:
                p = _resolve_center(val)
            except ValueError:
                raise ConfigError(f"bad center {val!r}", lineno)
            if isinstance(p, float) and not 0.0 <= p < 1.0 and "," not in val:
                raise ConfigError("center must lie in [0, 1)", lineno)
        elif key == "gamma":
            cfg.gamma = _cfg_float(val, lineno, key)
            if not 0.0 < cfg.gamma <= 1.0:
                raise ConfigError("gamma must lie in (0, 1]", lineno)
        elif key == "C":
            cfg.C = _cfg_float(val, lineno, key)
            if cfg.C <= 0.0:
                raise ConfigError("C must be positive", lineno)
        elif key == "n_max":
            cfg.n_max = _cfg_int(val, lineno, key)
        elif key == "M":
            cfg.M = _cfg_int(val, lineno, key)
        elif key == "seed":
            cfg.seed = _cfg_int(val, lineno, key, lo=0)
        elif key == "checkpoints":
            try:
                cps = [int(s) for s in val.replace(",", " ").split()]
            except ValueError:
                raise ConfigError("checkpoints must be integers", lineno)
            if not cps or any(b <= a for a, b in zip(cps, cps[1:])):
                raise ConfigError(
                    "checkpoints must be nonempty and strictly ascending", lineno
                )
            cfg.checkpoints = cps
            seen_cp = True
        elif key == "modes":
            ms = [s for s in val.replace(",", " ").split()]
            for mname in ms:
                if mname not in MODES:
                    raise ConfigError(f"unknown mode {mname!r}", lineno)
            cfg.modes = ms
        elif key == "transfer_model":
            cfg.transfer_model = val
            try:
                _parse_model_spec(val)
            except ValueError as e:
                raise ConfigError(str(e), lineno)
        elif key == "output_dir":
            cfg.output_dir = val
        elif key == "eta":
            cfg.eta = _cfg_float(val, lineno, key)
            if not 0.0 < cfg.eta < 2.0:
                raise ConfigError("eta must lie in (0, 2)", lineno)
        elif key == "kappa":
            cfg.kappa = _cfg_float(val, lineno, key)
            if cfg.kappa <= 1.0:
                raise ConfigError("kappa must exceed 1", lineno)
        elif key == "i_threshold":
            cfg.i_threshold = _cfg_int(val, lineno, key)
    if cfg.checkpoints is None:
        cfg.checkpoints = [cfg.n_max]
    if cfg.modes is None:
        cfg.modes = ["sbc"]
    if not seen_cp and cfg.checkpoints[-1] != cfg.n_max:
        cfg.checkpoints = [cfg.n_max]
    if cfg.checkpoints[-1] > cfg.n_max or cfg.checkpoints[0] < 1:
        raise ConfigError("checkpoints must lie within [1, n_max]", 0)
    return cfg


def _parse_model_spec(spec: str):
    """'ulam N' / 'ulam:N' or 'exact-markov D' / 'exact-markov:D'."""
    s = spec.replace(":", " ").split()
    if len(s) != 2 or s[0] not in ("ulam", "exact-markov"):
        raise ValueError(
            f"transfer_model must be 'ulam <N>' or 'exact-markov <depth>', got {spec!r}"
        )
    try:
        n = int(s[1])
    except ValueError:
        raise ValueError(f"transfer_model size must be an integer, got {s[1]!r}")
    if n < 1:
        raise ValueError("transfer_model size must be positive")
    return s[0], n


# ---------------------------------------------------------------------------
# report structure
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    value: float
    tolerance: str  # human-readable bound this was judged against
    passed: bool


@dataclass
class ModeBlock:
    mode: str
    lines: list  # free-form "key = value" result lines
    verdicts: list


@dataclass
class RunReport:
    config: ExperimentConfig
    blocks: list
    version: str = __version__

    @property
    def all_pass(self) -> bool:
        return all(v.passed for b in self.blocks for v in b.verdicts)

    def render(self) -> str:
        out = [f"shrinktarget report (version {self.version})", ""]
        out.append("== resolved config ==")
        out.append(self.config.echo().rstrip())
        out.append(f"resolved_center = {_fmt(self.config.resolved_center())}")
        out.append("")
        for b in self.blocks:
            out.append(f"== mode: {b.mode} ==")
            for ln in b.lines:
                out.append(ln)
            for v in b.verdicts:
                status = "PASS" if v.passed else "FAIL"
                out.append(
                    f"verdict {v.name}: value={_fmt(v.value)} tolerance[{v.tolerance}] {status}"
                )
            out.append("")
        out.append(
            "overall: " + ("PASS" if self.all_pass else "FAIL")
        )
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig):
    """Execute the enabled modes in dependency order.

    Returns (RunReport, raw) where raw holds the ensemble summary (or None)
    for emit_outputs."""
    m = dynamics.make_map(config.map)
    p = config.resolved_center()
    tol = config.tolerances
    if m.domain == "torus":
        sched = targets.build_schedule(
            m, p=(p, p), gamma=config.gamma, C=config.C, n_max=config.n_max
        )
    else:
        sched = targets.build_schedule(
            m, p=p, gamma=config.gamma, C=config.C, n_max=config.n_max
        )
    model = None
    if config.transfer_model:
        kind, size = _parse_model_spec(config.transfer_model)
        if kind == "ulam":
            model = transfer.ulam_matrix(m, size)
        else:
            model = transfer.markov_exact_model(m, size)
    needs_model = {"identities", "spectral"}
    for mode in config.modes:
        if mode in needs_model and model is None:
            raise ShrinkTargetError(
                f"mode {mode!r} needs a transfer_model in the config"
            )

    ensemble = None
    if {"sbc", "clt-paper-norm", "clt-self-norm"} & set(config.modes):
        ensemble = mcstats.run_ensemble(
            m, sched, config.n_max, config.M, config.seed, config.checkpoints
        )

    blocks = []
    for mode in config.modes:
        blocks.append(
            _run_mode(mode, m, sched, model, ensemble, config, tol)
        )
    return RunReport(config=config, blocks=blocks), ensemble


def _run_mode(mode, m, sched, model, ensemble, config, tol):
    lines, verdicts = [], []
    if mode == "sbc":
        mr = float(ensemble.mean_ratio[-1])
        sr = float(ensemble.std_ratio[-1])
        for c in range(ensemble.checkpoints.size):
            lines.append(
                f"n={ensemble.checkpoints[c]} mean_ratio={_fmt(ensemble.mean_ratio[c])}"
                f" std_ratio={_fmt(ensemble.std_ratio[c])}"
            )
        lo, hi = tol["sbc_mean_low"], tol["sbc_mean_high"]
        verdicts.append(Verdict(
            "sbc_mean_ratio", mr, f"{_fmt(lo)} <= x <= {_fmt(hi)}", lo <= mr <= hi
        ))
        slo, shi = tol["sbc_std_low"], tol["sbc_std_high"]
        verdicts.append(Verdict(
            "sbc_std_ratio", sr, f"{_fmt(slo)} <= x <= {_fmt(shi)}", slo <= sr <= shi
        ))
    elif mode == "clt-paper-norm":
        for c in range(ensemble.checkpoints.size):
            lines.append(
                f"n={ensemble.checkpoints[c]} ks_paper={_fmt(ensemble.ks_paper[c])}"
            )
        ks = float(ensemble.ks_paper[-1])
        verdicts.append(Verdict(
            "ks_paper_final", ks, f"x <= {_fmt(tol['ks_paper_max'])}",
            bool(ks <= tol["ks_paper_max"]),
        ))
    elif mode == "clt-self-norm":
        for c in range(ensemble.checkpoints.size):
            lines.append(
                f"n={ensemble.checkpoints[c]} ks_self={_fmt(ensemble.ks_self[c])}"
            )
        d = float(abs(ensemble.ks_self[-1] - ensemble.ks_paper[-1]))
        verdicts.append(Verdict(
            "ks_self_vs_paper", d, f"|x| <= {_fmt(tol['ks_self_delta'])}",
            bool(d <= tol["ks_self_delta"]),
        ))
    elif mode == "identities":
        n_id = min(config.n_max, 200)
        ids = transfer.variance_identities(model, sched, n_id)
        for k in sorted(ids):
            lines.append(f"{k} = {_fmt(ids[k])}")
        worst = max(ids["cross_rel_residual"], ids["telescope_rel_residual"])
        verdicts.append(Verdict(
            "identity_rel_residual", worst,
            f"x <= {_fmt(tol['identity_residual'])}",
            bool(worst <= tol["identity_residual"]),
        ))
        st = transfer.martingale_decompose(model, sched, n_id)
        res = float(np.max(st.psi_residual_l1)) if st.psi_residual_l1.size else 0.0
        lines.append(f"max_martingale_residual_l1 = {_fmt(res)}")
        verdicts.append(Verdict(
            "martingale_residual_l1", res,
            f"x <= {_fmt(tol['identity_residual'])}",
            bool(res <= tol["identity_residual"]),
        ))
    elif mode == "assumption-c":
        params = diagnostics.AssumptionCParams(
            eta=config.eta, kappa=config.kappa, i_threshold=config.i_threshold
        )
        hi = min(config.n_max, 10000)
        idx = np.unique(np.round(
            np.logspace(math.log10(params.i_threshold), math.log10(hi), 80)
        ).astype(int))
        rep = diagnostics.assumption_c_report(m, sched, params, idx)
        lines.append(f"regime = {params.regime}")
        lines.append(f"mode = {rep.mode}")
        worst = float(rep.worst_ratio.max()) if rep.indices.size else 0.0
        wi = int(rep.indices[rep.worst_ratio.argmax()]) if rep.indices.size else 0
        lines.append(f"worst_ratio = {_fmt(worst)} at i = {wi}")
        n_inc = int((rep.status == "inconclusive").sum())
        lines.append(f"inconclusive = {n_inc}")
        verdicts.append(Verdict(
            "assumption_c_worst_ratio", worst, "x <= 1", rep.all_pass
        ))
    elif mode == "sp":
        kmax = int(math.floor(math.log2(config.n_max))) - 1
        cs = []
        for k in range(0, kmax + 1):
            c, raw = diagnostics.sp_constant(model, sched, 2 ** k, 2 ** (k + 1))
            cs.append(c)
            lines.append(f"window=[2^{k},2^{k + 1}] C={_fmt(c)} raw={_fmt(raw)}")
        cs = np.array(cs)
        med = float(np.median(cs))
        mx = float(cs.max())
        ratio = mx / med if med > 0 else math.inf
        verdicts.append(Verdict(
            "sp_max_over_median", ratio,
            f"x <= {_fmt(tol['sp_ratio_max'])}",
            bool(ratio <= tol["sp_ratio_max"]),
        ))
    elif mode == "gal-koksma":
        lo = math.log10(min(1000, config.n_max))
        grid = np.unique(np.round(
            np.logspace(lo, math.log10(config.n_max), 25)
        ).astype(int))
        R, skipped = diagnostics.gal_koksma_ensemble(
            m, sched, min(config.M, 100), config.seed + 1, grid
        )
        mx = float(np.nanmax(R)) if not np.all(skipped) else 0.0
        lines.append(f"grid = {', '.join(str(g) for g in grid)}")
        lines.append(f"skipped_points = {int(skipped.sum())}")
        verdicts.append(Verdict(
            "gal_koksma_max_residual", mx,
            f"x <= {_fmt(tol['gal_koksma_max'])}",
            bool(mx <= tol["gal_koksma_max"]),
        ))
    elif mode == "recurrence":
        worst_ratio = 0.0
        worst_abs = 0.0
        for k in range(1, 21):
            eps = 2.0 ** (-k - 2)
            v = diagnostics.recurrence_set_measure(m, k, eps)
            lines.append(f"k={k} eps=2^-{k + 2} measure={_fmt(v)}")
            worst_ratio = max(worst_ratio, v / (2.0 * eps))
            worst_abs = max(worst_abs, abs(v - 2.0 * eps))
        if m.kind == "doubling":
            verdicts.append(Verdict(
                "recurrence_measure_error", worst_abs,
                f"|x - 2eps| <= {_fmt(tol['recurrence_abs'])}",
                bool(worst_abs <= tol["recurrence_abs"]),
            ))
        verdicts.append(Verdict(
            "recurrence_measure_over_2eps", worst_ratio,
            f"x <= {_fmt(tol['recurrence_ratio_max'])}",
            bool(worst_ratio <= tol["recurrence_ratio_max"]),
        ))
    elif mode == "spectral":
        theta = transfer.spectral_gap(model)
        lines.append(f"subdominant_modulus = {_fmt(theta)}")
        if m.kind == "doubling":
            err = abs(theta - 0.5)
            verdicts.append(Verdict(
                "spectral_theta_error", err,
                f"|x - 0.5| <= {_fmt(tol['spectral_abs'])}",
                bool(err <= tol["spectral_abs"]),
            ))
        else:
            verdicts.append(Verdict(
                "spectral_theta_subunit", theta, "x < 1", bool(theta < 1.0 - 1e-9)
            ))
    else:  # pragma: no cover - parse_config rejects unknown modes
        raise ShrinkTargetError(f"unknown mode {mode!r}")
    return ModeBlock(mode=mode, lines=lines, verdicts=verdicts)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

RAW_HEADER = "trajectory_id,checkpoint_n,S_n,Z_n,normalized_statistic"


def emit_outputs(report: RunReport, raw, output_dir: str):
    """Write report.txt, raw_samples.csv and CDF plot data.

    Deterministic: identical (report, raw) produce byte-identical files.
    Returns the list of written paths."""
    os.makedirs(output_dir, exist_ok=True)
    paths = []

    def _write(name, text):
        path = os.path.join(output_dir, name)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as e:
            raise ShrinkTargetError(f"cannot write {path}: {e}") from e
        paths.append(path)

    _write("report.txt", report.render())

    rows = [RAW_HEADER]
    if raw is not None and raw.M > 0:
        Z = raw.Z
        for t in range(raw.M):
            for c in range(raw.checkpoints.size):
                n = int(raw.checkpoints[c])
                ln = math.log(n)
                if ln > 0.0:
                    stat = Z[t, c] / math.sqrt(ln)
                else:
                    sd = math.sqrt(raw.var_S[c]) if raw.var_S[c] > 0 else float("nan")
                    stat = Z[t, c] / sd
                rows.append(
                    f"{t},{n},{int(raw.S[t, c])},{_fmt(Z[t, c])},{_fmt(stat)}"
                )
    _write("raw_samples.csv", "\n".join(rows) + "\n")

    if raw is not None and raw.M > 0:
        from scipy.special import ndtr

        c = raw.checkpoints.size - 1
        n = int(raw.checkpoints[c])
        ln = math.log(n)
        for tag, denom in (
            ("paper_norm", math.sqrt(ln) if ln > 0 else None),
            ("self_norm",
             math.sqrt(raw.var_S[c]) if raw.var_S[c] > 0 else None),
        ):
            if denom is None:
                continue
            x = np.sort(raw.Z[:, c] / denom)
            emp = np.arange(1, x.size + 1) / x.size
            th = ndtr(x)
            body = "\n".join(
                f"{_fmt(th[i])},{_fmt(emp[i])}" for i in range(x.size)
            )
            _write(f"cdf_{tag}.csv", "normal_cdf,empirical_cdf\n" + body + "\n")
    return paths


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="shrinktarget",
        description="shrinking-target simulation and verification laboratory",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("config_path")
        sp.add_argument("--output-dir", default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
    sub.add_parser("version")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        with open(args.config_path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: cannot read {args.config_path}: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as e:
        print(f"error: {args.config_path}: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.command == "validate":
        sys.stdout.write(cfg.echo())
        return 0
    if args.threads is not None:
        backend.set_threads(args.threads)
    t0 = time.time()
    try:
        report, raw = run_experiment(cfg)
    except ShrinkTargetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    paths = emit_outputs(report, raw, cfg.output_dir)
    wall = time.time() - t0
    with open(os.path.join(cfg.output_dir, "run.log"), "a", encoding="utf-8") as fh:
        fh.write(
            f"{time.strftime('%Y-%m-%dT%H:%M:%S%z')} version={__version__} "
            f"wall_s={wall:.3f} threads={args.threads or 'default'} "
            f"backend={backend.active_backend()}\n"
        )
    for pth in paths:
        print(pth)
    print("overall:", "PASS" if report.all_pass else "FAIL")
    return 0 if report.all_pass else 1


if __name__ == "__main__":
    raise SystemExit(main())
