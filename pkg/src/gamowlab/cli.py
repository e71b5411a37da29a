"""Command-line entry point: ``gamowlab <subcommand> --config run.toml``.

Exit status: 0 success, 1 configuration error, 2 domain or time-ordering
error, 3 numerical failure.  On failure an ``error.json`` naming the error
is written to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import SUBCOMMANDS, as_complex, as_matrix, load_config
from .errors import ConfigError, GamowLabError
from .gamow_core import background_integral, decompose, survival_amplitude_exact
from .histories import (DensityOperator, Hamiltonian, HistoryChain, ProjectorFamily,
                        chain_probabilities, chain_probability, exhaustive_scan)
from .kaon import (BeamConfig, PhysicalPreset, chi_square, fit_lifetime, histogram,
                   inject_noise, sample_decays)
from .resonance_model import (DEFAULT_CHANNEL, ResonancePole, SMatrixModel, eval_s_matrix,
                              find_poles)
from .wavefunctions import EnergyWaveFunction, hardy_check, normalize

DECAY_COLUMNS = ("t", "survival_exact", "survival_gamow", "background_re", "background_im",
                 "reconstruction_error")
HISTOGRAM_COLUMNS = ("t_bin_center", "count", "rate", "rate_error")
EVENT_COLUMNS = ("proper_time", "lab_distance", "channel")

_num = {"type": "number"}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=None) -> dict:
    return {"type": "object", "properties": props,
            "required": list(props if required is None else required),
            "additionalProperties": False}


OUTPUT_SCHEMAS = {
    "error": _obj({"error": {"type": "string"}, "message": {"type": "string"},
                   "exit_code": {"enum": [1, 2, 3]}}),
    "decay": _obj({
        "subcommand": {"enum": ["decay", "decompose"]},
        "poles": {"type": "array", "items": _obj({
            "e_r": _num, "gamma": _num, "position": _pair, "coefficient": _pair})},
        "background": _obj({"theta": _num, "has_ray": {"type": "boolean"},
                            "loops": {"type": "array", "items": _obj(
                                {"center": _pair, "radius": _num})}}),
        "n_times": {"type": "integer"},
        "max_reconstruction_error": _num,
        "csv": {"type": "string"},
    }),
    "histories": _obj({
        "dimension": {"type": "integer"},
        "max_residual": _num,
        "chains": {"type": "array", "items": _obj({
            "name": {"type": "string"},
            "steps": {"type": "array", "items": {"type": "array"}},
            "probability": _num, "direct": _num, "recursive": _num, "residual": _num,
            "scan": _obj({"family": {"type": "string"}, "time": _num,
                          "table": {"type": "array", "items": _num},
                          "total": _num, "prefix_probability": _num}),
        }, ["name", "steps", "probability", "direct", "recursive", "residual"])},
    }),
    "kaon": _obj({
        "seed": {"type": "integer"}, "n_events": {"type": "integer"},
        "gamma_true": _num, "window": _pair, "bin_width": _num,
        "fit": _obj({"gamma_hat": _num, "stderr": _num, "log_likelihood": _num,
                     "n_used": {"type": "integer"}, "method": {"type": "string"}}),
        "chi2": _num, "n_bins": {"type": "integer"}, "chi2_per_bin": _num,
        "noise_rejected": {"type": "integer"}, "out_of_window": {"type": "integer"},
        "physical": _obj({"tau_s": _num, "tau_stderr_s": _num,
                          "mean_decay_length_m": _num}),
    }, ["seed", "n_events", "gamma_true", "window", "bin_width", "fit", "chi2", "n_bins",
        "chi2_per_bin", "noise_rejected", "out_of_window"]),
    "poles": _obj({
        "constructed": {"type": "array", "items": _pair},
        "found": {"type": "array", "items": _pair},
        "max_pole_error": _num,
        "unitarity_max_deviation": _num,
    }),
    "hardy": _obj({
        "halfplane": {"enum": ["lower", "upper"]},
        "max_dispersion_residual": _num, "wrong_halfplane_max": _num,
        "probe_points": {"type": "array", "items": _pair},
        "passed": {"type": "boolean"}, "tol": _num,
    }),
}


class OutputDir:
    """Writes files strictly inside one directory."""

    def __init__(self, path):
        self.root = Path(path).resolve()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.root}: {exc}") from None
        self.written: list[str] = []

    def _target(self, name: str) -> Path:
        target = (self.root / name).resolve()
        if target.parent != self.root:
            raise ConfigError(f"refusing to write {name!r} outside {self.root}")
        return target

    def write_text(self, name: str, text: str):
        self._target(name).write_text(text, encoding="utf-8", newline="")
        self.written.append(name)

    def write_json(self, name: str, payload: dict, schema: str):
        jsonschema.validate(payload, OUTPUT_SCHEMAS[schema])
        self.write_text(name, json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def write_csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.write_text(name, buf.getvalue())


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    return f"{float(v):.16e}"


def _pair_out(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


# builders

def _model(sec: dict) -> SMatrixModel:
    branching = sec.get("branching", {DEFAULT_CHANNEL: 1.0})
    poles = tuple(ResonancePole(e, g, branching) for e, g in sec["poles"])
    return SMatrixModel(poles, tuple(sec.get("background", ())))


def _wavefunction(sec: dict | None, model: SMatrixModel | None) -> EnergyWaveFunction:
    sec = sec or {"pole_term": True}
    kind = sec.get("kind", "rational-decay")
    halfplane = sec.get("halfplane", "lower")
    ell = sec.get("ell", 0)
    if sec.get("pole_term"):
        extra = set(sec) - {"pole_term", "support"}
        if extra or model is None:
            raise ConfigError(f"pole_term takes only 'support'; got {sorted(extra)}"
                              if extra else "pole_term needs a [model] section")
        return EnergyWaveFunction.pole_term(model.poles[0], sec.get("support", "extended"))
    if "poles" not in sec:
        raise ConfigError("wavefunction needs 'poles' (or pole_term = true)")
    poles = [as_complex(p) for p in sec["poles"]]
    if "residues" in sec:
        if "numerator" in sec or sec.get("support", "half-line") != "half-line":
            raise ConfigError("'residues' excludes 'numerator' and extended support")
        return EnergyWaveFunction.from_residues([as_complex(r) for r in sec["residues"]],
                                                poles, halfplane, kind, ell)
    if "numerator" not in sec:
        raise ConfigError("wavefunction needs 'numerator' or 'residues'")
    return EnergyWaveFunction(kind, tuple(as_complex(c) for c in sec["numerator"]),
                              tuple(poles), halfplane, ell, sec.get("support", "half-line"))


def _times(sec: dict | None, gamma: float) -> np.ndarray:
    sec = sec or {}
    if "times" in sec:
        if "t_max" in sec or "n" in sec:
            raise ConfigError("give either 'times' or 't_max'/'n', not both")
        return np.array(sec["times"], dtype=float)
    return np.linspace(0.0, sec.get("t_max", 5.0 / gamma), sec.get("n", 21))


# subcommands

def run_decay(cfg: dict, out: OutputDir, subcommand: str = "decay") -> dict:
    model = _model(cfg["model"])
    f = normalize(_wavefunction(cfg.get("wavefunction"), model))
    contour = cfg.get("contour", {})
    d = decompose(f, model, theta=contour.get("theta", 0.0), delta=contour.get("delta", 1e-3),
                  hardy_tol=contour.get("hardy_tol", 1e-6))
    times = _times(cfg.get("grid"), model.poles[0].gamma)
    rows, worst = [], 0.0
    for t in times:
        gamow = d.pole_amplitude(t)
        bg = background_integral(d, t)
        exact = survival_amplitude_exact(f, t)
        err = abs(exact - (gamow + bg))
        worst = max(worst, err)
        rows.append((t, abs(exact) ** 2, abs(gamow) ** 2, bg.real, bg.imag, err))
    name = f"{subcommand}.csv"
    out.write_csv(name, DECAY_COLUMNS, rows)
    summary = {
        "subcommand": subcommand,
        "poles": [{"e_r": g.e_r, "gamma": g.gamma, "position": _pair_out(g.position),
                   "coefficient": _pair_out(c)} for g, c in d.gamow_terms],
        "background": {"theta": d.background.theta, "has_ray": d.background.has_ray,
                       "loops": [{"center": _pair_out(c), "radius": r}
                                 for c, r in d.background.loops]},
        "n_times": int(times.size),
        "max_reconstruction_error": float(worst),
        "csv": name,
    }
    out.write_json(f"{subcommand}.json", summary, "decay")
    return summary


def run_decompose(cfg: dict, out: OutputDir) -> dict:
    return run_decay(cfg, out, "decompose")


def _family(sec: dict, d: int) -> ProjectorFamily:
    if ("basis" in sec) == ("vectors" in sec):
        raise ConfigError("a family needs exactly one of 'basis' or 'vectors'")
    vectors = np.eye(d) if "basis" in sec else as_matrix(sec["vectors"])
    if vectors.shape[0] != d:
        raise ConfigError(f"family vectors have dimension {vectors.shape[0]}, expected {d}")
    return ProjectorFamily.from_basis(vectors, sec.get("groups"))


def run_histories(cfg: dict, out: OutputDir) -> dict:
    d = cfg["dimension"]
    H = Hamiltonian(as_matrix(cfg["hamiltonian"]) if "hamiltonian" in cfg else np.zeros((d, d)))
    state = cfg.get("state", "maximally-mixed")
    rho = DensityOperator.maximally_mixed(d) if state == "maximally-mixed" \
        else DensityOperator(as_matrix(state))
    if H.dim != d or rho.dim != d:
        raise ConfigError("hamiltonian and state must match 'dimension'")
    names = list(cfg["families"])
    families = tuple(_family(cfg["families"][n], d) for n in names)

    def index(name):
        if name not in names:
            raise ConfigError(f"unknown projector family {name!r}")
        return names.index(name)

    results = []
    for k, ch in enumerate(cfg["chains"]):
        chain = HistoryChain(families, tuple((index(n), a, t) for n, a, t in ch["steps"]),
                             ch.get("base_time", 0.0))
        p = chain_probabilities(rho, H, chain)
        entry = {"name": ch.get("name", f"chain{k}"), "steps": ch["steps"],
                 "probability": p.value, "direct": p.direct, "recursive": p.recursive,
                 "residual": p.residual}
        if "scan" in ch:
            table = exhaustive_scan(rho, H, chain, index(ch["scan"]["family"]),
                                    ch["scan"]["time"])
            values = [table[a] for a in sorted(table)]
            entry["scan"] = {"family": ch["scan"]["family"], "time": ch["scan"]["time"],
                             "table": values, "total": float(sum(values)),
                             "prefix_probability": chain_probability(rho, H, chain)}
        results.append(entry)
    summary = {"dimension": d, "chains": results,
               "max_residual": max(r["residual"] for r in results)}
    out.write_json("histories.json", summary, "histories")
    return summary


def run_kaon(cfg: dict, out: OutputDir, overrides: dict | None = None) -> dict:
    beam = dict(cfg.get("beam", {}))
    decay = dict(cfg.get("decay", {}))
    analysis = dict(cfg.get("analysis", {}))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("n_events", "seed"):
            beam[key] = value
        elif key == "gamma":
            decay[key] = value
        else:
            analysis[key] = value
    bc = BeamConfig(beam.get("momentum_p", 1.0), beam.get("mass_m", 1.0),
                    beam.get("n_events", 100_000), beam.get("seed", 0))
    gamma = decay.get("gamma", 1.0)
    sample = sample_decays(bc, gamma, decay.get("branching"), analysis.get("workers", 1))
    if analysis.get("noise"):
        sample = inject_noise(sample, analysis["noise"])
    window = tuple(analysis.get("window", (0.1 * bc.boost / gamma, 5.0 * bc.boost / gamma)))
    bin_width = analysis.get("bin_width", 0.1 / gamma)
    h = histogram(sample, window, bin_width, bc)
    if analysis.get("fit", "unbinned") == "binned":
        fit = fit_lifetime(h)
    else:
        fit = fit_lifetime(sample, (window[0] / bc.boost, window[1] / bc.boost))
    chi2, n_bins = chi_square(h, gamma)
    out.write_csv("histogram.csv", HISTOGRAM_COLUMNS,
                  zip(h.centers, h.counts, h.rate, h.rate_error))
    if analysis.get("write_events"):
        out.write_csv("events.csv", EVENT_COLUMNS,
                      ((t, dd, sample.channels[c]) for t, dd, c in
                       zip(sample.proper_time, sample.lab_distance, sample.channel_index)))
    summary = {
        "seed": bc.seed, "n_events": bc.n_events, "gamma_true": gamma,
        "window": [float(window[0]), float(window[1])], "bin_width": bin_width,
        "fit": {"gamma_hat": fit.gamma_hat, "stderr": fit.stderr,
                "log_likelihood": fit.log_likelihood, "n_used": fit.n_used,
                "method": fit.method},
        "chi2": chi2, "n_bins": n_bins, "chi2_per_bin": chi2 / n_bins,
        "noise_rejected": h.noise_rejected, "out_of_window": h.out_of_window,
    }
    if "physical" in cfg or (overrides or {}).get("physical"):
        summary["physical"] = PhysicalPreset(**cfg.get("physical", {})).report(fit)
    out.write_json("fit.json", summary, "kaon")
    return summary


def run_poles(cfg: dict, out: OutputDir) -> dict:
    model = _model(cfg["model"])
    search = cfg.get("search", {})
    positions = model.positions
    if "seeds" in search:
        seeds = [as_complex(s) for s in search["seeds"]]
    else:
        seeds = [z + 0.05 * abs(z.imag) * (1 + 1j) for z in positions]
    found = find_poles(model, seeds, tol=search.get("tol", 1e-10))
    err = max((min(abs(f - z) for f in found) for z in positions), default=0.0)
    top = max(p.e_r for p in model.poles)
    grid = np.array(search.get("grid", np.linspace(0.0, 2.0 * top, 401)), dtype=float)
    dev = float(np.max(np.abs(np.abs(eval_s_matrix(model, grid)) - 1.0)))
    summary = {"constructed": [_pair_out(z) for z in positions],
               "found": [_pair_out(z) for z in found],
               "max_pole_error": float(err), "unitarity_max_deviation": dev}
    out.write_json("poles.json", summary, "poles")
    return summary


def run_hardy(cfg: dict, out: OutputDir) -> dict:
    f = _wavefunction(cfg["wavefunction"], None)
    report = hardy_check(f, cfg.get("contour", {}).get("hardy_tol", 1e-6))
    summary = {"halfplane": f.halfplane, **report.to_dict()}
    if not all(math.isfinite(summary[k]) for k in ("max_dispersion_residual",
                                                   "wrong_halfplane_max")):
        summary["max_dispersion_residual"] = summary["wrong_halfplane_max"] = 1e300
    out.write_json("hardy.json", summary, "hardy")
    return summary


RUNNERS = {"decay": run_decay, "decompose": run_decompose, "histories": run_histories,
           "kaon": run_kaon, "poles": run_poles, "hardy": run_hardy}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gamowlab", description="Resonance decay, Gamow-state expansions, "
                "decoherent histories and decay-vertex Monte Carlo.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "kaon", help="TOML run configuration")
        s.add_argument("--output-dir", default=".", help="directory for all output files")
        if name == "kaon":
            s.add_argument("--n-events", type=int)
            s.add_argument("--seed", type=int)
            s.add_argument("--gamma", type=float)
            s.add_argument("--window", type=float, nargs=2, metavar=("D_MIN", "D_MAX"))
            s.add_argument("--bin-width", type=float)
            s.add_argument("--fit", choices=("unbinned", "binned"))
            s.add_argument("--workers", type=int)
            s.add_argument("--events", action="store_true", help="also write events.csv")
            s.add_argument("--physical", action="store_true",
                           help="add the physical-units report to fit.json")
    return p


def run(argv=None) -> int:
    out = None
    try:
        args = build_parser().parse_args(argv)
        out = OutputDir(args.output_dir)
        cfg = load_config(args.config, args.subcommand)
        if args.subcommand == "kaon":
            overrides = {"n_events": args.n_events, "seed": args.seed, "gamma": args.gamma,
                         "window": args.window, "bin_width": args.bin_width,
                         "fit": args.fit, "workers": args.workers,
                         "write_events": args.events or None,
                         "physical": args.physical or None}
            run_kaon(cfg, out, overrides)
        else:
            RUNNERS[args.subcommand](cfg, out)
    except GamowLabError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(payload), file=sys.stderr)
        if out is not None:
            out.write_json("error.json", payload, "error")
        return exc.exit_code
    for name in out.written:
        print(out.root / name)
    return 0


def main(argv=None):
    sys.exit(run(argv))
