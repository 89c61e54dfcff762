"""Command-line entry point ``holoval``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for
configuration errors (nothing is written), 3 when a group sample fails
certification.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import __version__
from . import forms
from . import grassmann as gm
from . import groups
from . import kinematics as kin
from . import valuations as val
from .polytope import Polytope

COMMANDS = ("check-identities", "sample-diagnostics", "evaluate", "pkf", "rank-check")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CERT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_schema() -> dict:
    text = resources.files("holonomy_valuations").joinpath("config.schema.json").read_text()
    return json.loads(text)["sections"]


def _convert(value: str, spec: dict, where: str):
    kind = spec["type"]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "list":
            return [v.strip() for v in _split_list(value) if v.strip()]
        if kind == "choice":
            v = value.strip()
            match = [c for c in spec["choices"] if c.lower() == v.lower()]
            if not match:
                raise ConfigError(f"{where}: {value!r} not one of {spec['choices']}")
            return match[0]
        return value.strip()
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: cannot read {value!r} as {kind}") from None


def _split_list(text: str) -> list:
    """Split on commas outside parentheses: 'MU(3), TASAKI(4,1)' -> two items."""
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return out


def defaults() -> dict:
    schema = load_schema()
    out = {}
    for sec, keys in schema.items():
        out[sec] = {}
        for key, spec in keys.items():
            d = spec["default"]
            out[sec][key] = _convert(str(d), spec, f"{sec}.{key}") if isinstance(d, str) and spec["type"] == "list" else d
    return out


def read_config(path: str | None) -> dict:
    """Defaults overlaid with an INI file; unknown sections and keys are errors."""
    cfg = defaults()
    if not path:
        return cfg
    schema = load_schema()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    for sec in parser.sections():
        if sec not in schema:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in schema[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            cfg[sec][key] = _convert(raw, schema[sec][key], f"{sec}.{key}")
    return cfg


# ---------------------------------------------------------------------------
# bodies


def named_body(name: str) -> Polytope:
    """Bodies used by presets and the evaluate command."""
    boxes = {
        "associative-box": (7, (0, 1, 2)),
        "coassociative-box": (7, (3, 4, 5, 6)),
        "negative-box": (7, (2, 4, 5, 6)),
        "real4-box": (8, (0, 2, 4, 6)),
        "complex2-box": (8, (0, 1, 2, 3)),
        "cube7": (7, range(7)),
        "cube8": (8, range(8)),
    }
    if name not in boxes:
        raise ConfigError(f"unknown body {name!r}; choose from {sorted(boxes)} or 'config'")
    n, axes = boxes[name]
    return kin._unit_box(n, axes)


def config_body(sec: dict) -> Polytope:
    n = sec["dim"]
    try:
        if sec["family"] == "SIMPLEX":
            return Polytope.simplex(json.loads(sec["points"]))
        if sec["frame"]:
            frame = np.asarray(json.loads(sec["frame"]), dtype=float).T
        else:
            frame = np.eye(n)[:, [int(a) for a in sec["axes"]]]
        k = frame.shape[1]
        lengths = np.broadcast_to(np.array([float(x) for x in sec["lengths"]]), (k,))
        center = np.array([float(x) for x in sec["center"]]) if sec["center"] else np.zeros(n)
        return Polytope.box(center, frame, lengths / 2)
    except (ValueError, IndexError, json.JSONDecodeError) as e:
        raise ConfigError(f"bad [body]: {e}") from None


# ---------------------------------------------------------------------------
# checks


def _check(name, value, tol, passed=None, std_error=None, **extra):
    row = {"check": name, "value": float(value), "tolerance": float(tol)}
    if std_error is not None:
        row["std_error"] = float(std_error)
    row["passed"] = bool(value < tol) if passed is None else bool(passed)
    row.update(extra)
    return row


def check_identities(context: str, samples: int, seed: int, tol: dict) -> list:
    rng = np.random.default_rng(seed)
    eps = tol["identity"]
    rows = []
    if context in ("SPIN7", "SU"):
        W = gm.random_frames(8, 4, samples, rng)
        lhs = gm.Phi_sq_frames(W)
        rows.append(_check("eta_klain_identity", np.abs(lhs - gm.klain_eta_frames(W)).max(), eps))
        for m in (4, 3):
            W = gm.random_frames(2 * m, m, samples, rng)
            th, _ = gm.theta_frames(W)
            c = gm.kaehler_cosines_frames(W)
            sines = np.sqrt(np.clip(1 - c**2, 0, None))
            err = np.abs(np.abs(th) - np.prod(sines, axis=-1)).max()
            rows.append(_check(f"theta_norm_C{m}", err, eps))
        g = groups.sample_so_batch(8, 3, rng)
        for i, P in enumerate((named_body("real4-box"), Polytope.cube(8), named_body("complex2-box"))):
            rows.append(_check(f"eta_decomposition_residual_{i}", val.eta_decomposition_residual(P.transformed(g[i])), eps))
        dims = forms.annihilator_algebra([forms.standard_Phi()])
        rows.append(_check("spin7_algebra_dim", abs(len(dims) - 21), 0.5, dimension=len(dims)))
    if context in ("G2", "SU"):
        G, tau = forms.normalize_metric(forms.standard_phi())
        rows.append(_check("metric_normalization", np.abs(G.entries - np.eye(7)).max(), 1e-12))
        hs = gm.hyperplane_structure()
        W = hs.random_frames(3, samples, rng)
        c = hs.cosines(W)[..., 0]
        th = hs.theta(W)
        err = np.abs(gm.phi_sq_frames(W) - 0.5 * np.real(th**2 + 1 - c**2)).max()
        rows.append(_check("restriction_lemma_gr3", err, eps))
        U = hs.random_frames(4, samples, rng)
        c2 = hs.cosines(U)[..., 1]  # theta_1 = 0 on a 4-plane of C^3
        rows.append(_check("restriction_lemma_gr4", np.abs(gm.phi_sq_frames(gm.perp_frames(U)) - c2**2).max(), eps))
        rows.append(_check("fourier_nu3_nu4", val.fourier_residual(val.ValuationId("NU3"), val.ValuationId("NU4"),
                                                                   samples, seed), eps))
        dims = forms.annihilator_algebra([forms.standard_phi()])
        rows.append(_check("g2_algebra_dim", abs(len(dims) - 14), 0.5, dimension=len(dims)))
    return rows


def sample_diagnostics(group: str, samples: int, seed: int, tol: dict) -> list:
    sampler = groups.HaarSampler(group, seed=seed)
    gs = sampler.sample_batch(samples)
    rows = [_check("certification_residual", groups.defects(group, gs).max(), tol["certification"])]
    n = gs.shape[-1]
    v = np.zeros(n)
    v[0] = 1.0
    x = gs @ v
    # batch means over walkers for the exceptional groups; iid otherwise
    labels = np.arange(len(x)) % sampler.n_chains if sampler.exceptional else np.arange(len(x))
    zmax = tol["z_max"]

    def zscores(vals, target):
        cnt = np.bincount(labels)
        means = np.stack([np.bincount(labels, weights=vals[:, j]) / cnt for j in range(vals.shape[1])], axis=1)
        se = means.std(axis=0, ddof=1) / math.sqrt(len(means))
        return np.abs(vals.mean(axis=0) - target) / se

    z_mean = zscores(x, np.zeros(n))
    iu = np.triu_indices(n)
    prods = (x[:, :, None] * x[:, None, :])[:, iu[0], iu[1]]
    z_cov = zscores(prods, (np.eye(n) / n)[iu])
    # Bonferroni-style threshold across components keeps the family-wise rate near a 3 sigma test
    thr_mean = _family_threshold(zmax, n)
    thr_cov = _family_threshold(zmax, len(iu[0]))
    rows.append(_check("sphere_mean_max_z", z_mean.max(), thr_mean))
    rows.append(_check("sphere_cov_max_z", z_cov.max(), thr_cov))
    return rows


def _family_threshold(z: float, m: int) -> float:
    """z threshold giving the same two-sided level as a single z test, across m components."""
    from scipy.stats import norm

    p = 2 * norm.sf(z)
    return float(norm.isf(p / (2 * m)))


def run_pkf(cfg: dict, seed: int, samples, workers: int, tol: dict):
    p = cfg["pkf"]
    kw = dict(
        n_group=samples or p["n_group"],
        n_translation=p["n_translation"],
        master_seed=seed,
        box_margin=p["margin"],
        translation_domain=p["translation_domain"],
        stride=p["stride"],
        n_chains=p["n_chains"],
        workers=workers,
    )
    if p["group"]:
        kw["group_tag"] = p["group"]
    try:
        exp = kin.preset(p["preset"], **kw)
    except KeyError as e:
        raise ConfigError(str(e)) from None
    report = kin.run_experiment(exp, p["angle_samples"])
    rows = [_check("z_score", abs(report.z_score), tol["z_max"], std_error=report.lhs_std_error)]
    if report.exceptional_relative_error is not None:
        rows.append(_check("exceptional_relative_error", report.exceptional_relative_error, tol["relative"]))
    else:
        rel = abs(report.lhs_estimate - report.rhs_total) / abs(report.rhs_total) if report.rhs_total else 0.0
        rows.append(_check("relative_error", rel, tol["relative"]))
    strata = [dict(s) for s in report.strata]
    return rows, report.to_json(), strata


def run_evaluate(cfg: dict, seed: int, samples):
    e = cfg["evaluate"]
    body = config_body(cfg["body"]) if e["body"] == "config" else named_body(e["body"])
    ctx = {7: "G2", 8: "SPIN7"}.get(body.ambient_dim, "SO")
    rows = []
    for text in e["valuations"]:
        try:
            vid = val.ValuationId.parse(text, ctx)
            v = val.evaluate(vid, body, samples or e["angle_samples"], seed)
        except val.ValuationError as err:
            raise ConfigError(str(err)) from None
        row = {"polytope": e["body"], **v.to_json()}
        rows.append(row)
    return rows


def run_rank(context: str, samples: int, seed: int, tol: dict):
    ctx = "SO" if context == "SU" else context
    rep = val.hadwiger_rank_details(ctx, samples, seed, tol["rank_gap"])
    expected = 10 if ctx in ("G2", "SPIN7") else 8
    rows = [
        _check("rank", abs(rep.rank - expected), 0.5, rank=rep.rank, expected=expected),
        _check("min_gap", min(rep.gaps), tol["rank_gap"], passed=min(rep.gaps) > tol["rank_gap"]),
    ]
    return rows, rep.to_json()


# ---------------------------------------------------------------------------
# reports


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    rows = (report.get("checks") or report.get("rows") or []) + report.get("strata", [])
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf.write(f"# {report['header']['command']} generated {report['header']['timestamp']}\n")
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(_jsonable(r))
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config (see config.schema.json)")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--output", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--context", choices=("G2", "SPIN7", "SU", "SO"))
    p = argparse.ArgumentParser(prog="holoval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", dest="top_config", help="INI config whose [run] command is executed")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("check-identities", parents=[common], help="pointwise Klain and calibration identities")
    d = sub.add_parser("sample-diagnostics", parents=[common], help="certification and sphere moments")
    d.add_argument("--group", choices=groups.GROUP_TAGS)
    e = sub.add_parser("evaluate", parents=[common], help="evaluate valuations on a body")
    e.add_argument("--valuation", action="append", help="valuation id, repeatable")
    e.add_argument("--body", help="named body or 'config'")
    k = sub.add_parser("pkf", parents=[common], help="principal kinematic formula experiment")
    k.add_argument("--group", choices=("SO7", "SO8", "G2", "SPIN7"))
    k.add_argument("--preset", choices=sorted(kin.PRESETS))
    k.add_argument("--n-translation", type=int)
    sub.add_parser("rank-check", parents=[common], help="Klain-sample rank of invariant valuations")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = read_config(getattr(args, "config", None) or args.top_config)
        command = args.command or cfg["run"]["command"]
        if command not in COMMANDS:
            raise ConfigError("no command given")
        run = cfg["run"]
        for key in ("seed", "samples", "workers", "output", "format", "context"):
            if getattr(args, key, None) is not None:
                run[key] = getattr(args, key)
        opt = lambda name: getattr(args, name, None)  # noqa: E731
        if command == "pkf":
            if opt("group"):
                cfg["pkf"]["group"] = args.group
            if opt('preset'):
                cfg["pkf"]["preset"] = args.preset
            if opt('n_translation'):
                cfg["pkf"]["n_translation"] = args.n_translation
        if command == "evaluate":
            if opt('valuation'):
                cfg["evaluate"]["valuations"] = args.valuation
            if opt('body'):
                cfg["evaluate"]["body"] = args.body
        if run["workers"] < 1 or (run["samples"] is not None and run["samples"] < 2):
            raise ConfigError("workers must be >= 1 and samples >= 2")
    except ConfigError as e:
        print(f"holoval: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    seed, samples, tol = run["seed"], run["samples"], cfg["tolerances"]
    body = {}
    try:
        if command == "check-identities":
            checks = check_identities(run["context"], samples or 10_000, seed, tol)
        elif command == "sample-diagnostics":
            group = opt("group") or {"G2": "G2", "SPIN7": "SPIN7", "SU": "SU4", "SO": "SO7"}[run["context"]]
            checks = sample_diagnostics(group, samples or 10_000, seed, tol)
            body["group"] = group
        elif command == "evaluate":
            body["rows"] = run_evaluate(cfg, seed, samples)
            checks = []
        elif command == "pkf":
            checks, body["report"], body["strata"] = run_pkf(cfg, seed, samples, run["workers"], tol)
        else:
            checks, body["rank"] = run_rank(run["context"], samples or 100, seed, tol)
    except ConfigError as e:
        print(f"holoval: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except groups.CertificationError as e:
        checks = [{"check": "certification", "passed": False, "message": str(e)}]
        status = EXIT_CERT
    else:
        status = EXIT_OK if all(c["passed"] for c in checks) else EXIT_FAIL

    report = {
        "header": {"timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"), "command": command,
                   "version": __version__},
        "config": {"run": run, "tolerances": tol, **({"pkf": cfg["pkf"]} if command == "pkf" else {}),
                   **({"evaluate": cfg["evaluate"]} if command == "evaluate" else {})},
        "checks": checks,
        "passed": status == EXIT_OK,
        **body,
    }
    text = render(report, run["format"])
    if run["output"]:
        with open(run["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
