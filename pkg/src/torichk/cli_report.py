"""Command line front end: analyze requests, scan sigma families, classify slopes.

Exit codes: 0 on success, 2 when the analysis finished but the quotient is
singular, 1 on any input error.  All output files are written to temporary
names first and renamed into place once everything succeeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .arrangement import ZetaLift, sample_generic_zeta
from .asymptotics import (
    MetricClass,
    classify_slopes,
    decay_class_detail,
    invariant_report,
    kronecker_slopes,
    parse_slope,
)
from .errors import PreconditionFailed, TorichkError
from .lattice_core import (
    RealSymbol,
    SigmaSpec,
    SubtorusSpec,
    check_ac_condition,
    check_hypothesis_unimodular,
    kernel_sublattice,
    sigma_analysis,
    validate_subtorus_spec,
)
from .metric_lab import (
    AmbientPoint,
    ProbeConfig,
    Ray,
    curvature_probe,
    decay_fit,
    level_project,
    metric_at,
    random_rays,
    residual_norm,
)
from .strata_compact import (
    cone_strata,
    enumerate_strata,
    qac_compactification,
    tn_compactification,
)

FORMAT_VERSION = "1"
EXIT_OK, EXIT_INPUT, EXIT_SINGULAR = 0, 1, 2


class InputError(Exception):
    """Request problem, reported with a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
        self.message = message


def load_schema() -> dict:
    text = resources.files("torichk").joinpath("schema/request.schema.json").read_text("utf-8")
    return json.loads(text)


def _pointer(path: Sequence[Any]) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_request(doc: Any) -> None:
    """Raise InputError for the first schema violation (by path order)."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        e = jsonschema.exceptions.best_match(errors)
        raise InputError(_pointer(e.absolute_path), e.message)


def read_request(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError("", f"cannot read request: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    validate_request(doc)
    return doc


# ---------------------------------------------------------------------------
# request decoding


def _frac_str(x: Fraction) -> str:
    return str(x)


def _int_matrix(rows: Sequence[Sequence[int]]) -> list[list[str]]:
    return [[str(int(x)) for x in r] for r in rows]


def parse_subtorus(doc: dict) -> SubtorusSpec:
    sub = doc["subtorus"]
    try:
        spec = SubtorusSpec(sub["d"], sub["n"], tuple(tuple(int(x) for x in r) for r in sub["U"]))
    except TorichkError as exc:
        raise InputError("/subtorus/U", str(exc)) from exc
    diag = validate_subtorus_spec(spec)
    if not diag.valid:
        raise InputError("/subtorus/U", "; ".join(diag.messages))
    return spec


def parse_sigma(obj: dict, spec: SubtorusSpec, pointer: str) -> SigmaSpec:
    try:
        if "a" in obj:
            sigma = SigmaSpec.rational([Fraction(str(x)) for x in obj["a"]])
        else:
            syms = tuple(RealSymbol(s) if isinstance(s, str) else RealSymbol(s["name"], s["value"])
                         for s in obj["symbols"])
            sigma = SigmaSpec(syms, tuple(tuple(Fraction(str(x)) for x in r) for r in obj["coeffs"]))
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(pointer, str(exc)) from exc
    if sigma.d != spec.d:
        raise InputError(pointer, f"sigma has {sigma.d} entries, expected d={spec.d}")
    if sigma.is_zero():
        raise InputError(pointer, "sigma is identically zero")
    return sigma


def sigma_text(sigma: SigmaSpec) -> list[str]:
    """Entries a_p as readable linear combinations of the symbols."""
    out = []
    for row in sigma.coeffs:
        terms = []
        for c, s in zip(row, sigma.symbols):
            if c == 0:
                continue
            if s.name == "1":
                terms.append(str(c))
            elif c == 1:
                terms.append(s.name)
            else:
                terms.append(f"{c}*{s.name}")
        out.append(" + ".join(terms) if terms else "0")
    return out


def sigma_echo(sigma: SigmaSpec) -> dict:
    return {
        "symbols": [{"name": s.name, "value": s.value} for s in sigma.symbols],
        "coeffs": [[_frac_str(x) for x in r] for r in sigma.coeffs],
        "a": sigma_text(sigma),
    }


@dataclass
class Level:
    tau: ZetaLift
    sampled: bool
    note: str | None = None


def resolve_level(doc: dict, spec: SubtorusSpec, seed: int) -> Level:
    z = doc.get("zeta", {"sample": {}})
    if "tau" in z:
        if len(z["tau"]) != spec.d:
            raise InputError("/zeta/tau", f"expected {spec.d} triples, got {len(z['tau'])}")
        return Level(ZetaLift(tuple(tuple(Fraction(str(x)) for x in t) for t in z["tau"])), False)
    opts = z["sample"]
    try:
        tau, _ = sample_generic_zeta(spec, seed, opts.get("bound", 10), opts.get("max_attempts", 1000))
    except PreconditionFailed as exc:
        return Level(ZetaLift.zero(spec.d), False, f"no smooth level exists: {exc}")
    return Level(tau, True)


def _probe_config(doc: dict, spec: SubtorusSpec, tau: ZetaLift,
                  sigma: SigmaSpec | None, deformed: bool) -> ProbeConfig:
    opts = doc.get("options", {})
    return ProbeConfig.build(spec, tau, sigma, deformed=deformed and sigma is not None, **opts)


# ---------------------------------------------------------------------------
# probes


def _sub_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _run_point(cfg: ProbeConfig, z: list, w: list, curvature: bool) -> dict:
    m = AmbientPoint(tuple(complex(*c) for c in z), tuple(complex(*c) for c in w))
    p = level_project(m, cfg)
    sample = metric_at(p, cfg)
    out = {
        "point": {"z": [[c.real, c.imag] for c in p.z], "w": [[c.real, c.imag] for c in p.w]},
        "residual": residual_norm(p, cfg),
        "metric": sample.to_dict(),
    }
    if curvature:
        rep = curvature_probe(p, cfg)
        out["curvature"] = {
            "ricci_norm": rep.ricci_norm,
            "max_abs_sectional": rep.max_abs_sectional,
            "sectional": [{"plane": list(k), "value": v} for k, v in sorted(rep.sectional.items())],
            "bianchi_residual": rep.bianchi_residual,
            "symmetry_residual": rep.symmetry_residual,
            "error_estimate": rep.error_estimate,
        }
    return out


def _run_ray(cfg: ProbeConfig, ray: Ray, radii: list, quantity: str, radius: str) -> dict:
    fit = decay_fit(cfg, ray, quantity, radii, radius=radius)
    return {
        "direction": [float(x) for x in ray.direction],
        "quantity": quantity,
        "radius": radius,
        "exponent": fit.exponent,
        "r2": fit.r2,
        "degenerate": fit.degenerate,
        "rho": list(fit.rho),
        "values": list(fit.values),
        "csv": fit.to_csv(),
    }


def _run_task(task: tuple) -> dict:
    kind, args = task
    try:
        if kind == "point":
            return {"ok": True, **_run_point(*args)}
        return {"ok": True, **_run_ray(*args)}
    except TorichkError as exc:
        return {"ok": False, "error": type(exc).__name__, "message": str(exc)}


def build_tasks(doc: dict, spec: SubtorusSpec, tau: ZetaLift, sigma: SigmaSpec | None,
                seed: int) -> list[tuple[int, tuple]]:
    """Flatten probe descriptors into (probe index, task) pairs."""
    tasks = []
    for i, pr in enumerate(doc.get("probes", [])):
        ptr = f"/probes/{i}"
        deformed = pr.get("deformed", sigma is not None)
        if deformed and sigma is None:
            raise InputError(ptr + "/deformed", "deformed probes need a sigma")
        cfg = _probe_config(doc, spec, tau, sigma, deformed)
        if pr["kind"] == "point":
            if len(pr["z"]) != spec.d or len(pr["w"]) != spec.d:
                raise InputError(ptr, f"z and w need {spec.d} entries")
            tasks.append((i, ("point", (cfg, pr["z"], pr["w"], pr.get("curvature", True)))))
            continue
        radii = list(pr["radii"])
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise InputError(ptr + "/radii", "radii must be increasing")
        if "direction" in pr:
            v = np.asarray(pr["direction"], dtype=float)
            if v.shape != (4 * spec.d,) or not np.linalg.norm(v) > 0:
                raise InputError(ptr + "/direction", f"need a nonzero vector of length {4 * spec.d}")
            rays = [Ray(AmbientPoint((0,) * spec.d, (0,) * spec.d), v / np.linalg.norm(v))]
        else:
            rnd = pr.get("random", {})
            cone = cfg.a if rnd.get("cone", False) else None
            rays = random_rays(spec.d, rnd.get("count", 1), _sub_seed(seed, i), cone=cone)
        for ray in rays:
            tasks.append((i, ("ray", (cfg, ray, radii, pr["quantity"], pr.get("radius", "ambient")))))
    return tasks


def run_tasks(tasks: list[tuple[int, tuple]], jobs: int) -> list[dict]:
    payload = [t for _, t in tasks]
    if jobs > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, payload))
    else:
        results = [_run_task(t) for t in payload]
    return [{"probe": i, "kind": t[0], **r} for (i, t), r in zip(tasks, results)]


# ---------------------------------------------------------------------------
# analysis


def _subset(s) -> list[int] | None:
    return None if s is None else sorted(s)


def analyze(doc: dict, seed: int | None = None, jobs: int = 1) -> tuple[dict, int]:
    """Full report for a validated request; returns (report, exit code)."""
    seed = doc.get("seed", 0) if seed is None else seed
    spec = parse_subtorus(doc)
    sigma = parse_sigma(doc["sigma"], spec, "/sigma") if "sigma" in doc else None
    level = resolve_level(doc, spec, seed)
    tau = level.tau

    if sigma is not None:
        info = sigma_analysis(spec, sigma)
        if not info.transversal:
            raise InputError("/sigma", "sigma(R) lies in the Lie algebra of N (not transversal)")

    unimod = check_hypothesis_unimodular(spec)
    ac = check_ac_condition(spec)
    report = invariant_report(spec, tau, sigma)
    strata = enumerate_strata(spec)
    at_infinity = set(cone_strata(spec))
    qac = qac_compactification(spec)

    out: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "tool": {"name": "torichk", "version": __version__},
        "seed": seed,
        "input": {
            "subtorus": {"d": spec.d, "n": spec.n, "U": _int_matrix(spec.U)},
            "kernel_basis": _int_matrix(kernel_sublattice(spec).basis),
            "zeta": {
                "tau": [[_frac_str(x) for x in t] for t in tau.tau],
                "sampled": level.sampled,
                "coordinates": [[_frac_str(x) for x in t] for t in tau.zeta(spec)],
                "note": level.note,
            },
            "sigma": sigma_echo(sigma) if sigma is not None else None,
        },
        "verdicts": {
            "unimodular_hypothesis": {"holds": unimod.holds, "witness": _subset(unimod.witness),
                                      "det": unimod.det},
            "smoothness": report.to_dict()["smoothness"],
            "ac_condition": {"holds": ac.holds, "witness": _subset(ac.witness), "det": ac.det},
        },
        "strata": [{"I": sorted(s.I), "dim_stabilizer": s.dim_stabilizer, "dim_V": s.dim_V,
                    "at_infinity": s.I in at_infinity} for s in strata],
        "compactifications": {"qac": qac.to_dict()},
        "invariants": report.to_dict(),
    }
    dots = [qac.to_dot()]
    if sigma is not None:
        tn = tn_compactification(spec, sigma)
        out["compactifications"]["tn"] = tn.to_dict()
        dots.append(tn.to_dot())
        detail = decay_class_detail(spec, sigma)
        out["decay"] = {"class": detail.decay_class.value, "bound": detail.bound,
                        "flags": list(detail.flags)}
        out["slopes"] = _slopes_entry(spec, sigma)
    probes = run_tasks(build_tasks(doc, spec, tau, sigma, seed), jobs)
    out["probes"] = [{k: v for k, v in p.items() if k != "csv"} for p in probes]
    out["_side"] = {"dot": "".join(dots), "strata_csv": _strata_csv(out["strata"]),
                    "ray_csv": [p["csv"] for p in probes if p.get("csv")]}
    code = EXIT_SINGULAR if report.metric_class is MetricClass.SINGULAR else EXIT_OK
    return out, code


def _slopes_entry(spec: SubtorusSpec, sigma: SigmaSpec) -> dict:
    try:
        pairs = kronecker_slopes(spec, sigma)
    except TorichkError as exc:
        return {"supported": False, "message": str(exc), "pairs": []}
    return {"supported": True,
            "pairs": [{"i": i, "j": j, "slope": str(s)} for (i, j), s in pairs]}


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _strata_csv(strata: list[dict]) -> str:
    return _csv_text(["I", "dim_stabilizer", "dim_V", "at_infinity"],
                     [[" ".join(map(str, s["I"])), s["dim_stabilizer"], s["dim_V"],
                       str(s["at_infinity"]).lower()] for s in strata])


def scan_sigma(doc: dict) -> tuple[list[dict], str]:
    """One row per family member; per-row errors are recorded, not raised."""
    spec = parse_subtorus(doc)
    rows = []
    for k, obj in enumerate(doc.get("family", [])):
        row: dict[str, Any] = {"index": k}
        try:
            sigma = parse_sigma(obj, spec, f"/family/{k}")
            row["a"] = sigma_text(sigma)
            info = sigma_analysis(spec, sigma)
            row.update(I_sigma=sorted(info.I_sigma), dim_T_sigma=info.dim_T_sigma,
                       dim_T_sigma_cap_N=info.dim_T_sigma_cap_N)
            rep = invariant_report(spec, ZetaLift.zero(spec.d), sigma)
            row.update(cone_dim=rep.cone_dim_deformed, decay_class=rep.decay_class.value,
                       slopes=_slopes_entry(spec, sigma), error=None)
        except (TorichkError, InputError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    table = _csv_text(
        ["index", "a", "I_sigma", "dim_T_sigma", "dim_T_sigma_cap_N", "cone_dim", "decay_class",
         "slopes", "error"],
        [[r["index"], "; ".join(r.get("a", [])), " ".join(map(str, r.get("I_sigma", []))),
          r.get("dim_T_sigma", ""), r.get("dim_T_sigma_cap_N", ""), r.get("cone_dim", ""),
          r.get("decay_class", ""),
          "; ".join(f"({p['i']},{p['j']}):{p['slope']}" for p in r.get("slopes", {}).get("pairs", [])),
          r.get("error") or ""] for r in rows])
    return rows, table


def classify(texts: Sequence[str]) -> list[list[str]]:
    slopes = []
    for i, t in enumerate(texts):
        try:
            slopes.append(parse_slope(t))
        except (ValueError, TorichkError) as exc:
            raise InputError(f"/{i}", f"cannot parse slope {t!r}: {exc}") from exc
    return [[texts[i] for i in cls] for cls in classify_slopes(slopes)]


# ---------------------------------------------------------------------------
# file handling


def write_atomic(files: dict[str, str]) -> None:
    """Write every file to a temporary sibling, then rename all into place."""
    staged = []
    try:
        for path, text in files.items():
            d = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(prefix=".torichk-", dir=d)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _fail(exc: InputError) -> int:
    sys.stderr.write(dump_json({"error": exc.message, "pointer": exc.pointer}))
    return EXIT_INPUT


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        doc = read_request(args.request)
        report, code = analyze(doc, args.seed, args.jobs)
    except InputError as exc:
        return _fail(exc)
    side = report.pop("_side")
    text = dump_json(report)
    files = {}
    if args.out:
        files[args.out] = text
    if args.dot:
        files[args.dot] = side["dot"]
    if args.csv:
        files[args.csv + "strata.csv"] = side["strata_csv"]
        for k, t in enumerate(side["ray_csv"]):
            files[args.csv + f"ray{k}.csv"] = t
    try:
        write_atomic(files)
    except OSError as exc:
        return _fail(InputError("", f"cannot write output: {exc}"))
    if not args.out:
        sys.stdout.write(text)
    return code


def cmd_scan_sigma(args: argparse.Namespace) -> int:
    try:
        doc = read_request(args.request)
        rows, table = scan_sigma(doc)
    except InputError as exc:
        return _fail(exc)
    files = {}
    if args.csv:
        files[args.csv] = table
    if args.out:
        files[args.out] = dump_json({"format_version": FORMAT_VERSION, "rows": rows})
    try:
        write_atomic(files)
    except OSError as exc:
        return _fail(InputError("", f"cannot write output: {exc}"))
    if not args.csv:
        sys.stdout.write(table)
    return EXIT_OK


def cmd_classify_slopes(args: argparse.Namespace) -> int:
    texts = list(args.slopes)
    if args.file:
        try:
            with open(args.file, encoding="utf-8") as fh:
                texts += [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        except OSError as exc:
            return _fail(InputError("", f"cannot read {args.file}: {exc}"))
    try:
        classes = classify(texts)
    except InputError as exc:
        return _fail(exc)
    for cls in classes:
        sys.stdout.write("{" + ", ".join(cls) + "}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torichk", description="Toric hyperkahler quotient checker")
    parser.add_argument("--version", action="version", version=f"torichk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze one request")
    p.add_argument("request")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--dot", help="write the compactification posets as DOT")
    p.add_argument("--csv", help="prefix for strata and ray CSV files")
    p.add_argument("--seed", type=int, default=None, help="override the request seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for probes")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("scan-sigma", help="tabulate cone dimensions over a sigma family")
    p.add_argument("request")
    p.add_argument("--csv", help="write the table here instead of stdout")
    p.add_argument("--out", help="also write the rows as JSON")
    # the scan is exact and sequential; these are accepted so every command shares the flags
    p.add_argument("--seed", type=int, default=None, help="accepted, unused")
    p.add_argument("--jobs", type=int, default=1, help="accepted, unused")
    p.set_defaults(func=cmd_scan_sigma)

    p = sub.add_parser("classify-slopes", help="group slopes into GL(2,Z) classes")
    p.add_argument("slopes", nargs="*")
    p.add_argument("--file", help="read one slope per line")
    p.set_defaults(func=cmd_classify_slopes)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        return _fail(InputError("", "--jobs must be positive"))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
