"""Command-line front end.

    loopdress generate spec.json [-o DIR]
    loopdress verify spec.json|manifest.json [-o REPORT]
    loopdress paper-example NAME [-o DIR]

Exit codes: 0 pass, 1 verification failure, 2 usage or parse error.
Numerical modules are imported after ``--threads`` has set the BLAS
thread variables.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _versions() -> dict:
    import numpy as np

    try:
        from importlib.metadata import version

        pkg = version("artifact")
    except Exception:
        pkg = "unknown"
    return {"loopdress": pkg, "numpy": np.__version__, "python": platform.python_version()}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_csv(path: Path, X, T, values) -> None:
    """x,t,re,im rows in t-major order; floats in shortest round-trip form."""
    import numpy as np

    v = np.asarray(values)
    re_, im_ = np.real(v).ravel(), (np.imag(v).ravel() if np.iscomplexobj(v) else np.zeros(v.size))
    rows = ["x,t,re,im"]
    rows += [f"{x!r},{t!r},{a!r},{b!r}" for x, t, a, b in
             zip(np.ravel(X).tolist(), np.ravel(T).tolist(), re_.tolist(), im_.tolist())]
    path.write_text("\n".join(rows) + "\n")


def read_csv(path: Path, shape):
    import numpy as np

    data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    data = data.reshape(-1, 4)
    if data.shape[0] != shape[0] * shape[1]:
        raise ValueError(f"{path.name}: {data.shape[0]} rows, expected {shape[0] * shape[1]}")
    return (data[:, 2] + 1j * data[:, 3]).reshape(shape)


def load_spec(path: Path):
    from .experiment import parse_spec

    return parse_spec(path.read_text())


def generate(spec, out: Path, grid_scale: float = 1.0, threads: int | None = None, log=print) -> dict:
    from .experiment import build, field_names

    out.mkdir(parents=True, exist_ok=True)
    built = build(spec)
    grid = spec.grid.grid(grid_scale)
    X, T = grid.mesh()
    files = {}
    for name in spec.outputs.fields or field_names(spec)[:1]:
        p = out / f"{name}.csv"
        write_csv(p, X, T, built.field(name)(X, T))
        files[name] = {"path": p.name, "sha256": _sha256(p)}
        log(f"wrote {p}")
    pts = built.singular_points(grid)
    manifest = {
        "spec_hash": spec.spec_hash,
        "spec": spec.to_dict(),
        "grid": grid.meta(),
        "grid_scale": grid_scale,
        "threads": threads,
        "versions": _versions(),
        "files": files,
        "singular_mask": {"count": len(pts), "points": pts},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    log(f"wrote {out / 'manifest.json'} (spec {spec.spec_hash[:12]})")
    return manifest


def _artifact_reports(manifest: dict, base: Path, spec, built, grid):
    """Compare stored CSVs against a fresh evaluation of the embedded experiment."""
    import numpy as np

    from .errors import MissingArtifacts
    from .verify import ResidualReport

    X, T = grid.mesh()
    reps = []
    for name, info in sorted(manifest.get("files", {}).items()):
        p = base / info["path"]
        if not p.exists():
            raise MissingArtifacts(f"{p} is listed in the manifest but missing")
        stored = read_csv(p, X.shape)
        fresh = np.asarray(built.field(name)(X, T), dtype=complex)
        both_nan = np.isnan(stored) & np.isnan(fresh)
        with np.errstate(invalid="ignore"):
            d = np.where(both_nan, 0.0, np.abs(stored - fresh))
        d = np.where(np.isnan(d), np.inf, d)
        scale = max(1.0, float(np.nanmax(np.abs(np.where(np.isfinite(fresh), fresh, 0)))))
        tol = 1e-12 * scale
        dm = float(d.max())
        reps.append(ResidualReport(f"artifact:{name}", grid.meta(), dm, dm, None, tol,
                                   "max |stored - recomputed| <= 1e-12 max(1, |u|)", bool(dm <= tol)))
    return reps


def verify(target: Path, grid_scale: float = 1.0, log=print) -> dict:
    from .errors import ParseError
    from .experiment import build, loads, parse_spec, run_check, spec_from_dict, spec_hash

    text = target.read_text()
    doc = loads(text)
    manifest = None
    if isinstance(doc, dict) and "spec_hash" in doc:
        manifest = doc
        if spec_hash(doc.get("spec", {})) != doc["spec_hash"]:
            raise ParseError("manifest spec does not match its spec_hash")
        spec = spec_from_dict(doc["spec"])
        grid_scale = float(doc.get("grid_scale", grid_scale))
    else:
        spec = parse_spec(text)
    built = build(spec)
    grid = spec.grid.grid(grid_scale)
    reports = []
    if manifest is not None:
        reports += _artifact_reports(manifest, target.parent, spec, built, grid)
    for c in spec.outputs.checks:
        try:
            reports.append(run_check(built, c, grid))
        except Exception as e:  # a check that cannot run counts as failed
            from .verify import ResidualReport

            reports.append(ResidualReport(f"{c.kind}:error", grid.meta(), float("inf"), float("inf"), None, 0.0,
                                          f"{type(e).__name__}: {e}", False))
    for r in reports:
        log(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<40s} residual {r.residual_max:.3e}  tol {r.tol:.3e}")
    return {
        "spec_hash": spec.spec_hash,
        "target": str(target),
        "checks": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


def paper_example(name: str, out: Path, grid_scale: float = 1.0, threads=None, log=print) -> dict:
    from . import catalog

    d = catalog.spec_dict(name)
    reports = []
    if d is not None:
        from .experiment import spec_from_dict

        out.mkdir(parents=True, exist_ok=True)
        (out / "spec.json").write_text(json.dumps(d, indent=1) + "\n")
        spec = spec_from_dict(d)
        manifest = generate(spec, out, grid_scale, threads, log=log)
        rep = verify(out / "manifest.json", grid_scale, log=log)
        reports = rep["checks"]
        extra = []
        if name == "kw3-darboux":
            extra = catalog.kw3_extras()
        elif name == "u11-singular":
            extra = catalog.u11_extras(manifest["singular_mask"]["points"]) + [catalog.unitary_empty_scan()]
            log(f"blow-up curve xi(x, t) = {extra[0].params.get('xi_target', float('nan')):.12f}"
                f" = ln((c+1)/(c-1))/2 ({manifest['singular_mask']['count']} flagged nodes)")
        for r in extra:
            log(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<40s} residual {r.residual_max:.3e}  tol {r.tol:.3e}")
        reports += [r.to_dict() for r in extra]
        spec_h = spec.spec_hash
    else:
        extra = catalog.gd_phi_table(log) if name == "gd-phi-table" else catalog.bianchi_sge()
        for r in extra:
            log(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<40s} residual {r.residual_max:.3e}  tol {r.tol:.3e}")
        reports = [r.to_dict() for r in extra]
        spec_h = hashlib.sha256(name.encode()).hexdigest()
    result = {"example": name, "spec_hash": spec_h, "checks": reports,
              "passed": all(r["passed"] for r in reports)}
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(result, indent=1, sort_keys=True, default=str) + "\n")
    return result


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopdress", description="Dressed soliton solutions and their verification.")
    p.add_argument("--grid-scale", type=float, default=1.0, help="multiply both grid spacings by this factor")
    p.add_argument("--threads", type=int, default=None, help="BLAS threads for the numerical kernels")
    sub = p.add_subparsers(dest="cmd", required=True)
    g = sub.add_parser("generate", help="evaluate an experiment and write CSV files plus a manifest")
    g.add_argument("spec")
    g.add_argument("-o", "--out", default=None)
    v = sub.add_parser("verify", help="run the declared checks; exit 0 iff all pass")
    v.add_argument("target")
    v.add_argument("-o", "--out", default=None, help="write the JSON report here")
    e = sub.add_parser("paper-example", help="generate and verify a named reproduction")
    e.add_argument("name")
    e.add_argument("-o", "--out", default=None)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_USAGE
        for k in THREAD_VARS:
            os.environ[k] = str(args.threads)
    if not args.grid_scale > 0:
        print("error: --grid-scale must be positive", file=sys.stderr)
        return EXIT_USAGE

    from .errors import LoopDressError, MissingArtifacts, ParseError, UnknownExample

    try:
        if args.cmd == "generate":
            spec = load_spec(Path(args.spec))
            out = Path(args.out) if args.out else Path(args.spec).with_suffix("")
            generate(spec, out, args.grid_scale, args.threads)
            return EXIT_OK
        if args.cmd == "verify":
            rep = verify(Path(args.target), args.grid_scale, log=lambda m: print(m, file=sys.stderr))
            text = json.dumps(rep, indent=1, sort_keys=True, default=str) + "\n"
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK if rep["passed"] else EXIT_FAIL
        out = Path(args.out) if args.out else Path("runs") / args.name
        rep = paper_example(args.name, out, args.grid_scale, args.threads)
        print(f"{args.name}: {'all checks pass' if rep['passed'] else 'FAILED'}")
        return EXIT_OK if rep["passed"] else EXIT_FAIL
    except (ParseError, UnknownExample, MissingArtifacts) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LoopDressError as e:
        print(f"failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
