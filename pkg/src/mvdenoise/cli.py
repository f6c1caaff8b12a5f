"""Command-line front end: generate test data, denoise CSVs, run the GoF test,
and execute benchmark matrices.

CSV convention: one row per time index, one column per channel, optional single
header row (auto-detected), UTF-8, '.' decimal separator.  Lines starting with
'#' are comments; every emitted CSV carries a '# manifest: manifest.json'
reference to the run manifest written next to it.

Exit codes: 0 ok, 2 input parse failure, 3 invalid signal geometry, 64 usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .denoiser import DenoiseConfig, baseline_universal, calibrate_thresholds, denoise
from .gofstat import GofDecision, gof_test, mahalanobis_edf, make_reference, ad_statistic
from .robustcov import CovarianceMatrix, mcd_estimate
from .siggen import NoiseSpec, add_noise, average_snr_db, make_signal, snr_db
from .wavelet import dwt_forward, get_filter

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_USAGE = 64

MANIFEST_NAME = "manifest.json"


class UsageError(Exception):
    pass


class ParseFailure(Exception):
    pass


class GeometryError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; route those to the usage exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def read_csv(path) -> np.ndarray:
    """Parse a CSV of one row per time index; auto-detects a single header row."""
    rows = []
    header_skipped = False
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseFailure(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = [c.strip() for c in stripped.split(",")]
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if not rows and not header_skipped:
                header_skipped = True
                continue
            bad = next(i for i, c in enumerate(cells) if not _is_float(c))
            raise ParseFailure(f"{path}: non-numeric cell at row {lineno}, column {bad + 1}") from None
        if len(rows) > 1 and len(rows[-1]) != len(rows[0]):
            raise ParseFailure(f"{path}: row {lineno} has {len(rows[-1])} columns, expected {len(rows[0])}")
    if not rows:
        raise ParseFailure(f"{path}: no numeric rows found")
    return np.asarray(rows, dtype=np.float64)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(path, data, header=None) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# manifest: {MANIFEST_NAME}\n")
        if header:
            f.write(",".join(header) + "\n")
        for row in data:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: DenoiseConfig, seed, input_digest: str, extra=None) -> None:
    manifest = {
        "command": command,
        "config": dataclasses.asdict(config),
        "seed": seed,
        "input_digest": input_digest,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filter", dest="filter_name", default="db8")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--window-l", type=int, default=None)
    p.add_argument("--pfa", type=float, default=0.005)
    p.add_argument("--calib-reps", type=int, default=1000)
    p.add_argument("--eval-mode", choices=("gamma", "series", "paper-literal-ad"), default="gamma")
    p.add_argument("--boundary", choices=("periodic", "symmetric"), default="periodic")


def _config_from(args) -> DenoiseConfig:
    cfg = DenoiseConfig(
        filter_name=args.filter_name,
        levels=args.levels,
        window_l=args.window_l,
        p_fa=args.pfa,
        calibration_reps=args.calib_reps,
        seed=args.seed,
        eval_mode=args.eval_mode,
        boundary=args.boundary,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _parse_snr_spec(text: str) -> object:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"invalid SNR spec {text!r}") from None
    if not vals:
        raise UsageError("empty SNR spec")
    return vals[0] if len(vals) == 1 else vals


def cmd_generate(args) -> int:
    cfg = _config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        signal = make_signal(args.name, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        spec = NoiseSpec(signal.n_channels, args.rho, _parse_snr_spec(args.snr), seed=args.seed)
        noisy, psi = add_noise(signal, spec, rng=np.random.default_rng(args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_manifest(out_dir, "generate", cfg, args.seed, _digest(signal.channels), extra={"signal": args.name, "n": args.n, "rho": args.rho, "snr": args.snr})
    write_csv(out_dir / "clean.csv", signal.channels)
    write_csv(out_dir / "noisy.csv", noisy)
    write_csv(out_dir / "noise.csv", psi)
    print(f"wrote clean.csv noisy.csv noise.csv in {out_dir}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    cfg = _config_from(args)
    x = read_csv(args.input)
    clean = read_csv(args.clean) if args.clean else None
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        estimate, report = denoise(x, cfg, clean=clean)
    except ValueError as exc:
        raise GeometryError(str(exc)) from exc
    write_manifest(out_dir, "denoise", cfg, args.seed, _digest(x))
    write_csv(out_dir / "denoised.csv", estimate)
    payload = {
        "manifest": MANIFEST_NAME,
        "thresholds": [float(t) for t in report.thresholds],
        "tau_summary": [
            {"scale": k + 1, "min": float(t.min()), "median": float(np.median(t)), "max": float(t.max())}
            for k, t in enumerate(report.tau)
        ],
        "keep_masks": [mask.astype(int).tolist() for mask in report.keep_masks],
        "retained_fraction": report.retained_fraction().tolist(),
        "sigma": report.sigma.sigma.tolist(),
        "warnings": report.warnings_issued,
    }
    if report.snr_per_channel is not None:
        payload["snr_per_channel_db"] = [float(v) for v in report.snr_per_channel]
        payload["snr_average_db"] = float(report.snr_average)
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"wrote denoised.csv report.json in {out_dir}")
    return EXIT_OK


def cmd_gof(args) -> int:
    cfg = _config_from(args)
    x = read_csv(args.input)
    n, m = x.shape
    rng = np.random.default_rng(args.seed)
    if args.sigma_source == "file":
        if not args.sigma_file:
            raise UsageError("--sigma-file required when --sigma-source=file")
        sigma = CovarianceMatrix.from_matrix(read_csv(args.sigma_file))
    else:
        try:
            sigma = mcd_estimate(x, rng)
        except ValueError as exc:
            raise GeometryError(str(exc)) from exc
    dist = make_reference(m, eval_mode="series" if cfg.eval_mode == "series" else "gamma")
    formula = "literal" if cfg.eval_mode == "paper-literal-ad" else "standard"
    edf = mahalanobis_edf(x, sigma)
    tau = ad_statistic(edf, dist, formula=formula)
    # the whole dataset is one window: a window wider than the detail block
    # makes every simulated replication contribute a single statistic
    single = dataclasses.replace(cfg, window_l=n + n % 2, levels=1)
    threshold = calibrate_thresholds(sigma, 2 * n, single, rng)[0]
    decision = gof_test(tau, threshold)
    if args.json:
        print(json.dumps({"tau": tau, "threshold": threshold, "decision": decision.value, "n": n, "channels": m}))
    else:
        print(f"tau = {tau:.6g}")
        print(f"threshold (p_fa={cfg.p_fa}) = {threshold:.6g}")
        print(f"decision: {decision.value}")
    return EXIT_OK


def _benchmark_cell(params):
    (signal_name, n, method, rho, snr_spec, balanced, rep_index, master_seed, cfg_dict) = params
    cfg = DenoiseConfig(**cfg_dict)
    signal = make_signal(signal_name, n)
    spec = NoiseSpec(signal.n_channels, rho, snr_spec)
    noise_rng = np.random.default_rng([master_seed, hash_str(signal_name), int(rho * 1000), rep_index])
    noisy, _ = add_noise(signal, spec, rng=noise_rng)
    method_rng = np.random.default_rng([master_seed, hash_str(signal_name), int(rho * 1000), rep_index, hash_str(method)])
    try:
        if method == "mgwd":
            estimate, _ = denoise(noisy, cfg, rng=method_rng)
        elif method == "baseline":
            estimate = baseline_universal(noisy, cfg, rng=method_rng)
        else:
            raise UsageError(f"unknown method {method!r}")
        per_channel = np.atleast_1d(snr_db(signal.channels, estimate))
        status = "ok"
    except Exception as exc:  # mark the cell, keep the run going
        per_channel = np.full(signal.n_channels, np.nan)
        status = f"error: {exc}"
    input_per_channel = np.atleast_1d(np.asarray(spec.snr_targets(), dtype=np.float64))
    rows = []
    for ch in range(signal.n_channels):
        rows.append(
            (signal_name, method, rho, balanced, f"C{ch + 1}", input_per_channel[ch], per_channel[ch], rep_index, status)
        )
    return rows


def hash_str(s: str) -> int:
    return int.from_bytes(hashlib.sha256(s.encode()).digest()[:4], "big")


def cmd_benchmark(args) -> int:
    cfg = _config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    signals = [s.strip() for s in args.signals.split(",") if s.strip()]
    snrs = [_parse_snr_spec(s) for s in args.snrs.split(";")] if ";" in args.snrs else [_parse_snr_spec(p) for p in args.snrs.split(",")]
    rhos = [float(r) for r in args.rhos.split(",") if r.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not signals or not methods or not rhos or not snrs:
        raise UsageError("benchmark matrix must name signals, snrs, rhos and methods")

    cells = []
    for sig_name in signals:
        for snr_spec in snrs:
            balanced = np.isscalar(snr_spec)
            for rho in rhos:
                for method in methods:
                    for rep in range(args.seeds):
                        cells.append((sig_name, args.n, method, rho, snr_spec, balanced, rep, args.seed, dataclasses.asdict(cfg)))

    workers = int(os.environ.get("MVDENOISE_THREADS", "1"))
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_benchmark_cell, cells):
                results.extend(rows)
    else:
        for cell in cells:
            results.extend(_benchmark_cell(cell))

    write_manifest(out_dir, "benchmark", cfg, args.seed, _digest(np.array([float(len(cells))])), extra={"signals": signals, "rhos": rhos, "methods": methods, "snrs": str(snrs), "reps": args.seeds})
    res_path = out_dir / "results.csv"
    with open(res_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# manifest: {MANIFEST_NAME}\n")
        f.write("signal,method,rho,balanced,channel,input_snr_db,output_snr_db,seed,status\n")
        for r in results:
            f.write(
                f"{r[0]},{r[1]},{r[2]:g},{str(r[3]).lower()},{r[4]},{r[5]:.17g},{r[6]:.17g},{r[7]},{r[8]}\n"
            )

    _write_aggregate(out_dir, results)
    _write_plot_data(out_dir, results)
    print(f"wrote results.csv aggregate.csv and plot data in {out_dir}")
    return EXIT_OK


def _aggregate_rows(results):
    """Mean output SNR per (signal, method, rho, balanced, input) with per-channel and Avg columns."""
    from collections import defaultdict

    groups = defaultdict(lambda: defaultdict(list))
    for sig_name, method, rho, balanced, channel, inp, out, rep, status in results:
        if not status == "ok":
            continue
        groups[(sig_name, method, rho, balanced)][channel].append((inp, out))
    table = []
    for key in sorted(groups, key=str):
        channels = sorted(groups[key], key=lambda c: int(c[1:]))
        means = [float(np.mean([o for _, o in groups[key][c]])) for c in channels]
        inputs = [float(np.mean([i for i, _ in groups[key][c]])) for c in channels]
        table.append((key, channels, inputs, means, float(np.mean(means))))
    return table


def _write_aggregate(out_dir: Path, results) -> None:
    table = _aggregate_rows(results)
    with open(out_dir / "aggregate.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# manifest: {MANIFEST_NAME}\n")
        f.write("signal,method,rho,balanced,channel,mean_input_snr_db,mean_output_snr_db\n")
        for (sig_name, method, rho, balanced), channels, inputs, means, avg in table:
            for c, i, m in zip(channels, inputs, means):
                f.write(f"{sig_name},{method},{rho:g},{str(balanced).lower()},{c},{i:.17g},{m:.17g}\n")
            f.write(f"{sig_name},{method},{rho:g},{str(balanced).lower()},Avg,{float(np.mean(inputs)):.17g},{avg:.17g}\n")
    # aligned text table for humans
    with open(out_dir / "aggregate.txt", "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{'signal':<16}{'method':<10}{'rho':>5}  {'bal':<5}{'input':>8}  per-channel output SNR (dB) -> Avg\n")
        for (sig_name, method, rho, balanced), channels, inputs, means, avg in table:
            chans = "  ".join(f"{m:6.2f}" for m in means)
            f.write(f"{sig_name:<16}{method:<10}{rho:>5g}  {str(balanced).lower():<5}{float(np.mean(inputs)):>8.2f}  {chans}  -> {avg:6.2f}\n")


def _write_plot_data(out_dir: Path, results) -> None:
    # one two-column file per (signal, method, rho): mean input SNR vs mean output SNR
    from collections import defaultdict

    curves = defaultdict(lambda: defaultdict(list))
    for sig_name, method, rho, balanced, channel, inp, out, rep, status in results:
        if status == "ok":
            curves[(sig_name, method, rho)][round(float(inp), 6)].append(float(out))
    for (sig_name, method, rho), pts in sorted(curves.items(), key=str):
        name = f"plot_{sig_name}_{method}_rho{rho:g}.csv"
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# manifest: {MANIFEST_NAME}\n")
            f.write("input_snr_db,mean_output_snr_db\n")
            for inp in sorted(pts):
                f.write(f"{inp:.17g},{float(np.mean(pts[inp])):.17g}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="mvdenoise", description="Multivariate wavelet denoising via a Mahalanobis-distance GoF test")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write clean/noisy/noise CSV triples for a named test signal")
    g.add_argument("name")
    g.add_argument("--n", type=int, default=2048)
    g.add_argument("--snr", default="0")
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--out", default=".")
    _add_shared_flags(g)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("denoise", help="denoise a CSV signal")
    d.add_argument("input")
    d.add_argument("--clean", default=None, help="optional clean reference CSV for SNR reporting")
    d.add_argument("--out", default=".")
    _add_shared_flags(d)
    d.set_defaults(func=cmd_denoise)

    f = sub.add_parser("gof", help="run the multivariate normality test on CSV rows")
    f.add_argument("input")
    f.add_argument("--sigma-source", choices=("mcd", "file"), default="mcd")
    f.add_argument("--sigma-file", default=None)
    f.add_argument("--json", action="store_true")
    _add_shared_flags(f)
    f.set_defaults(func=cmd_gof)

    b = sub.add_parser("benchmark", help="run a signals x SNRs x rhos x methods x seeds matrix")
    b.add_argument("--signals", default="heavydoppler3,bumpsblocks4")
    b.add_argument("--snrs", default="-5,0,5,10", help="comma list of balanced dB values, or ';'-separated per-channel specs")
    b.add_argument("--rhos", default="0,0.75")
    b.add_argument("--methods", default="mgwd,baseline")
    b.add_argument("--seeds", type=int, default=10, help="replications per cell")
    b.add_argument("--n", type=int, default=2048)
    b.add_argument("--out", default="benchmark_out")
    _add_shared_flags(b)
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseFailure as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GeometryError as exc:
        print(f"invalid signal geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


if __name__ == "__main__":
    sys.exit(main())
