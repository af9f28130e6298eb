"""Command line interface.

Subcommands mirror the pipeline stages: generate, density, build, eigs,
tune, operator-check, experiment. Configuration comes from an optional
``key = value`` text file (--config) overridden by repeated --set flags.
Exit codes: 0 success, 1 usage error, 2 structured pipeline error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import density, harness, kernel, neighbors, pointcloud, spectral, tuning
from .errors import PipelineError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_eps(raw):
    raw = raw.strip()
    if raw in ("auto", "sweep"):
        return raw
    parts = [p for p in raw.replace(",", " ").split() if p]
    values = [float(p) for p in parts]
    return values[0] if len(values) == 1 else sorted(values)


_COERCE = {
    "experiment": str,
    "N": int,
    "alpha": float,
    "beta": float,
    "preset": str,
    "eps": _parse_eps,
    "eps_multiplier": float,
    "k_support": int,
    "k0": int,
    "seed": int,
    "eigenfunctions": int,
    "formulation": str,
    "output_dir": str,
}


def load_config(config_path=None, sets=()):
    """Build an ExperimentConfig from a key-value file plus overrides."""
    raw = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise _UsageError(f"config file not found: {path}")
        for line_no, line in enumerate(path.read_text().splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise _UsageError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in stripped.split("=", 1))
            raw[key] = value
    for item in sets:
        if "=" not in item:
            raise _UsageError(f"--set needs key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        raw[key] = value
    kwargs = {}
    for key, value in raw.items():
        if key not in _COERCE:
            raise _UsageError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _COERCE[key](value)
        except ValueError as exc:
            raise _UsageError(f"bad value for {key!r}: {exc}") from exc
    if "experiment" not in kwargs:
        raise _UsageError("config must set 'experiment'")
    config = harness.ExperimentConfig(**kwargs)
    try:
        config.validate()
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    return config


def _out_dir(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(config, out, extra=None):
    with open(out / "meta.txt", "w") as fh:
        for key in _COERCE:
            fh.write(f"{key} = {getattr(config, key)}\n")
        for key, value in (extra or {}).items():
            fh.write(f"{key} = {value}\n")


def _setup(config):
    config = harness._resolved(config)
    cloud = harness.generate_cloud(config)
    alpha, beta = harness._resolve_alpha_beta(config, cloud.intrinsic_dim)
    graph, profile, support = harness._pipeline_setup(config, cloud, beta)
    return config, cloud, alpha, beta, graph, profile, support


def _single_eps(config, cloud, rho, support):
    if isinstance(config.eps, str):
        curve = tuning.s_curve(cloud, rho, support=support)
        return curve.eps_star * config.eps_multiplier, curve
    eps = config.eps[0] if np.iterable(config.eps) else float(config.eps)
    return eps * config.eps_multiplier, None


def _cmd_generate(config):
    config = harness._resolved(config)
    out = _out_dir(config)
    cloud = harness.generate_cloud(config)
    pointcloud.save_csv(cloud, out / "cloud.csv")
    _write_meta(config, out, {"n_points": cloud.n_points})
    print(f"wrote {out / 'cloud.csv'} ({cloud.n_points} points)")
    return 0


def _cmd_density(config):
    config, cloud, alpha, beta, graph, profile, support = _setup(config)
    out = _out_dir(config)
    density.save_csv(profile, out / "bandwidth.csv")
    _write_meta(config, out, {"alpha": alpha, "beta": beta,
                              "eps0": profile.eps0})
    print(f"wrote {out / 'bandwidth.csv'} (eps0={profile.eps0:.6g})")
    return 0


def _cmd_build(config):
    config, cloud, alpha, beta, graph, profile, support = _setup(config)
    out = _out_dir(config)
    eps, _ = _single_eps(config, cloud, profile.rho, support)
    gm = kernel.build_generator(cloud, profile.rho, eps, alpha,
                                d=cloud.intrinsic_dim, support=support)
    kernel.save_sparse_csv(gm.Lhat, out / "lhat.csv")
    _write_meta(config, out, {"alpha": alpha, "beta": beta, "eps_used": eps})
    print(f"wrote {out / 'lhat.csv'} (eps={eps:.6g})")
    return 0


def _cmd_eigs(config):
    config, cloud, alpha, beta, graph, profile, support = _setup(config)
    out = _out_dir(config)
    eps, _ = _single_eps(config, cloud, profile.rho, support)
    gm = kernel.build_generator(cloud, profile.rho, eps, alpha,
                                d=cloud.intrinsic_dim, support=support)
    spec = spectral.scale_sqrtN(
        spectral.eigs_near_zero(gm, config.eigenfunctions))
    path = out / f"eigvecs_{harness._eps_str(eps)}.csv"
    spectral.save_csv(spec, path, latent=cloud.latent)
    _write_meta(config, out, {"alpha": alpha, "beta": beta, "eps_used": eps,
                              "eigenvalues": list(spec.eigenvalues)})
    print(f"wrote {path}")
    print("eigenvalues:", " ".join("%.6g" % v for v in spec.eigenvalues))
    return 0


def _cmd_tune(config):
    config, cloud, alpha, beta, graph, profile, support = _setup(config)
    out = _out_dir(config)
    curve = tuning.s_curve(cloud, profile.rho, support=support)
    tuning.save_csv(curve, out / "tuning.csv")
    _write_meta(config, out, {"eps_star": curve.eps_star,
                              "a_max": curve.a_max, "d_hat": curve.d_hat})
    print(f"wrote {out / 'tuning.csv'}")
    print(f"eps_star={curve.eps_star:.6g} a_max={curve.a_max:.4f} "
          f"d_hat={curve.d_hat:.4f}")
    return 0


def _cmd_operator_check(config):
    table = harness.operator_check(config)
    for eps, err, _, wall in table.rows:
        print(f"eps={eps:.6g} rms={np.sqrt(err):.6g} ({wall:.2f}s)")
    print(f"wrote {Path(config.output_dir) / 'results.csv'}")
    return 0


def _cmd_experiment(config):
    table = harness.run_experiment(config)
    for eps, err, eig_err, wall in table.rows:
        print(f"eps={eps:.6g} mse={err:.6g} eig_err={eig_err:.6g} ({wall:.2f}s)")
    errors = table.metadata.get("errors", {})
    for eps, message in errors.items():
        print(f"eps={eps:.6g} failed: {message}")
    print(f"wrote {Path(config.output_dir) / 'results.csv'}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "density": _cmd_density,
    "build": _cmd_build,
    "eigs": _cmd_eigs,
    "tune": _cmd_tune,
    "operator-check": _cmd_operator_check,
    "experiment": _cmd_experiment,
}


def main(argv=None):
    parser = _Parser(prog="vbdiff", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="key = value text file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (repeatable)")
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config, args.set)
        return _COMMANDS[args.command](config)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"pipeline error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
