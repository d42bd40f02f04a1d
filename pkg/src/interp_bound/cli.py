"""``interp-bound`` command line."""
import argparse
import os
import sys

from . import __version__
from .config import load_config
from .exceptions import (
    AssumptionViolation,
    ConfigError,
    DegenerateDeltaRError,
    InterpBoundError,
    InvariantFailure,
    NotAConstrainedMinimizerError,
    SolverError,
)
from .harness import apply_overrides, run_bound, run_sweep, run_validate

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4, 5


def _parser():
    p = argparse.ArgumentParser(
        prog="interp-bound",
        description="Generalization bounds for interpolating models: bound terms, sweeps, "
                    "and brute-force Laplace validation.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "bound": "compute every bound term for one configuration",
        "sweep": "sweep d or n with replicates and summarize bound validity",
        "validate": "check the Laplace asymptotics by quadrature (d <= 3)",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", required=True, help="path to a JSON run config")
        s.add_argument("--out-dir", default=None, help="output directory (overrides output.directory)")
        s.add_argument("--seed", type=int, default=None, help="root seed (overrides data.seed and solver.seed)")
        s.add_argument("--format", choices=("csv", "json", "both"), default=None,
                       help="output formats (default: output.formats)")
        if name == "sweep":
            s.add_argument("--workers", type=int, default=None, help="worker processes (overrides sweep.workers)")
    return p


def _fail(code, message):
    print(f"interp-bound: error: {message}", file=sys.stderr)
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be positive")
        cfg = apply_overrides(load_config(args.config), seed=args.seed)
        base = os.path.dirname(os.path.abspath(args.config))
        if args.command == "bound":
            terms, _ = run_bound(cfg, args.out_dir, args.format, base_dir=base)
            print(f"pac_rhs={terms.pac_rhs!r} iic={terms.iic!r} tau={terms.tau!r}")
        elif args.command == "sweep":
            _, _, overall = run_sweep(cfg, args.out_dir, args.format, workers=args.workers, base_dir=base)
            print(f"bound held in {overall['holds']}/{overall['ok']} rows "
                  f"(Wilson {overall['confidence']:.0%} CI [{overall['wilson_low']:.4f}, "
                  f"{overall['wilson_high']:.4f}])")
        else:
            _, rates, _, _ = run_validate(cfg, args.out_dir, args.format, base_dir=base)
            for r in rates:
                print(f"{r['quantity']}: slope={r['slope']:.4f} r2={r['r_squared']:.4f}")
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    except AssumptionViolation as exc:
        return _fail(EXIT_ASSUMPTION, str(exc))
    except DegenerateDeltaRError as exc:
        return _fail(EXIT_ASSUMPTION, f"degenerate problem: {exc}")
    except (SolverError, NotAConstrainedMinimizerError) as exc:
        return _fail(EXIT_SOLVER, f"solver: {exc}")
    except InvariantFailure as exc:
        return _fail(EXIT_INVARIANT, str(exc))
    except InterpBoundError as exc:
        return _fail(EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
