"""
Main Entry Point for the Bell Measurement Optimizer
Command-line interface: optimize, bounds, verify, report and events subcommands
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from src.bounds import bell_pair_bound, bound_row, photon_number_bound, stirling_form
from src.compiler import compile_plan, evaluate, partition_count
from src.evolve import UnitaryMatrix, event_count, load_unitary_or_circuit
from src.exceptions import IO_EXIT_CODE, BellMeasurementError, ConfigError
from src.fock import AncillaSpec, parse_ancilla_argument
from src.objective import pattern, success_probability
from src.optimizer import (OptimizerConfig, campaign, default_output_path, local_optimize,
                           perturbation_study)
from src.records import CampaignSummary, read_records, summary_path
from src.report import build_report, print_table, render_json, render_text
from src.utils import (
    setup_logging, load_config, merge_config, read_structured_file,
    validate_campaign_config, snap_rational, format_duration, write_json
)

# Try to import colorama for colored output
try:
    from colorama import init, Fore, Style
    init(autoreset=True)
    HAS_COLORAMA = True
except ImportError:
    HAS_COLORAMA = False
    # Create dummy color objects
    class Fore:
        GREEN = YELLOW = RED = BLUE = CYAN = MAGENTA = WHITE = RESET = ""
    class Style:
        BRIGHT = RESET_ALL = ""

# Try to import matplotlib for visualization
try:
    import matplotlib.pyplot as plt
    import matplotlib
    matplotlib.use('Agg')  # Non-interactive backend
    HAS_MATPLOTLIB = True
except ImportError:
    HAS_MATPLOTLIB = False

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "config/config.yaml"


class BellOptimizerApp:
    """Main application class"""

    def __init__(self, config_path: Optional[str] = None, log_level: Optional[str] = None):
        """
        Initialize the application

        Args:
            config_path: Path to configuration file
            log_level: Overrides the configured logging level
        """
        self.config = load_config(config_path or DEFAULT_CONFIG_PATH)

        log_config = self.config.get('logging', {})
        setup_logging(
            log_level=log_level or log_config.get('level', 'INFO'),
            log_file=log_config.get('log_file')
        )

        self.ui_config = self.config.get('ui', {})
        self.objective_config = self.config.get('objective', {})
        self.compiler_config = self.config.get('compiler', {})
        self.bounds_config = self.config.get('bounds', {})
        logger.info("Bell optimizer application initialized")

    def print_colored(self, text: str, color: str = ""):
        """Print colored text if colorama is available"""
        if self.ui_config.get('use_colors', True) and HAS_COLORAMA:
            print(f"{color}{text}{Style.RESET_ALL}")
        else:
            print(text)

    def print_header(self, title: str):
        self.print_colored("=" * 60, Fore.CYAN)
        self.print_colored(f"=== {title} ===", Fore.CYAN + Style.BRIGHT)
        self.print_colored("=" * 60, Fore.CYAN)

    def _snap(self, value: float) -> str:
        fraction = snap_rational(
            value,
            self.objective_config.get('snap_denominator', 64),
            self.objective_config.get('snap_tolerance', 1e-7),
        )
        return f"{value:.9f}" + (f" (~{fraction})" if fraction is not None else "")

    def _compile(self, spec: AncillaSpec, n: int):
        return compile_plan(
            spec, n,
            node_ceiling=self.compiler_config.get('node_ceiling', 10_000_000),
            cse=self.compiler_config.get('cse', True),
            cache_directory=self.compiler_config.get('cache_directory'),
        )

    def _optimizer_config(self, section: Optional[Dict[str, Any]] = None, **overrides) -> OptimizerConfig:
        merged = merge_config(self.config.get('optimizer', {}), section)
        merged.setdefault('eps_zero', self.objective_config.get('eps_zero', 1e-9))
        return OptimizerConfig.from_mapping(merged, **overrides)

    # ------------------------------------------------------------------
    # optimize
    # ------------------------------------------------------------------

    def cmd_optimize(self, args: argparse.Namespace) -> int:
        """Run a multistart campaign described by a campaign file"""
        campaign_config = read_structured_file(args.config_file)
        is_valid, error = validate_campaign_config(campaign_config)
        if not is_valid:
            raise ConfigError(f"{args.config_file}: {error}")

        spec = AncillaSpec.from_dict(campaign_config['ancilla'])
        n = campaign_config['n']
        seed = args.seed if args.seed is not None else campaign_config.get('seed')
        cfg = self._optimizer_config(campaign_config.get('optimizer'), seed=seed, eps_zero=args.eps_zero)
        runs = args.runs or campaign_config.get('runs') or cfg.restarts
        parallelism = args.parallelism or campaign_config.get('parallelism', 1)
        output = args.output or campaign_config.get('output') or default_output_path(
            self.config.get('data', {}).get('output_directory', 'data'), spec, n
        )

        self.print_header(f"Campaign {spec.label}, n={n}")
        plan = self._compile(spec, n)
        self.print_colored(
            f"Plan: {plan.event_count} events in {plan.class_count} classes, "
            f"{plan.amplitude_instruction_count} amplitude instructions "
            f"(naive expansion {plan.naive_operation_count})", Fore.WHITE
        )

        summary = campaign(spec, n, runs, cfg, parallelism=parallelism, output=output, plan=plan)
        self.display_summary(summary)
        self.print_colored(f"Records saved to: {output}", Fore.CYAN)
        self.print_colored(f"Summary saved to: {summary_path(output)}", Fore.CYAN)

        if args.plot:
            self._create_histogram_plot(summary, str(Path(output).with_suffix('.png')))
        return 0

    def display_summary(self, summary: CampaignSummary):
        converged = summary.converged_records()
        wall_time = sum(r.wall_time for r in summary.records)
        self.print_colored(f"Runs: {summary.runs} ({len(converged)} converged) "
                           f"in {format_duration(wall_time)} of optimizer time", Fore.WHITE)
        best = summary.best_record()
        if best is None:
            self.print_colored("No converged run", Fore.YELLOW)
            return
        self.print_colored(f"Best P_succ: {self._snap(best.p_succ)} (run {best.run_index})",
                           Fore.GREEN + Style.BRIGHT)
        sorted_pattern = sorted(best.pattern, reverse=True)
        self.print_colored("Pattern: (" + ", ".join(self._snap(v) for v in sorted_pattern) + ")",
                           Fore.WHITE)
        self.print_colored("Local optima:", Fore.MAGENTA)
        for value, count in list(summary.histogram().items())[:10]:
            self.print_colored(f"   {value}: {count}", Fore.WHITE)

    def _create_histogram_plot(self, summary: CampaignSummary, plot_path: str):
        """Bar chart of the local-optimum histogram"""
        if not HAS_MATPLOTLIB:
            logger.warning("matplotlib not available; skipping histogram plot")
            return
        counts = summary.histogram()
        if not counts:
            return
        try:
            values = [float(v) for v in counts]
            plt.figure(figsize=(10, 6))
            plt.bar(values, list(counts.values()), width=0.004)
            plt.xlabel('P_succ of local optimum', fontsize=12)
            plt.ylabel('Runs', fontsize=12)
            plt.title(f'Local optima for {summary.label}, n={summary.n}', fontsize=14, fontweight='bold')
            plt.grid(True, alpha=0.3)
            plt.tight_layout()
            plt.savefig(plot_path, dpi=150, bbox_inches='tight')
            plt.close()
            self.print_colored(f"Histogram saved to: {plot_path}", Fore.CYAN)
            logger.info(f"Histogram saved to {plot_path}")
        except Exception as e:
            logger.error(f"Error creating histogram plot: {e}", exc_info=True)

    # ------------------------------------------------------------------
    # bounds
    # ------------------------------------------------------------------

    def cmd_bounds(self, args: argparse.Namespace) -> int:
        """Print the analytical bounds of an ancilla, or of a bare photon count"""
        if args.photons is not None:
            row = self._photon_row(args.photons)
        elif args.ancilla:
            spec = parse_ancilla_argument(args.ancilla)
            row = bound_row(spec, rotate=not args.no_rotate,
                            max_pairs=self.bounds_config.get('max_rotation_pairs', 12))
        else:
            raise ConfigError("bounds needs an ancilla or --photons")

        if args.json:
            print(json.dumps(row, default=str, indent=2, sort_keys=True, ensure_ascii=False))
            return 0

        self.print_header(f"Bounds for {row.get('label', 'k = ' + str(row['k']))}")
        for key, value in row.items():
            if key in ('ancilla', 'label'):
                continue
            if isinstance(value, list):
                value = "(" + ", ".join(str(v) for v in value) + ")"
            self.print_colored(f"   {key}: {value}", Fore.WHITE)
        return 0

    @staticmethod
    def _photon_row(k: int) -> Dict[str, Any]:
        row: Dict[str, Any] = {'k': k, 'photon_bound': photon_number_bound(k)}
        if k % 2 == 0:
            failure = bell_pair_bound(k)
            row['bell_pair_failure_bound'] = failure
            row['bell_pair_success_bound'] = 1 - failure
            if k > 0:
                row['stirling_form'] = stirling_form(k)
        return row

    # ------------------------------------------------------------------
    # verify
    # ------------------------------------------------------------------

    def _load_unitary(self, path: str, run: Optional[int]) -> UnitaryMatrix:
        if path.endswith('.jsonl'):
            records, _ = read_records(path)
            chosen = [r for r in records if run is None or r.run_index == run]
            if not chosen:
                raise ConfigError(f"No run {run} in {path}")
            if run is None:
                chosen = [max(chosen, key=lambda r: r.p_succ)]
            return chosen[0].final_unitary()
        return load_unitary_or_circuit(path)

    def cmd_verify(self, args: argparse.Namespace) -> int:
        """Evaluate an explicit scheme and list its discriminating events"""
        unitary = self._load_unitary(args.unitary_file, args.run)
        spec = parse_ancilla_argument(args.ancilla)
        eps_zero = args.eps_zero or self.objective_config.get('eps_zero', 1e-9)
        plan = self._compile(spec, unitary.n)
        table = evaluate(plan, unitary, eps_zero)
        p_succ = success_probability(table)
        discrimination = pattern(table)
        listing = table.discriminating_events()

        result: Dict[str, Any] = {
            'ancilla': spec.to_dict(),
            'n': unitary.n,
            'p_succ': p_succ,
            'pattern': discrimination.to_dict(),
            'polarization_preserving': unitary.is_polarization_preserving(),
            'discriminating_events': listing,
        }

        self.print_header(f"Scheme for {spec.label}, n={unitary.n}")
        self.print_colored(f"P_succ: {self._snap(p_succ)}", Fore.GREEN + Style.BRIGHT)
        self.print_colored("Pattern (sorted): (" + ", ".join(discrimination.snapped()) + ")", Fore.WHITE)
        self.print_colored(f"Discriminating events: {len(listing)}", Fore.MAGENTA)
        for entry in listing:
            self.print_colored(f"   {tuple(entry['event'])} -> {entry['bell']} "
                               f"p = {entry['probability']:.9f}", Fore.WHITE)

        if args.polish or args.perturb:
            cfg = self._optimizer_config(seed=args.seed, eps_zero=args.eps_zero)
            if args.polish:
                record = local_optimize(plan, unitary, cfg)
                result['polished'] = record.to_dict()
                color = Fore.GREEN if record.converged else Fore.YELLOW
                self.print_colored(f"Polished: P_succ {self._snap(record.p_succ)}, f = {record.f:.9f}, "
                                   f"{'converged' if record.converged else 'not converged'}", color)
            if args.perturb:
                outcomes = perturbation_study(plan, unitary, args.perturb, seed=cfg.seed, cfg=cfg)
                result['perturbation'] = outcomes
                for outcome in outcomes:
                    self.print_colored(f"   noise {outcome['magnitude']:.1e}: "
                                       f"P_succ -> {outcome['final_p_succ']:.9f} "
                                       f"({'kept' if outcome['kept'] else 'left'})", Fore.WHITE)

        if args.output:
            write_json(result, args.output)
            self.print_colored(f"Result saved to: {args.output}", Fore.CYAN)
        return 0

    # ------------------------------------------------------------------
    # report
    # ------------------------------------------------------------------

    def cmd_report(self, args: argparse.Namespace) -> int:
        """Compare campaigns with bounds and literature values"""
        rows = build_report(
            args.campaign_files,
            snap_denominator=self.objective_config.get('snap_denominator', 64),
            snap_tolerance=self.objective_config.get('snap_tolerance', 1e-7),
            max_pairs=self.bounds_config.get('max_rotation_pairs', 12),
        )
        if args.plain or not self.ui_config.get('use_colors', True):
            print(render_text(rows), end='')
        else:
            print_table(rows)

        if args.json:
            document = render_json(rows)
            if args.json == '-':
                print(document, end='')
            else:
                Path(args.json).parent.mkdir(parents=True, exist_ok=True)
                Path(args.json).write_text(document, encoding='utf-8')
                self.print_colored(f"Report saved to: {args.json}", Fore.CYAN)

        flagged = [r for r in rows if r.flagged]
        if flagged:
            self.print_colored(f"{len(flagged)} row(s) exceed a bound", Fore.RED + Style.BRIGHT)
        return 0

    # ------------------------------------------------------------------
    # events
    # ------------------------------------------------------------------

    def cmd_events(self, args: argparse.Namespace) -> int:
        """Event and partition-class counts for n modes and k ancilla photons"""
        photons = args.k + 2
        events = event_count(args.n, photons)
        classes = partition_count(photons)
        self.print_header(f"Events for n={args.n}, k={args.k}")
        self.print_colored(f"   detection events N: {events}", Fore.WHITE)
        self.print_colored(f"   probabilities 4N: {4 * events}", Fore.WHITE)
        self.print_colored(f"   partition classes P_{photons}: {classes}", Fore.WHITE)
        return 0


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation"""
    parser = argparse.ArgumentParser(
        prog='main.py',
        description="Optimize and bound ancilla-assisted linear-optical Bell measurements",
    )
    parser.add_argument('--config', default=None, help="Application config (default config/config.yaml)")
    parser.add_argument('--log-level', default=None, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    commands = parser.add_subparsers(dest='command', required=True)

    optimize = commands.add_parser('optimize', help="Run a multistart campaign")
    optimize.add_argument('config_file', help="Campaign file (JSON or YAML)")
    optimize.add_argument('--seed', type=int, default=None)
    optimize.add_argument('--runs', type=int, default=None)
    optimize.add_argument('--parallelism', type=int, default=None)
    optimize.add_argument('--eps-zero', type=float, default=None)
    optimize.add_argument('--output', default=None, help="Records file (.jsonl)")
    optimize.add_argument('--plot', action='store_true', help="Save a histogram PNG next to the records")

    bounds = commands.add_parser('bounds', help="Analytical bounds for an ancilla")
    bounds.add_argument('ancilla', nargs='?', help="family[:parameter] or JSON")
    bounds.add_argument('--photons', type=int, default=None, help="Bounds for k photons only")
    bounds.add_argument('--no-rotate', action='store_true', help="Skip the pi/4 rotation search")
    bounds.add_argument('--json', action='store_true')

    verify = commands.add_parser('verify', help="Evaluate an explicit unitary or circuit")
    verify.add_argument('unitary_file', help="Unitary, circuit or records (.jsonl) file")
    verify.add_argument('ancilla', help="family[:parameter] or JSON")
    verify.add_argument('--run', type=int, default=None, help="Run index when reading records")
    verify.add_argument('--eps-zero', type=float, default=None)
    verify.add_argument('--polish', action='store_true', help="Use the unitary as an optimizer start")
    verify.add_argument('--perturb', type=float, nargs='+', default=None, metavar='SIGMA',
                        help="Re-optimize from perturbed copies with these noise levels")
    verify.add_argument('--seed', type=int, default=None)
    verify.add_argument('--output', default=None, help="Write the result as JSON")

    report = commands.add_parser('report', help="Compare campaigns with bounds and literature")
    report.add_argument('campaign_files', nargs='*')
    report.add_argument('--plain', action='store_true', help="Plain-text table")
    report.add_argument('--json', default=None, metavar='PATH', help="JSON output ('-' for stdout)")

    events = commands.add_parser('events', help="Event and partition-class counts")
    events.add_argument('n', type=int, help="Total mode count")
    events.add_argument('k', type=int, help="Ancilla photon count")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        app = BellOptimizerApp(args.config, args.log_level)
        handler = getattr(app, f"cmd_{args.command}")
        return handler(args)
    except KeyboardInterrupt:
        print("\n\nInterrupted")
        return 1
    except BellMeasurementError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=True)
        print(f"\nError: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"IO error: {e}", exc_info=True)
        print(f"\nIO error: {e}", file=sys.stderr)
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
