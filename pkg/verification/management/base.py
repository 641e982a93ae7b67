"""
Shared plumbing for the verification management commands.

Every command takes the same run-config flags, translates the exception
hierarchy into exit codes and, with --record, keeps a VerificationRun row.
"""

import logging
from dataclasses import dataclass

from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from verification.exceptions import ConvergenceError, VerificationError
from verification.models import CommandName, RunStatus, VerificationRun
from verification.runconfig import RunConfig, load_run_config

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_BUDGET = 4

BUDGET_STATUSES = {RunStatus.MAX_ROUNDS, RunStatus.MAX_CELLS, RunStatus.STALLED}


def exit_code_for(exc: VerificationError) -> int:
    return EXIT_CONVERGENCE if isinstance(exc, ConvergenceError) else EXIT_CONFIG


@dataclass
class CommandOutcome:
    status: RunStatus = RunStatus.SUCCEEDED
    n_cells: int | None = None
    uncertain_volume: float | None = None
    message: str = ""


class VerificationCommand(BaseCommand):
    command_name: CommandName

    def add_arguments(self, parser):
        parser.add_argument(
            "--config", required=True, help="Path to the JSON run-config"
        )
        parser.add_argument(
            "--out-dir",
            help="Output directory; overrides output.out_dir in the run-config",
        )
        parser.add_argument(
            "--seed", type=int, help="Random seed; overrides numerics.seed"
        )
        parser.add_argument(
            "--threads",
            type=int,
            help="Abstraction workers (0 = all cores); overrides numerics.threads",
        )
        parser.add_argument(
            "--record",
            action="store_true",
            help="Store the run (and refinement rounds) in the database",
        )

    def handle(self, *args, **options):
        self.run_record = None
        if options["record"]:
            self.run_record = VerificationRun.objects.create(
                command=self.command_name,
                config_path=str(options["config"]),
                seed=options["seed"] or 0,
            )
        try:
            config = load_run_config(
                options["config"],
                seed=options["seed"],
                threads=options["threads"],
                out_dir=options["out_dir"],
            )
            if self.run_record is not None:
                self.run_record.seed = config.seed
                self.run_record.out_dir = str(config.out_dir)
                self.run_record.save(update_fields=["seed", "out_dir"])
            run_options = {k: v for k, v in options.items() if k != "config"}
            outcome = self.run(config, **run_options)
        except VerificationError as exc:
            logger.error("%s failed: %s", self.command_name, exc)
            self._finish(CommandOutcome(status=RunStatus.FAILED, message=str(exc)))
            raise CommandError(str(exc), returncode=exit_code_for(exc)) from exc
        except Exception as exc:
            logger.error("%s crashed", self.command_name, exc_info=True)
            self._finish(CommandOutcome(status=RunStatus.FAILED, message=repr(exc)))
            raise

        self._finish(outcome)
        if outcome.status in BUDGET_STATUSES:
            raise CommandError(
                f"Budget exhausted ({outcome.status.label}): {outcome.message}",
                returncode=EXIT_BUDGET,
            )

    def run(self, config: RunConfig, **options) -> CommandOutcome:
        raise NotImplementedError

    def _finish(self, outcome: CommandOutcome) -> None:
        if self.run_record is None:
            return
        run = self.run_record
        run.status = outcome.status
        run.n_cells = outcome.n_cells
        run.uncertain_volume = outcome.uncertain_volume
        run.message = outcome.message
        run.finished_at = timezone.now()
        run.save()
