"""
Specification-guided refinement loop.

Writes round_<k>.csv (and round_<k>.svg) for every round, then rounds.csv and
summary.json. Ending on a budget rather than on v_stop exits with code 4.
"""

import logging

from verification.management.base import CommandOutcome, VerificationCommand
from verification.models import CommandName, RefinementRound, RunStatus, StateClass
from verification.outputs import (
    atomic_write,
    rounds_csv,
    summary_json,
    write_partition_svg,
    write_results,
)
from verification.refinement import refine_loop

logger = logging.getLogger(__name__)


class Command(VerificationCommand):
    help = "Refine the partition until the undecided volume drops to v_stop"
    command_name = CommandName.REFINE

    def run(self, config, **options):
        model = config.build_model()
        partition = config.build_partition()
        spec = config.load_spec()
        out_dir = config.out_dir

        def on_round(record):
            self.stdout.write(record.log_line())
            write_results(
                out_dir / f"round_{record.index}.csv",
                record.partition.cells,
                record.result,
            )
            if config.plot:
                write_partition_svg(
                    out_dir / f"round_{record.index}.svg",
                    record.partition,
                    record.result.classes,
                    f"{spec} round {record.index}",
                )
            if self.run_record is not None:
                self._record_round(record)

        outcome = refine_loop(
            model, partition, spec.dra, spec, config.refinement, on_round
        )
        atomic_write(out_dir / "rounds.csv", rounds_csv(outcome.history))
        atomic_write(out_dir / "summary.json", summary_json(outcome, config.seed))

        final = outcome.final
        message = (
            f"{len(outcome.history)} round(s), {final.n_cells} cells, "
            f"uncertain volume {final.uncertain_volume:.6f}"
        )
        if outcome.soundness_violations:
            self.stderr.write(
                self.style.ERROR(
                    f"{outcome.soundness_violations} cell(s) flipped between yes and no"
                )
            )
        if outcome.status == RunStatus.CONVERGED:
            self.stdout.write(self.style.SUCCESS(f"Converged: {message}"))
        else:
            self.stdout.write(self.style.WARNING(f"{outcome.status.label}: {message}"))
        return CommandOutcome(
            status=outcome.status,
            n_cells=final.n_cells,
            uncertain_volume=final.uncertain_volume,
            message=message,
        )

    def _record_round(self, record):
        counts = record.counts
        RefinementRound.objects.create(
            run=self.run_record,
            index=record.index,
            n_cells=record.n_cells,
            uncertain_volume=record.uncertain_volume,
            n_yes=counts[StateClass.YES.value],
            n_no=counts[StateClass.NO.value],
            n_undecided=counts[StateClass.UNDECIDED.value],
            elapsed_seconds=record.elapsed,
            soundness_violations=record.soundness_violations,
        )
