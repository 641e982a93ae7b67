"""
Single verification pass: abstract (or load an IMC), bound the satisfaction
probability of every state and classify it.
"""

import logging

from verification.abstraction import build_imc
from verification.geometry import Partition, uncertain_volume
from verification.management.base import CommandOutcome, VerificationCommand
from verification.models import CommandName, StateClass
from verification.outputs import read_imc, write_partition_svg, write_results
from verification.verifier import verify

logger = logging.getLogger(__name__)


class Command(VerificationCommand):
    help = "Verify every cell once and write results.csv (and partition.svg)"
    command_name = CommandName.VERIFY

    def run(self, config, **options):
        spec = config.load_spec()
        if config.imc_path is not None:
            imc = read_imc(config.imc_path)
        else:
            model, partition = config.build_model(), config.build_partition()
            imc = build_imc(model, partition, config.threads)

        numerics = config.refinement
        result = verify(imc, spec.dra, spec, numerics.tol, numerics.max_iters)
        write_results(config.out_dir / "results.csv", imc.cells, result)

        volume = None
        if imc.cells is not None:
            partition = Partition(config.domain, imc.cells, imc.props)
            volume = uncertain_volume(partition, result.classes)
            if config.plot:
                write_partition_svg(
                    config.out_dir / "partition.svg",
                    partition,
                    result.classes,
                    str(spec),
                )

        counts = result.counts()
        summary = ", ".join(f"{label}={counts[c]}" for c, label in StateClass.choices)
        self.stdout.write(
            self.style.SUCCESS(f"{spec} on {imc.n_states} states: {summary}")
        )
        if volume is not None:
            self.stdout.write(f"Uncertain volume: {volume:.6f}")
        return CommandOutcome(n_cells=imc.n_states, uncertain_volume=volume)
