"""
Build the IMC abstraction of a run-config's system over its initial partition.

    python manage.py abstract --config configs/bistable_phi1.json
"""

import logging

from verification.abstraction import build_imc
from verification.management.base import CommandOutcome, VerificationCommand
from verification.models import CommandName
from verification.outputs import write_imc

logger = logging.getLogger(__name__)


class Command(VerificationCommand):
    help = "Abstract the configured system into an IMC interchange file (imc.json)"
    command_name = CommandName.ABSTRACT

    def run(self, config, **options):
        model = config.build_model()
        partition = config.build_partition()
        self.stdout.write(f"Abstracting {model!r} over {partition.n_cells} cells")
        imc = build_imc(model, partition, config.threads)
        path = write_imc(config.out_dir / "imc.json", imc)
        self.stdout.write(
            self.style.SUCCESS(
                f"Wrote {imc.n_states}-state IMC "
                f"({imc.upper.nnz} transitions) to {path}"
            )
        )
        return CommandOutcome(n_cells=imc.n_states)
