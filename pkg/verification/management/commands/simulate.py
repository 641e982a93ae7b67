"""Sample trajectories of the configured stochastic system."""

import logging

from verification.exceptions import ConfigError
from verification.management.base import CommandOutcome, VerificationCommand
from verification.models import CommandName
from verification.oracles import simulate
from verification.outputs import atomic_write, trajectories_csv

logger = logging.getLogger(__name__)


class Command(VerificationCommand):
    help = "Simulate trajectories from simulate.x0 and write trajectories.csv"
    command_name = CommandName.SIMULATE

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--horizon", type=int, help="Overrides simulate.horizon")
        parser.add_argument("--n-traj", type=int, help="Overrides simulate.n_traj")

    def run(self, config, **options):
        if config.simulate is None:
            raise ConfigError("simulate: block is required for the simulate command")
        settings = config.simulate
        horizon = options.get("horizon")
        horizon = settings.horizon if horizon is None else horizon
        n_traj = options.get("n_traj") or settings.n_traj
        if horizon < 0 or n_traj < 1:
            raise ConfigError("horizon must be ≥ 0 and n_traj ≥ 1")

        model = config.build_model()
        states = simulate(model, settings.x0, horizon, config.seed, n_traj)
        path = atomic_write(
            config.out_dir / "trajectories.csv", trajectories_csv(states)
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"Wrote {n_traj} trajectory(ies) of {horizon} steps to {path}"
            )
        )
        return CommandOutcome()
