from django.db import models


class StateClass(models.TextChoices):
    YES = "yes", "Satisfies"
    NO = "no", "Violates"
    UNDECIDED = "undecided", "Undecided"


class Comparison(models.TextChoices):
    LE = "<=", "≤"
    LT = "<", "<"
    GE = ">=", "≥"
    GT = ">", ">"

    @property
    def is_strict(self) -> bool:
        return self in (Comparison.LT, Comparison.GT)

    def holds(self, probability: float, p_sat: float) -> bool:
        """Return True if `probability ⋈ p_sat`."""
        if self == Comparison.LE:
            return probability <= p_sat
        if self == Comparison.LT:
            return probability < p_sat
        if self == Comparison.GE:
            return probability >= p_sat
        return probability > p_sat


class ModelFamily(models.TextChoices):
    BISTABLE_SWITCH = "bistable_switch", "Bistable switch"
    MONOTONE = "monotone", "Monotone map"
    LINEAR = "linear", "Linear"
    CUSTOM = "custom", "Custom decomposition"


class RefinementStrategy(models.TextChoices):
    SCORED = "scored", "Path-scored"
    ALL_UNDECIDED = "all_undecided", "All undecided (baseline)"


class CommandName(models.TextChoices):
    ABSTRACT = "abstract", "Abstract"
    VERIFY = "verify", "Verify"
    REFINE = "refine", "Refine"
    SIMULATE = "simulate", "Simulate"


class RunStatus(models.TextChoices):
    RUNNING = "running", "Running"
    SUCCEEDED = "succeeded", "Succeeded"
    CONVERGED = "converged", "Converged"
    MAX_ROUNDS = "max_rounds", "Round budget exhausted"
    MAX_CELLS = "max_cells", "Cell budget exhausted"
    STALLED = "stalled", "Stalled"
    FAILED = "failed", "Failed"


class VerificationRun(models.Model):
    """One invocation of a verification command, recorded with --record."""

    command = models.CharField(max_length=20, choices=CommandName.choices)
    config_path = models.CharField(max_length=500)
    out_dir = models.CharField(max_length=500, blank=True)
    seed = models.IntegerField(default=0)
    status = models.CharField(
        max_length=20, choices=RunStatus.choices, default=RunStatus.RUNNING
    )
    n_cells = models.PositiveIntegerField(null=True, blank=True)
    uncertain_volume = models.FloatField(
        null=True, blank=True, help_text="Fraction of the domain left undecided"
    )
    message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["status", "created_at"]),
        ]

    def __str__(self):
        return f"{self.command} {self.config_path} ({self.get_status_display()})"


class RefinementRound(models.Model):
    """Per-round progress of a refine run."""

    run = models.ForeignKey(
        VerificationRun, on_delete=models.CASCADE, related_name="rounds"
    )
    index = models.PositiveIntegerField()
    n_cells = models.PositiveIntegerField()
    uncertain_volume = models.FloatField()
    n_yes = models.PositiveIntegerField(default=0)
    n_no = models.PositiveIntegerField(default=0)
    n_undecided = models.PositiveIntegerField(default=0)
    elapsed_seconds = models.FloatField(default=0.0)
    soundness_violations = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ["run", "index"]
        constraints = [
            models.UniqueConstraint(
                fields=["run", "index"], name="unique_round_per_run"
            )
        ]

    def __str__(self):
        return f"round {self.index} of run {self.run_id}"
