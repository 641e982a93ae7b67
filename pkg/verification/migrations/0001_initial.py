# Generated by Django 4.2.28 on 2026-10-18 09:14

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="VerificationRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("abstract", "Abstract"),
                            ("verify", "Verify"),
                            ("refine", "Refine"),
                            ("simulate", "Simulate"),
                        ],
                        max_length=20,
                    ),
                ),
                ("config_path", models.CharField(max_length=500)),
                ("out_dir", models.CharField(blank=True, max_length=500)),
                ("seed", models.IntegerField(default=0)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("succeeded", "Succeeded"),
                            ("converged", "Converged"),
                            ("max_rounds", "Round budget exhausted"),
                            ("max_cells", "Cell budget exhausted"),
                            ("stalled", "Stalled"),
                            ("failed", "Failed"),
                        ],
                        default="running",
                        max_length=20,
                    ),
                ),
                ("n_cells", models.PositiveIntegerField(blank=True, null=True)),
                (
                    "uncertain_volume",
                    models.FloatField(
                        blank=True,
                        help_text="Fraction of the domain left undecided",
                        null=True,
                    ),
                ),
                ("message", models.TextField(blank=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "ordering": ["-created_at"],
                "indexes": [
                    models.Index(
                        fields=["status", "created_at"],
                        name="verificatio_status_38af3b_idx",
                    )
                ],
            },
        ),
        migrations.CreateModel(
            name="RefinementRound",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("index", models.PositiveIntegerField()),
                ("n_cells", models.PositiveIntegerField()),
                ("uncertain_volume", models.FloatField()),
                ("n_yes", models.PositiveIntegerField(default=0)),
                ("n_no", models.PositiveIntegerField(default=0)),
                ("n_undecided", models.PositiveIntegerField(default=0)),
                ("elapsed_seconds", models.FloatField(default=0.0)),
                ("soundness_violations", models.PositiveIntegerField(default=0)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="rounds",
                        to="verification.verificationrun",
                    ),
                ),
            ],
            options={
                "ordering": ["run", "index"],
            },
        ),
        migrations.AddConstraint(
            model_name="refinementround",
            constraint=models.UniqueConstraint(
                fields=("run", "index"), name="unique_round_per_run"
            ),
        ),
    ]
