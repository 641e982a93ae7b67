from django.contrib import admin
from django.utils.html import format_html

from .models import RefinementRound, RunStatus, VerificationRun

STATUS_COLORS = {
    RunStatus.RUNNING: "#17a2b8",
    RunStatus.SUCCEEDED: "#28a745",
    RunStatus.CONVERGED: "#28a745",
    RunStatus.MAX_ROUNDS: "#ffc107",
    RunStatus.MAX_CELLS: "#ffc107",
    RunStatus.STALLED: "#ffc107",
    RunStatus.FAILED: "#dc3545",
}


class RefinementRoundInline(admin.TabularInline):
    model = RefinementRound
    extra = 0
    can_delete = False
    readonly_fields = [
        "index",
        "n_cells",
        "uncertain_volume",
        "n_yes",
        "n_no",
        "n_undecided",
        "elapsed_seconds",
        "soundness_violations",
    ]


@admin.register(VerificationRun)
class VerificationRunAdmin(admin.ModelAdmin):
    list_display = [
        "command",
        "config_path",
        "status_badge",
        "n_cells",
        "uncertain_volume",
        "seed",
        "created_at",
    ]
    list_filter = ["command", "status", "created_at"]
    search_fields = ["config_path", "out_dir", "message"]
    readonly_fields = ["created_at", "finished_at"]
    inlines = [RefinementRoundInline]
    date_hierarchy = "created_at"

    fieldsets = (
        (None, {"fields": ("command", "config_path", "out_dir", "seed")}),
        ("Outcome", {"fields": ("status", "n_cells", "uncertain_volume", "message")}),
        ("Timing", {"fields": ("created_at", "finished_at")}),
    )

    def status_badge(self, obj):
        return format_html(
            '<span style="background-color: {}; color: white; padding: 3px 8px; '
            'border-radius: 3px;">{}</span>',
            STATUS_COLORS.get(obj.status, "#6c757d"),
            obj.get_status_display(),
        )

    status_badge.short_description = "Status"


@admin.register(RefinementRound)
class RefinementRoundAdmin(admin.ModelAdmin):
    list_display = ["run", "index", "n_cells", "uncertain_volume", "n_undecided"]
    list_filter = ["run__command"]
    ordering = ["run", "index"]
