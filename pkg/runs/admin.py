# =============================================================================
# SIMULATION RUN ADMIN
# =============================================================================

from django.contrib import admin
from unfold.admin import ModelAdmin

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(ModelAdmin):
    list_display = ['id', 'command', 'backend', 'preset', 'status', 'exit_code', 'points', 'created_at']
    list_filter = ['backend', 'status', 'command']
    search_fields = ['preset', 'output_dir', 'message']
    readonly_fields = ['config', 'files', 'created_at', 'finished_at']
