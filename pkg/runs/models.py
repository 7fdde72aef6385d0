from django.db import models


# =============================================================================
# RUN REGISTRY
# =============================================================================

class SimulationRun(models.Model):
    # What was run
    command = models.CharField(
        max_length=20,
        choices=[
            ('steady-sweep', 'Steady-state sweep'),
            ('g2', 'Photon correlation g2'),
            ('pulse', 'Superradiant pulse'),
            ('spectrum', 'Emission spectrum'),
            ('dicke-map', 'Dicke population map'),
        ],
    )
    backend = models.CharField(
        max_length=20,
        choices=[('exact', 'Exact product space'), ('dicke', 'Dicke'), ('meanfield', 'Mean field')],
    )
    preset = models.CharField(max_length=100, blank=True)
    config = models.JSONField(default=dict)

    # Outcome
    status = models.CharField(
        max_length=20,
        choices=[
            ('pending', 'Pending'),
            ('running', 'Running'),
            ('completed', 'Completed'),
            ('failed', 'Failed'),
        ],
        default='pending',
    )
    exit_code = models.IntegerField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    files = models.JSONField(default=list, blank=True)
    points = models.PositiveIntegerField(default=1)
    message = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'simulation_runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} [{self.backend}] {self.status}"

    @property
    def duration(self):
        if self.finished_at and self.created_at:
            return (self.finished_at - self.created_at).total_seconds()
        return None
