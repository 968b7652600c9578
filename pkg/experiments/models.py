from django.db import models


class ScenarioRun(models.Model):
    """
    One CLI invocation and its outcome.
    """
    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('processing', 'Processing'),
        ('completed', 'Completed'),
        ('refused', 'Refused'),
        ('failed', 'Failed'),
    ]

    MODE_CHOICES = [
        ('optimal', 'Optimal MPC'),
        ('tdmpc', 'TD-MPC'),
        ('dimsumpc', 'Dim-SuMPC'),
    ]

    command = models.CharField(max_length=40)
    preset = models.CharField(max_length=100, blank=True)
    mode = models.CharField(max_length=20, choices=MODE_CHOICES, blank=True)
    config = models.JSONField(default=dict, help_text='Validated scenario config')
    config_hash = models.CharField(max_length=64, db_index=True, help_text='sha256 of canonical JSON')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending')
    uncertified = models.BooleanField(default=False, help_text='Budgets below ell* were allowed')
    total_cost = models.FloatField(null=True, blank=True, help_text='J_T of the run')
    suboptimality = models.FloatField(null=True, blank=True, help_text='R = J_T - J_T*')
    summary = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = 'scenario_runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"ScenarioRun {self.id}: {self.command} {self.status}"


class CertificateRecord(models.Model):
    """
    Certificate report of one horizon within a run.
    """
    run = models.ForeignKey(ScenarioRun, on_delete=models.CASCADE, related_name='certificates')
    horizon = models.PositiveIntegerField()
    ell = models.PositiveIntegerField(null=True, blank=True)
    ell_star = models.FloatField()
    epsilon = models.FloatField(null=True, blank=True)
    report = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'certificate_records'
        ordering = ['run', '-horizon']
        unique_together = ['run', 'horizon']

    def __str__(self):
        return f"N={self.horizon} for run {self.run_id}"
