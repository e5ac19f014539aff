from django.db import models


class ExperimentRun(models.Model):
    KIND_CHOICES = [
        ('bench', 'Bench'),
        ('ablate', 'Ablation'),
        ('crossmodel', 'Cross-model'),
    ]

    MODE_CHOICES = [
        ('random', 'Random'),
        ('midpoint', 'Midpoint'),
    ]

    kind = models.CharField(max_length=20, choices=KIND_CHOICES, default='bench')
    master_seed = models.BigIntegerField(default=0)
    generator_seed = models.BigIntegerField()
    hidden_width = models.PositiveIntegerField()
    message_mode = models.CharField(max_length=20, choices=MODE_CHOICES, default='random')
    trials = models.PositiveIntegerField()
    channels = models.JSONField(default=list)
    steps = models.JSONField(default=list)
    optimizer_hash = models.CharField(max_length=64)
    spec = models.JSONField(default=dict)
    schema_version = models.PositiveIntegerField(default=1)
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['kind'], name='harness_run_kind_idx'),
            models.Index(fields=['generator_seed'], name='harness_run_genseed_idx'),
        ]

    def __str__(self):
        return f"{self.get_kind_display()} seed={self.generator_seed} ({self.trials} trials)"


class ResultRow(models.Model):
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='rows', null=True, blank=True)
    channel = models.CharField(max_length=50)
    steps = models.PositiveIntegerField()
    mean_accuracy = models.FloatField()
    std_accuracy = models.FloatField()
    trials = models.PositiveIntegerField()
    mean_gain = models.FloatField()
    gain_percent = models.FloatField()
    gain_pvalue = models.FloatField()
    mean_recon = models.FloatField()
    severity_rank = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ['severity_rank', 'channel', 'steps']
        indexes = [
            models.Index(fields=['channel', 'steps'], name='harness_row_chan_steps_idx'),
        ]

    def __str__(self):
        return f"{self.channel} @ {self.steps} steps: {self.mean_accuracy:.4f}"
