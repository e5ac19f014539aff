from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('bench', 'Bench'), ('ablate', 'Ablation'), ('crossmodel', 'Cross-model')], default='bench', max_length=20)),
                ('master_seed', models.BigIntegerField(default=0)),
                ('generator_seed', models.BigIntegerField()),
                ('hidden_width', models.PositiveIntegerField()),
                ('message_mode', models.CharField(choices=[('random', 'Random'), ('midpoint', 'Midpoint')], default='random', max_length=20)),
                ('trials', models.PositiveIntegerField()),
                ('channels', models.JSONField(default=list)),
                ('steps', models.JSONField(default=list)),
                ('optimizer_hash', models.CharField(max_length=64)),
                ('spec', models.JSONField(default=dict)),
                ('schema_version', models.PositiveIntegerField(default=1)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['kind'], name='harness_run_kind_idx'), models.Index(fields=['generator_seed'], name='harness_run_genseed_idx')],
            },
        ),
        migrations.CreateModel(
            name='ResultRow',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('channel', models.CharField(max_length=50)),
                ('steps', models.PositiveIntegerField()),
                ('mean_accuracy', models.FloatField()),
                ('std_accuracy', models.FloatField()),
                ('trials', models.PositiveIntegerField()),
                ('mean_gain', models.FloatField()),
                ('gain_percent', models.FloatField()),
                ('gain_pvalue', models.FloatField()),
                ('mean_recon', models.FloatField()),
                ('severity_rank', models.PositiveIntegerField(default=0)),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='rows', to='harness.experimentrun')),
            ],
            options={
                'ordering': ['severity_rank', 'channel', 'steps'],
                'indexes': [models.Index(fields=['channel', 'steps'], name='harness_row_chan_steps_idx')],
            },
        ),
    ]
