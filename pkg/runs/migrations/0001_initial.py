# Generated by Django 4.2.7 on 2026-10-12 09:14

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('is_active', models.BooleanField(default=True)),
                ('command', models.CharField(choices=[('specs_fit', 'Fit'), ('specs_nowcast_eval', 'Rolling nowcast evaluation'), ('specs_simulate', 'Monte Carlo simulation')], max_length=40)),
                ('config_digest', models.CharField(db_index=True, max_length=64)),
                ('options', models.JSONField(default=dict)),
                ('seed_ledger', models.JSONField(default=dict)),
                ('software_version', models.CharField(max_length=20)),
                ('wall_clock_seconds', models.FloatField(default=0.0)),
                ('stage_timings', models.JSONField(default=dict)),
                ('output_path', models.CharField(blank=True, max_length=500)),
                ('exit_code', models.PositiveSmallIntegerField(default=0)),
            ],
            options={
                'verbose_name': 'Run Manifest',
                'verbose_name_plural': 'Run Manifests',
                'ordering': ['-created_at'],
            },
        ),
    ]
