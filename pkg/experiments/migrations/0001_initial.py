# Generated by Django 4.2.25 on 2026-10-19 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ScenarioRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=40)),
                ('preset', models.CharField(blank=True, max_length=100)),
                ('mode', models.CharField(blank=True, choices=[('optimal', 'Optimal MPC'), ('tdmpc', 'TD-MPC'), ('dimsumpc', 'Dim-SuMPC')], max_length=20)),
                ('config', models.JSONField(default=dict, help_text='Validated scenario config')),
                ('config_hash', models.CharField(db_index=True, help_text='sha256 of canonical JSON', max_length=64)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('processing', 'Processing'), ('completed', 'Completed'), ('refused', 'Refused'), ('failed', 'Failed')], default='pending', max_length=20)),
                ('uncertified', models.BooleanField(default=False, help_text='Budgets below ell* were allowed')),
                ('total_cost', models.FloatField(blank=True, help_text='J_T of the run', null=True)),
                ('suboptimality', models.FloatField(blank=True, help_text='R = J_T - J_T*', null=True)),
                ('summary', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('error_message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('completed_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'scenario_runs',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='CertificateRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('horizon', models.PositiveIntegerField()),
                ('ell', models.PositiveIntegerField(blank=True, null=True)),
                ('ell_star', models.FloatField()),
                ('epsilon', models.FloatField(blank=True, null=True)),
                ('report', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='certificates', to='experiments.scenariorun')),
            ],
            options={
                'db_table': 'certificate_records',
                'ordering': ['run', '-horizon'],
                'unique_together': {('run', 'horizon')},
            },
        ),
    ]
