# Generated by Django 5.2.6 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('steady-sweep', 'Steady-state sweep'), ('g2', 'Photon correlation g2'), ('pulse', 'Superradiant pulse'), ('spectrum', 'Emission spectrum'), ('dicke-map', 'Dicke population map')], max_length=20)),
                ('backend', models.CharField(choices=[('exact', 'Exact product space'), ('dicke', 'Dicke'), ('meanfield', 'Mean field')], max_length=20)),
                ('preset', models.CharField(blank=True, max_length=100)),
                ('config', models.JSONField(default=dict)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='pending', max_length=20)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('files', models.JSONField(blank=True, default=list)),
                ('points', models.PositiveIntegerField(default=1)),
                ('message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'simulation_runs',
                'ordering': ['-created_at'],
            },
        ),
    ]
