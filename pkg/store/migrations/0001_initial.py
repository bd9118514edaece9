from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ProfileIndex",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("profile_id", models.CharField(max_length=16, unique=True)),
                ("source_trace", models.CharField(blank=True, default="", max_length=255)),
                ("prefix", models.CharField(max_length=18)),
                (
                    "direction",
                    models.CharField(choices=[("UP", "UP"), ("DOWN", "DOWN")], db_index=True, max_length=4),
                ),
                ("window_start_s", models.FloatField()),
                ("window_duration_s", models.FloatField(db_index=True)),
                ("bin_width_ms", models.IntegerField()),
                ("mean_throughput_bps", models.FloatField(db_index=True)),
                ("max_throughput_bps", models.FloatField(db_index=True)),
                ("pmr", models.FloatField(db_index=True)),
                ("pmr95", models.FloatField(db_index=True)),
                ("cov", models.FloatField(db_index=True)),
                ("host_count", models.IntegerField(db_index=True)),
                ("flow_count", models.IntegerField(db_index=True)),
                ("asymmetry", models.FloatField(db_index=True)),
                ("toggle_count", models.IntegerField(db_index=True)),
                ("offset", models.BigIntegerField()),
                ("length", models.IntegerField()),
            ],
            options={
                "db_table": "profile_index",
            },
        ),
    ]
