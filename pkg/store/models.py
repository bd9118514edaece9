from django.db import models


class ProfileIndex(models.Model):
    """
    Index row of one stored CTP.

    The profile itself stays in the store's JSONL file; `offset` and
    `length` locate its line.
    """

    DIRECTION_CHOICES = [("UP", "UP"), ("DOWN", "DOWN")]

    profile_id = models.CharField(max_length=16, unique=True)
    source_trace = models.CharField(max_length=255, blank=True, default="")
    prefix = models.CharField(max_length=18)
    direction = models.CharField(max_length=4, choices=DIRECTION_CHOICES, db_index=True)
    window_start_s = models.FloatField()
    window_duration_s = models.FloatField(db_index=True)
    bin_width_ms = models.IntegerField()

    # Indexed attributes
    mean_throughput_bps = models.FloatField(db_index=True)
    max_throughput_bps = models.FloatField(db_index=True)
    pmr = models.FloatField(db_index=True)
    pmr95 = models.FloatField(db_index=True)
    cov = models.FloatField(db_index=True)
    host_count = models.IntegerField(db_index=True)
    flow_count = models.IntegerField(db_index=True)
    asymmetry = models.FloatField(db_index=True)
    toggle_count = models.IntegerField(db_index=True)

    # Location in the JSONL
    offset = models.BigIntegerField()
    length = models.IntegerField()

    class Meta:
        app_label = "store"
        db_table = "profile_index"

    def __str__(self):
        return f"{self.profile_id} {self.prefix} {self.direction}"


class StoreState(models.Model):
    """
    Which JSONL generation the committed index rows point into.

    One row per store. `data_file` is a name relative to the store's
    directory.
    """

    generation = models.IntegerField(default=0)
    data_file = models.CharField(max_length=255)

    class Meta:
        app_label = "store"
        db_table = "store_state"

    def __str__(self):
        return f"{self.data_file} (generation {self.generation})"
