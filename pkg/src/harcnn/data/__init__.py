from .registry import (
    ACTIVITIES,
    COMPONENTS,
    CONFIGS,
    GROUPS,
    SAMPLE_RATE,
    SENSORS,
    ActivityGroup,
    SensorConfig,
    SensorId,
    applicable_configs,
    check_applicable,
    get_config,
    get_group,
    group_of,
)
from .recording import ImuRecording, ingest_csv, load_manifest, read_manifest, write_csv, write_manifest
from .windows import (
    STRIDE,
    WINDOW,
    Example,
    WindowDataset,
    build_dataset,
    class_percentages,
    segment_windows,
    stack_channels,
    unstack_channels,
    window_starts,
)
