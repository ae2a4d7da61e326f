"""Joint body/body-part detection engine.

Python interface to the C++ core: synthetic scene generation, ground-truth
grid assignment, multi-task losses, grid decoding with body-part association,
and detection metrics.
"""

from ._core import (  # noqa: F401
    Anchor,
    AssignConfig,
    AssignResult,
    AssignStats,
    AssociatedDetection,
    AssociatedPart,
    AssociationMode,
    BodyAnnotation,
    Box,
    ChannelLayout,
    DataError,
    DecodeConfig,
    DetectionRecord,
    EvalConfig,
    GridDump,
    GridSpec,
    GridTensor,
    LossConfig,
    LossReport,
    MatchProtocol,
    NoiseModel,
    ObjTargetMode,
    PairScoreMode,
    PartAnnotation,
    PartLayout,
    Scene,
    SlotModel,
    StrideLoss,
    SynthConfig,
    UnassociatedPart,
    Variant,
    assign,
    assign_batch,
    channel_layout,
    compute_losses,
    decode_batch,
    decode_image,
    detections_from_ndjson,
    evaluate_json,
    gen_scene,
    gen_scenes,
    gen_scenes_parallel,
    identity_prediction,
    inner_iou,
    iou,
    loss_report_json,
    read_detections,
    read_grid_dump,
    read_scenes,
    read_spec,
    render_predicted,
    resolve_workers,
    scenes_from_ndjson,
    write_detections,
    write_grid_dump,
    write_scenes,
    write_spec,
)

__version__ = "0.1.0"
