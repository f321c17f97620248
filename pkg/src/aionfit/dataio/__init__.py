"""File formats, filtering, mesh export, packaging and synthetic scenarios."""

from .filtering import filter_by_face_confidence
from .formats import (
    CAMERAS_VERSION,
    CONFIG_VERSION,
    DETECTIONS_VERSION,
    JOINTMAP_VERSION,
    MODEL_VERSION,
    RESULTS_VERSION,
    DetectionFile,
    NamedJointMap,
    ResultBundle,
    cameras_from_dict,
    cameras_to_dict,
    canonical_json,
    config_from_dict,
    config_to_dict,
    detections_from_dict,
    detections_to_dict,
    jointmap_from_dict,
    jointmap_to_dict,
    load_cameras,
    load_config,
    load_detections,
    load_jointmap,
    load_model,
    load_results,
    model_content_hash,
    model_from_dict,
    model_to_dict,
    results_from_dict,
    results_to_dict,
    save_cameras,
    save_config,
    save_detections,
    save_jointmap,
    save_model,
    save_results,
)
from .objio import export_obj, obj_text
from .package import (
    DEFAULT_LICENSE_NOTE,
    PACKAGE_VERSION,
    DatasetPackage,
    build_package,
    load_package,
    package_dataset,
    verify_package,
    write_package,
)
from .synth import (
    DEFAULT_INTRINSICS,
    SynthResult,
    SynthScenario,
    default_jointmap,
    make_toy_humanoid,
    synth_generate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
