"""Probing toolkit for concept lock-in along diffusion denoising trajectories.

Switch the text prompt mid-generation, score concept presence in the final
image, and estimate when along the trajectory a concept can still be
inserted or deleted, with full uncertainty quantification. The synthetic
backend and mock scorer make the whole pipeline verifiable at desk scale;
real models plug in through the backend and scorer wire contracts.
"""
from .backend import (
    Condition,
    GeneratedImage,
    LatentState,
    NoiseSchedule,
    PresenceRule,
    RemoteBackend,
    SyntheticBackend,
    SyntheticBackendSpec,
    cfg_combine,
    forward_diffuse,
    invert_to_x0,
    negative_guidance_combine,
)
from .editeval import (
    EditCase,
    EditReport,
    PlantedEmbeddingBackend,
    RECOMMENDED_PROBABILITY_BAND,
    REFERENCE_EDITING_ROWS,
    SyntheticEmbeddingBackend,
    clip_dir,
    clip_img,
    clip_txt,
    edit_at_probability,
    evaluate_edit,
    evaluate_suite,
    representative_curve,
)
from .intervene import (
    DELETION,
    INSERTION,
    InterventionPlan,
    RunRecord,
    run_cds,
    run_multi,
    run_pci,
    sweep,
)
from .manifest import ExperimentManifest, plan_experiment
from .score import MockScorer, MockScript, ScorerVerdict, assess, batch_assess, parse_answer
from .seedcontrol import (
    SeedPool,
    candidate_seeds,
    filter_seeds,
    presence_report,
    resample_with_negative_guidance,
    verify_pool,
)
from .stats import (
    BootstrapReport,
    CisCurve,
    CrossingSummary,
    OutcomeMatrix,
    aggregate,
    bootstrap_seed_budget,
    cds_curve,
    crossing_time,
    estimate_curve,
    wilson_interval,
)
from .store import ResultsStore
from .taxonomy import (
    ConceptEntry,
    MultiPromptPair,
    PromptPair,
    PromptVariantSet,
    Taxonomy,
    combine_pairs,
    enumerate_pairs,
    load_taxonomy,
    render_question,
    variant_set,
)
from .trajectory import TimestepGrid, build_grid, nearest_step, normalize

__version__ = "0.1.0"
