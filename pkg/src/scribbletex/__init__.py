"""Scribble-driven texture editing for UV-mapped triangle meshes.

Paint colored strokes on rendered views of a textured mesh; a vision-chat
backend predicts what texture the strokes mean, an image backend produces
matching material, and placement math plus multi-view inpainting composite
the result into the texture atlas.  All model backends are pluggable and
ship with deterministic offline mocks.
"""

from .errors import (AuthFailure, BackendError, BackendTimeout, CorruptImage,
                     EmptyMask, EmptyPrompt, EmptyScribble, InpaintBackendError,
                     MalformedResponse, MeshLoadError, MissingUVs,
                     MultiAtlasUnsupported, NoCandidate, NonTriangleFace,
                     OverlappingRegions, PatchLargerThanRegion,
                     ScribbleTexError, SegmentationBackendError)
from .geometry import TexturedMesh, compute_islands, load_mesh, save_mesh
from .render import (RenderMode, ViewFrame, ViewSpec, coverage_views,
                     intent_views, render)
from .scribble import ScribbleRegion, Stroke, dominant_color, rasterize_strokes
from .maskmap import (RefinementTrace, bypass_refinement, refine_region,
                      screen_to_texel, texel_to_screen)
from .backends import (BackendConfig, ChatRequest, GenImageRequest,
                       InpaintRequest, SegmentRequest, Transcript, chat,
                       generate_images, inpaint, segment)
from .intent import (GlobalPrompt, IntentPrediction, PatchChoice, choose_patch,
                     evaluate_intent_accuracy, exhaustive_patch_search,
                     make_global_prompts, predict_intent)
from .texturing import (PlacementPlan, TexturePatch, integrate, plan_placement,
                        stamp_patches)
from .pipeline import (PipelineConfig, Session, export_session, run_edit,
                       run_multi)

__version__ = "0.1.0"
