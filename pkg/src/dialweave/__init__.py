"""Human-in-the-loop dialogue generation with entity-centric state tracking."""

__version__ = "0.1.0"

from .errors import (
    BackendError,
    ContextOverflowError,
    DialweaveError,
    GenerationError,
    InconsistencyError,
    NotFoundError,
    ParameterError,
    ParseError,
    ScriptExhaustedError,
    StaleReferenceError,
    StateError,
    ValidationError,
)
from .ontology import Ontology, Triplet, builtin_ontology, load_ontology, sample_triplets
from .dialogue import (
    RoleMap,
    SpanAnnotation,
    Subdialogue,
    Turn,
    detect_termination,
    parse_subdialogue,
    render_subdialogue,
)
from .state import (
    Resolution,
    SlotFill,
    StateChangeCommand,
    StateSnapshot,
    TurnUpdate,
    apply_state_change,
    apply_tlb,
    diff,
    replay_cb_sequence,
)
from .document import DialogueDocument, build_state_change_examples
from .metrics import (
    DialoguePrediction,
    ScoreReport,
    align_and_score,
    evaluate_corpus,
    inter_annotator_agreement,
    value_score,
)
from .scenario import PromptBundle, ScenarioSpec, build_generation_prompt, sample_scenario
from .backend import CompletionRequest, MockBackend, RemoteBackend, complete
from .session import ConflictPrompt, Session, generate_story, generate_subdialogue
from .store import SessionStore
from .corpus import (
    Corpus,
    anonymize_corpus,
    compute_stats,
    load_corpus,
    save_corpus,
    split_corpus,
    split_sizes,
)

__all__ = [name for name in dir() if not name.startswith("_")]
