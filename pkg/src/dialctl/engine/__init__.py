from .entities import EntityMention, Gazetteer, extract_entities, parse_markup, render_markup
from .actions import ActionTemplate, mask_and_renormalize, select_action, MaskError
from .features import FeatureLayout, assemble_features
from .core import (
    Domain,
    DomainError,
    DialogState,
    TurnRecord,
    ExecutedAction,
    Dialog,
    DialogEngine,
    run_dialog,
    HANG_UP,
)
from .corpus import (
    CorpusDialog,
    CorpusTurn,
    CorpusError,
    parse_corpus,
    serialize_corpus,
    load_corpus,
    save_corpus,
    corpus_stats,
    CompiledDialog,
    compile_dialog,
    compile_corpus,
)

__all__ = [
    "EntityMention",
    "Gazetteer",
    "extract_entities",
    "parse_markup",
    "render_markup",
    "ActionTemplate",
    "mask_and_renormalize",
    "select_action",
    "MaskError",
    "FeatureLayout",
    "assemble_features",
    "Domain",
    "DomainError",
    "DialogState",
    "TurnRecord",
    "ExecutedAction",
    "Dialog",
    "DialogEngine",
    "run_dialog",
    "HANG_UP",
    "CorpusDialog",
    "CorpusTurn",
    "CorpusError",
    "parse_corpus",
    "serialize_corpus",
    "load_corpus",
    "save_corpus",
    "corpus_stats",
    "CompiledDialog",
    "compile_dialog",
    "compile_corpus",
]
