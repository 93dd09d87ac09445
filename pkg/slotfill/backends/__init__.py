from slotfill.backends.base import Completion, CompletionBackend, CompletionRequest, truncate_at_stop

__all__ = ["Completion", "CompletionBackend", "CompletionRequest", "truncate_at_stop"]
