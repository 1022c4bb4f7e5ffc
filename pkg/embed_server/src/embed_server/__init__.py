"""HTTP microservice exposing a sentence encoder over a fixed JSON protocol."""

from .app import DEFAULT_MAX_BATCH, DEFAULT_MODEL, EmbedRequest, create_app
from .encoders import HashEncoder, SentenceTransformerEncoder, build_encoder

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAX_BATCH",
    "DEFAULT_MODEL",
    "EmbedRequest",
    "HashEncoder",
    "SentenceTransformerEncoder",
    "build_encoder",
    "create_app",
    "__version__",
]
