from .models import ModelBundle, build_tiny, classifier_scores, generator_logits, load_pretrained
from .server import create_app

__version__ = "0.1.0"

__all__ = [
    "ModelBundle",
    "build_tiny",
    "classifier_scores",
    "create_app",
    "generator_logits",
    "load_pretrained",
]
