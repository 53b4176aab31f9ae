"""Reference model server: a fine-tunable transformer text classifier behind
the /train, /predict_proba, /reset protocol."""

from .model import AdapterConfig, TextClassifier
from .server import app, create_app

__all__ = ["AdapterConfig", "TextClassifier", "app", "create_app"]
