"""modelshim: a minimal OpenAI-compatible model server with deterministic
built-in stand-in models (hashed-trigram sentence encoder, scripted chat).

It performs no retrieval and no reasoning; it is strictly a model server
that lets HTTP clients run end-to-end without hosted endpoints.
"""

from .app import ShimConfig, create_app
from .models import EchoChat, HashEncoder, ScriptedChat, load_chat_model, load_embed_model

__version__ = "0.1.0"
