"""Reference worker process for the mask-diffusion decoding protocol.

Standalone on purpose: this package depends only on the standard library
and talks to the decoding engine exclusively through newline-delimited
JSON frames, so it doubles as the conformance target for any other worker
implementation. The built-in model is a seeded stub; real checkpoints
plug in behind the adapter in ``checkpoint``.
"""

from .checkpoint import CheckpointModel, load_checkpoint
from .frames import PROTOCOL_VERSION, encode_frame
from .server import WorkerConfig, serve
from .stub import stub_predict

__version__ = "0.1.0"

__all__ = [
    "CheckpointModel",
    "PROTOCOL_VERSION",
    "WorkerConfig",
    "encode_frame",
    "load_checkpoint",
    "serve",
    "stub_predict",
]
