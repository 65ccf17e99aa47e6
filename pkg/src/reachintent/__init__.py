"""Intent inference for shared-workspace reaching.

A kinematic simulator of human reaching, a neural surrogate of it, prior
construction from scene and gaze cues, ABC-style posterior inference over
a workspace grid, a task-level collaboration simulator, and a streaming
inference service.
"""

__version__ = "0.1.0"
