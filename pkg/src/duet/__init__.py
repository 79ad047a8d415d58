"""Two-agent interaction motion toolkit.

Learns windowed variational motion embeddings, a shared recurrent task
dynamics model over both agents, and a human-to-robot mapping, then serves
adaptive online robot-motion predictions.
"""

__version__ = "0.1.0"
