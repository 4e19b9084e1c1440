"""Rule-bottleneck reinforcement learning.

An attention-based policy selects one of several candidate decision rules at
every step; the selected rule drives both the environment action and a
natural-language explanation, and a judge's rule score is added to the
environment reward for training with discrete soft actor-critic. This
package wraps the C++ core: the allocation environments, the language
gateway with its scripted backend, embeddings, the trainer, the full agent
loop, and replay verification.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
