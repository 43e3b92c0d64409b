"""Parameter-privacy-preserving data sharing with particle beliefs.

Library layers, bottom to top:

* :mod:`privshare.gaussians`  - closed-form Gaussian divergences.
* :mod:`privshare.mixtures`   - policy-induced mixtures, entropy/MI bounds,
  Monte-Carlo reference estimators.
* :mod:`privshare.belief`     - weighted-particle posterior over (parameter, state).
* :mod:`privshare.platoon`    - mixed-autonomy platoon environment.
* :mod:`privshare.costs`      - per-step Lagrangian stage cost and episode objectives.
* :mod:`privshare.nets`       - from-scratch dense networks with manual backprop.
* :mod:`privshare.policy`     - Gaussian sharing policy, MGF belief encoder, critic.
* :mod:`privshare.training`   - DDPG trainer and replay machinery.
* :mod:`privshare.adversary`  - Bayesian inference attack and usability estimates.
* :mod:`privshare.episodes`   - closed-loop episode rollouts.
* :mod:`privshare.evaluation` - multi-episode evaluation and table export.
* :mod:`privshare.verify`     - independent oracles and certification suites.
* :mod:`privshare.cli`        - the ``privshare`` command line front end.
"""

from .belief import MgfFeatures, ParticleBelief
from .gaussians import GaussianComponent, bhattacharyya, chernoff_alpha, gaussian_entropy, kl_divergence
from .mixtures import Emission, MiBoundReport, PolicyMixture, mi_upper_bound

__all__ = [
    "Emission",
    "GaussianComponent",
    "MgfFeatures",
    "MiBoundReport",
    "ParticleBelief",
    "PolicyMixture",
    "bhattacharyya",
    "chernoff_alpha",
    "gaussian_entropy",
    "kl_divergence",
    "mi_upper_bound",
]

__version__ = "0.1.0"
