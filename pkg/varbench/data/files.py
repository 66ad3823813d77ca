"""
Location of data files
======================

Use as ::

    from varbench.data.files import *

"""

__all__ = [
    "MINI_SPL",  # bundled mini product line
    "FEATURE_EFFECTS_CONFIG",  # code + build models, FeatureEffects
    "DEAD_BLOCKS_CONFIG",  # code + build + variability model, DeadBlocks
    "METRICS_CONFIG",  # code model only, BlockMetrics
]

from importlib import resources

_data_ref = resources.files('varbench.data') / 'mini-spl'

MINI_SPL = _data_ref.as_posix() if hasattr(_data_ref, 'as_posix') \
    else str(_data_ref)
FEATURE_EFFECTS_CONFIG = f'{MINI_SPL}/feature_effects.properties'
DEAD_BLOCKS_CONFIG = f'{MINI_SPL}/dead_blocks.properties'
METRICS_CONFIG = f'{MINI_SPL}/metrics.properties'

del resources
