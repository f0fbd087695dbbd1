# livekt_models/__init__.py
#
'''
The livekt_models package contains the predictor interface, the baselines, the
gradient boosted trees and the in-context MiniPFN model with its
synthetic pretraining
'''
try:
    from importlib import metadata
except ImportError:
    # Running on pre-3.8 Python; use importlib-metadata package
    import importlib_metadata as metadata

try:
    __version__ = metadata.version('LiveKT-Tools')
except metadata.PackageNotFoundError:
    __version__ = '0.0.0'
