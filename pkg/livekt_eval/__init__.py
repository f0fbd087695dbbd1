# livekt_eval/__init__.py
#
'''
The livekt_eval package contains the metrics, the live evaluation protocol,
reporting, scaling benchmarks and the command-line interface
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
