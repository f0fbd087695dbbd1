# livekt_data/__init__.py
#
'''
The livekt_data package contains the interaction log model, the tabular
encoding of student sequences and the binary container format
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
