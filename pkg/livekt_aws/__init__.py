# livekt_aws/__init__.py
#
'''
The livekt_aws package contains utilities to publish experiment results
to an AWS S3 bucket
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
