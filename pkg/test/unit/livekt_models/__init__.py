# test/unit/livekt_models/__init__.py
#

'''
This package contains modules for unit testing the livekt_models subpackage
of the LiveKT-Tools package
'''
