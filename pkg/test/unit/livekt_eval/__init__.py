# test/unit/livekt_eval/__init__.py
#

'''
This package contains modules for unit testing the livekt_eval subpackage
of the LiveKT-Tools package
'''
