# test/unit/livekt_aws/__init__.py
#

'''
This package contains modules for unit testing the livekt_aws subpackage
of the LiveKT-Tools package
'''
