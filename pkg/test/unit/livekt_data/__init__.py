# test/unit/livekt_data/__init__.py
#

'''
This package contains modules for unit testing the livekt_data subpackage
of the LiveKT-Tools package
'''
