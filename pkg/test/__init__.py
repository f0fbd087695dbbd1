# test/__init__.py
#

'''
This package contains modules for testing the LiveKT-Tools package
'''
