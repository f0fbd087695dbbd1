# test/unit/__init__.py
#

'''
This package contains modules for unit testing the LiveKT-Tools package
'''
