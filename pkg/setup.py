#!/usr/bin/env python
#
# LiveKT-Tools/setup.py
#

'''
This is the setup.py installation script to install the livekt
packages
'''

# Import packages
from setuptools import find_packages, setup

# Use setuptools' setup function to install the package
setup(name='LiveKT-Tools',
      version='0.1.0',
      description='Live knowledge tracing: tabular encoding, streaming '
                  'evaluation and an in-context two-way attention predictor',
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Intended Audience :: Science/Research',
          'Programming Language :: Python :: 3'
      ],
      packages=find_packages(exclude=['test*']),
      python_requires='>=3.7',
      install_requires=[
          'numpy',
          'scipy',
          'scikit-learn',
          'matplotlib',
          'tqdm',
          'botocore',
          'boto3',
          'importlib-metadata ~= 1.0 ; python_version < "3.8"'],
      entry_points={
          'console_scripts': ['livekt=livekt_eval.cli:main']})
