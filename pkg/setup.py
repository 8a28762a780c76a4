# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

from setuptools import setup, find_packages
from os import path
from io import open

here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()


setup(name='gradflow', version='0.1.0',
      packages=find_packages(exclude=['tests']),
      include_package_data=True,
      scripts=['gradflow/experiment/scripts/gradflow_cli.py'],
      python_requires='>=3.7',
      install_requires=['numpy>=1.17', 'scipy>=1.4', 'networkx>=2.4'],
      extras_require={'tests': ['pytest']},
      # metadata
      author="gradflow developers",
      description="gradflow: continuous-time proportional-integral distributed optimization",
      license="CeCILL-B",
      keywords="distributed optimization consensus dual decomposition PI control multi-agent",
      long_description_content_type='text/x-rst',
      long_description=long_description,
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Intended Audience :: Science/Research',
          'Topic :: Scientific/Engineering :: Mathematics',
          'License :: CeCILL-B Free Software License Agreement (CECILL-B)',
          'Programming Language :: Python :: 3 :: Only',
      ],
      )
