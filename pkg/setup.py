#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""The setup script."""

from setuptools import setup, find_packages

with open('README.rst') as readme_file:
    readme = readme_file.read()

with open('HISTORY.rst') as history_file:
    history = history_file.read()

requirements = [
    'numpy>=1.17',
    'colorful>=0.4.0',
    'Pygments>=2.2.0',
]

setup_requirements = [
    'pytest-runner>=3.0',
]

test_requirements = [
    'pytest>=4.3.0',
    'hypothesis>=3.33.0',
]

setup(
    name='slidecompress',
    version='0.1.0',
    description="Token-compressed visual question answering on synthetic whole-slide images",
    long_description=readme + '\n\n' + history,
    author="slidecompress developers",
    packages=find_packages(include=['slidecompress']),
    include_package_data=True,
    install_requires=requirements,
    license="MIT license",
    zip_safe=False,
    keywords='slidecompress',
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
    ],
    entry_points={
        'console_scripts': [
            'slidecompress=slidecompress.cli:main',
        ],
    },
    test_suite='tests',
    tests_require=test_requirements,
    setup_requires=setup_requirements,
)
