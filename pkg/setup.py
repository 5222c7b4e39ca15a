#!/usr/bin/env python
from setuptools import setup

setup(
    name="txrpt",
    version="26.1.0",
    description="Region prompt tuning for scene-text detection, trained and served from Twisted",
    author="The TxRPT Developers",
    keywords=["text detection", "prompt tuning", "image-text matching", "twisted"],
    packages=["txrpt", "txrpt.utils", "txrpt.scripts"],
    install_requires=["twisted>=18.7", "numpy>=1.20", "opencv-python-headless", "Pillow"],
    entry_points={
        "console_scripts": ["rpt = txrpt.scripts.rpt:run"],
    },
    license="Apache License, Version 2.0",
    include_package_data=True,
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: POSIX",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Image Recognition"]
    )
