"""Setup script for the quantized massive MIMO library."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="quantized-mimo",
    version="1.0.0",
    description="RZF precoding analysis and simulation for massive MIMO downlinks with low-resolution DACs and ADCs",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "PyYAML>=6.0",
    ],
    entry_points={
        "console_scripts": [
            "quantized-mimo=quantized_mimo.cli:main",
        ],
    },
)
