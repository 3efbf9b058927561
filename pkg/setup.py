"""Setup configuration for the lidmed solver library."""
from setuptools import setup
from pathlib import Path

# Read README for long description
readme_file = Path(__file__).parent / "README.md"
long_description = readme_file.read_text(encoding="utf-8") if readme_file.exists() else ""

setup(
    name="lidmed",
    version="0.1.0",
    description="Medición óptima de error mínimo para ensambles linealmente independientes",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=["lidmed"],
    package_dir={"lidmed": "."},
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
    ],
    extras_require={
        "dev": [
            "pytest>=8.3.4",
            "hypothesis>=6.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "lidmed=lidmed.cli:main",
        ],
    },
    python_requires=">=3.8",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Development Status :: 4 - Beta",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    keywords="quantum state discrimination povm pretty good measurement helstrom",
)
