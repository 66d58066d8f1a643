import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="nph2ph",
    version="0.1.0",
    description="Non-proportional hazards re-expressed as proportional hazards "
                "for two-arm survival trials",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    include_package_data=True,
    package_data={'': ['*.toml', '*.json', 'standins/*.json']},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.8',
    install_requires=[
        "joblib>=1.1",
        "jsonschema>=4.0",
        "matplotlib>=3.5",
        "numpy>=1.21",
        "pandas>=1.3",
        "scipy>=1.7",
        "toml>=0.10.2",
        "typer>=0.4",
    ],
    extras_require={
        "test": ["pytest>=7.0", "lifelines>=0.27"],
        "dev": ["pytest>=7.0", "lifelines>=0.27"],
    },
    entry_points={
        "console_scripts": ["nph2ph=nph2ph.cli:app"],
    },
)
