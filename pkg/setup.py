from setuptools import setup, find_packages

setup(
    name="category-invariant-adaptation",
    version="0.1.0",
    description="Category-invariant feature enhancement for adversarial domain adaptation",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=2.0.0",
        "click>=8.1.0",
        "rich>=13.0.0",
        "cachetools>=5.3.0",
    ],
    entry_points={
        "console_scripts": [
            "cife=cife.cli.main:cli",
        ],
    },
)
