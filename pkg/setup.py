from pathlib import Path

from setuptools import find_packages, setup

requirements = [
    line.strip()
    for line in Path(__file__).with_name("requirements.txt").read_text().splitlines()
    if line.strip() and not line.startswith("#")
    and not line.startswith(("pytest", "black", "flake8", "mypy"))
]

setup(
    name="romschwarz",
    version="0.1.0",
    description="Reduced Schwarz domain decomposition with a POD + neural trace map",
    packages=find_packages(include=["hub", "helpers", "numerics", "rom", "experiments"]),
    python_requires=">=3.9",
    install_requires=requirements,
    entry_points={"console_scripts": ["romschwarz=hub.cli:main"]},
)
