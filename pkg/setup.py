from setuptools import setup, find_packages
setup(
    name="parataa",
    version="1.0.0",
    packages=find_packages(include=["parataa", "parataa.*"]),
    python_requires=">=3.8",
    install_requires=["numpy>=1.20", "scipy>=1.7"],
    extras_require={"test": ["pytest>=7"]},
    entry_points={"console_scripts": ["parataa=parataa.main:main"]},
)
