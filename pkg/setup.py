""" Setup script for PythonDDRO

"""
from setuptools import setup, find_packages

setup(
    # name is defined in pyproject.toml
    description="Discrete distributionally robust optimization over weighted L2 and density-ratio balls",
    long_description="""PythonDDRO solves discrete distributionally robust
    optimization problems through smooth convex dual reformulations, checks
    them against mean+std, CVaR and worst-C-costs formulations, and applies
    them to robust patrol-agent design on graphs.""",
    license="MIT",
    # version set dynamically using setuptools_scm (via pyproject.toml)
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    keywords="distributionally robust optimization cvar markov chain patrol",
    packages=find_packages(exclude=['test']),
    package_data={"pythonddro": ["presets/*.json"]},
    install_requires=['colorama', 'numpy', 'scipy', 'pandas'],
    entry_points={"console_scripts": ["ddro = pythonddro.cli:main"]},
    include_package_data=True,
)
