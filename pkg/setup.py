from setuptools import setup, find_packages
import textwrap

setup(
    name='rwglobal',
    version='0.0.1',
    description='Formal geometry, graph and master equation checks for globalized split Rozansky-Witten theory',
    long_description=textwrap.dedent("""\
         rwglobal: computable core of the globalized split Rozansky-Witten model

         rwglobal builds truncated jets of holomorphic symplectic geometry,
         the Grothendieck and Fedosov connections on them, the Feynman
         graphs which can appear in the boundary operator and the weight
         system of the bulk vertices, and checks the differential master
         equation of the split action on finite dg models of the source.

         Every identity is evaluated as a residual; the command line tool
         writes the residuals as JSON and text reports.
         """),
    packages=find_packages(exclude=["tests"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: BSD License",
        "Operating System :: Linux",
        "Operating System :: MacOS"
        ],
    install_requires = ["sympy", "numpy", "networkx", "pytest"],
    entry_points={"console_scripts": ["rwglobal=rwglobal.cli:main"]},
    python_requires=">= 3.9",
)
