from setuptools import setup, find_packages

setup(
    name="qbsc-mcs",
    version="0.1.0",
    description="Bit string commitment with polarization of mesoscopic coherent states",
    python_requires=">=3.8",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["qbsc"],
    install_requires=[
        "numpy>=1.22",
        "pyyaml>=6.0.1",
        "jinja2>=3.1.2",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": [
            "qbsc=qbsc:main",
        ],
    },
)
