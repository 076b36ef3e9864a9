from setuptools import setup, find_packages

# Read requirements
with open('requirements.txt') as f:
    required = [line for line in f.read().splitlines() if line and not line.startswith(('pytest', 'hypothesis'))]

# Read README for long description
with open('README.md', 'r', encoding='utf-8') as f:
    long_description = f.read()

setup(
    name="urban-change-agent",
    version="1.0.0",
    description="A tool-augmented language agent answering what / where / why questions about urban environment change",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["main"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: GIS",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Natural Language :: English",
    ],
    python_requires=">=3.11.9",
    install_requires=required,
    entry_points={
        'console_scripts': [
            'urban-agent=main:main',
        ],
    },
    include_package_data=True,
    package_data={
        '': ['*.json', '*.toml', '*.txt'],
    },
    extras_require={
        'dev': [
            'pytest>=8.0',
            'hypothesis>=6.100',
            'pytest-cov>=2.0',
        ],
    },
)
