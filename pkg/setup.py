from setuptools import setup, find_packages

setup(
    name='freeconv',
    version='0.1',
    packages=find_packages(exclude=['tests']),
    install_requires=['numpy', 'scipy', 'python-dotenv'],
    entry_points={
        'console_scripts': ['freeconv = freeconv.cli:main'],
    },
)
