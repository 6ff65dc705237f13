from setuptools import setup

setup(
    name='oscaudit',
    packages=['oscaudit'],
    description='Formula audit of three coupled time-dependent oscillators',
    version='1.0.0',
    keywords=['oscillators', 'eigenvalues', 'euler angles', 'normal modes'],
    python_requires='>=3.10',
    install_requires=['numpy>=1.24', 'scipy>=1.11', 'toml', 'openpyxl'],
    extras_require={'test': ['pytest', 'hypothesis']},
    include_package_data=False,
    package_data={'oscaudit': ['defaults.toml']},
    entry_points={
        'console_scripts': [
            'oscaudit=oscaudit.cli:main',
        ]
    },
)
