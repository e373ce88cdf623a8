from setuptools import setup, find_packages

setup(
    name='hazsurf',  # Package name
    version='0.1.0',  # Version of your package

    description='Smooth hazard surfaces over two time scales with tensor-product P-splines',  # Short description
    long_description=open('README.md').read(),  # Long description from a README file
    long_description_content_type='text/markdown',  # Type of the long description

    packages=find_packages(exclude=['examples', 'examples.*']),  # Automatically find packages in the directory
    package_data={'hazsurf.real_life_samples.rotterdam': ['*.json', '*.md']},
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'matplotlib',
        'prefect>=3',
        'python-dotenv',
    ],
    extras_require={'dev': ['pytest']},
    entry_points={'console_scripts': ['hazsurf=hazsurf.cli:main']},
    classifiers=[
        'Development Status :: 3 - Alpha',  # Development status
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',  # License as you choose
        'Programming Language :: Python :: 3',  # Supported Python versions
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.9',  # Minimum version requirement of Python
)
