from version import version
from setuptools import find_packages, setup
from pkg_resources import require, DistributionNotFound, parse_version


def check_provided(distribution, min_version, max_version=None, optional=False):
    """
    Checks that an installed distribution we do not install ourselves, typically Toil, is within
    the supported version range and returns its version.
    """
    min_version = parse_version(min_version)
    if max_version is not None:
        max_version = parse_version(max_version)
    messages = []
    supported = 'batchq requires %s %s or higher' % (distribution, min_version)
    supported += '.' if max_version is None else ', up to but not including %s.' % max_version
    try:
        installed_version = parse_version(require(distribution)[0].version)
    except DistributionNotFound:
        installed_version = None
        if not optional:
            messages.extend(['Cannot find an installed copy of %s.' % distribution, supported])
    else:
        if installed_version < min_version:
            messages.extend(['The installed copy of %s is out of date.' % distribution, supported])
        elif max_version is not None and max_version <= installed_version:
            messages.extend(['The installed copy of %s is too new.' % distribution, supported])
    if messages:
        messages.append("Setup doesn't install Toil automatically so that you can pick the extras for your "
                        "batch system. See http://toil.readthedocs.io/en/latest/installation.html.")
        raise RuntimeError(' '.join(messages))
    return str(installed_version)


toil_version = check_provided('toil', min_version='5.0.0')

kwargs = dict(
    name='batchq',
    version=version,
    description='Simulation and sample-path verification of batch-job scheduling on parallel servers',
    author='UCSC Computational Genomics Lab',
    author_email='cgl-toil@googlegroups.com',
    license='Apache License 2.0',
    package_dir={'': 'src'},
    packages=find_packages('src'),
    python_requires='>=3.8',
    install_requires=['ruamel.yaml>=0.15',
                      'numpy>=1.17',
                      'scipy>=1.4',
                      'pandas>=1.1'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['batchq = batchq.cli:main']})


setup(**kwargs)
