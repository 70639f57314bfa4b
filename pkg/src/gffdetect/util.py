"""
Various utility functions
"""

import datetime
import os

import logging
log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


_MASK64 = (1 << 64) - 1


def splitmix64(state):
    """
    One step of the splitmix64 generator, used to derive independent
    per-item seeds from a single master seed.

    Parameters
    ----------
    state : int
        Any integer; only the low 64 bits are used.

    Returns
    -------
    int
        A well mixed 64-bit unsigned integer.

    Examples
    --------
    >>> splitmix64(0)
    16294208416658607535
    >>> splitmix64(0) == splitmix64(1 << 64)
    True
    """
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed, index):
    """
    Seed for the ``index``-th item of a run seeded with ``seed``.

    The master seed goes through one splitmix64 step, is xored with the
    index and goes through a second step.  The top bit is dropped, so
    derived seeds lie in ``[0, 2**63)``.

    Examples
    --------
    >>> derive_seed(0, 1) == derive_seed(1, 0)
    False
    >>> 0 <= derive_seed(2**64 - 1, 5) < 2**63
    True
    """
    return splitmix64(splitmix64(int(seed) & _MASK64) ^ (int(index) & _MASK64)) >> 1


def get_envar_as_int(name, default=None):
    """Interpret an environmental as a positive integer

    Parameters
    ----------
    name : str
        The name of the environmental variable to retrieve

    default : int or None
        If the environmental variable cannot be accessed, use as the default.
    """
    if name in os.environ:
        value = os.environ[name]
        try:
            value = int(value)
        except ValueError:
            raise ValueError(f'Cannot convert value "{value}" of {name} to an integer.')
        if value < 1:
            raise ValueError(f'{name} must be a positive integer, got {value}.')
        return value

    log.debug(f'Environmental "{name}" cannot be found. Using default value of "{default}".')
    return default


def create_history_entry(description, software=None):
    """
    Create a HistoryEntry object.

    Parameters
    ----------
    description : str
        Description of the change.
    software : dict or list of dict
        A description of the software used.  It should not include
        asdf itself, as that is automatically notated in the
        `asdf_library` entry.

        Each dict must have the following keys:

        ``name``: The name of the software
        ``author``: The author or institution that produced the software
        ``homepage``: A URI to the homepage of the software
        ``version``: The version of the software

    Examples
    --------
    >>> entry = create_history_entry("trained 100 epochs")
    >>> entry["description"]
    'trained 100 epochs'
    """
    from asdf.tags.core import Software, HistoryEntry

    if isinstance(software, list):
        software = [Software(x) for x in software]
    elif software is not None:
        software = Software(software)

    dt = datetime.datetime.now(datetime.timezone.utc).replace(tzinfo=None)
    entry = HistoryEntry({
        'description': description,
        'time': dt
    })

    if software is not None:
        entry['software'] = software
    return entry
