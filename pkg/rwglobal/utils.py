#########################################
#
# Index helpers shared by the series,
# graph and weight modules
#
#########################################
import functools
import itertools
import logging
import math

logger = logging.getLogger(name="rwglobal")


@functools.lru_cache(maxsize=None)
def Nterms(nvars, order):
    """
    Number of monomials of total degree <= order in nvars commuting
    variables.
    """
    if order < 0:
        return 0
    return math.comb(nvars + order, order)


@functools.lru_cache(maxsize=None)
def itermonomials(nvars, max_degree, min_degree=0):
    """
    itermonomials(nvars, max_degree, min_degree=0):

    Exponent vectors of all monomials in nvars variables with
    min_degree <= total degree <= max_degree, graded and then
    reverse-lexicographically ordered (x0 first).

    Example:
    >>> itermonomials(2, 1)
    ((0, 0), (1, 0), (0, 1))
    """
    monoms = []
    for degree in range(min_degree, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), degree):
            exps = [0] * nvars
            for v in combo:
                exps[v] += 1
            monoms.append(tuple(exps))
    return tuple(monoms)


def merge_odd(a, b):
    """
    Concatenates two strictly increasing tuples of odd generator indices
    and sorts the result. Returns (sign, merged) where sign is the Koszul
    sign of the sort, or (0, None) if a generator repeats.
    """
    if not a:
        return 1, b
    if not b:
        return 1, a
    if set(a) & set(b):
        return 0, None
    swaps = 0
    for i in a:
        for j in b:
            if i > j:
                swaps += 1
    return (-1 if swaps % 2 else 1), tuple(sorted(a + b))


def permutation_parity(perm):
    """Returns +1 for even and -1 for odd permutations of range(len(perm))."""
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def darboux(n):
    """Darboux matrix [[0, I_n], [-I_n, 0]] as a nested list of ints."""
    dim = 2 * n
    omega = [[0] * dim for _ in range(dim)]
    for i in range(n):
        omega[i][n + i] = 1
        omega[n + i][i] = -1
    return omega
