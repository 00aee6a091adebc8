"""Hand-enumerated admissibility truth table.

Each row is (n, op, alpha, p, q, w1, w2, q1, q2, lam, expected case).  The
rows walk every clause boundary: alpha at both ends of the open interval,
the endpoint with p on either side of 1, q2 = q and q2 > q, lambda at 3 and
at q2, equal weights with unequal indices, and unequal weights at alpha = 0.
"""
from sqfn_lab.weights import constant, power

ONE = constant()
HALF = power(0.5)

TABLE = [
    # unweighted, q = 2, q1 = q2 = 1: interval (-1/2, 1/2), endpoint 1/2
    (1, "S", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (1, "S", 0.49, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (1, "S", -0.49, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (1, "S", -0.5, 1.0, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (1, "S", -0.7, 1.0, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (1, "S", 0.5, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.2-endpoint"),
    (1, "S", 0.5, 0.5, 2.0, ONE, ONE, 1, 1, None, "Thm1.2-endpoint"),
    (1, "S", 0.5, 1.5, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (1, "S", 0.6, 1.0, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (1, "S", 0.25, 7.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    # q2 = q: the upper bound is 0 and the endpoint is alpha = 0
    (1, "S", -0.25, 1.0, 2.0, HALF, HALF, 2, 2, None, "Thm1.1(i)"),
    (1, "S", -0.49, 1.0, 2.0, HALF, HALF, 2, 2, None, "Thm1.1(i)"),
    (1, "S", -0.5, 1.0, 2.0, HALF, HALF, 2, 2, None, "inadmissible"),
    (1, "S", 0.0, 1.0, 2.0, HALF, HALF, 2, 2, None, "Thm1.2-endpoint"),
    (1, "S", 0.0, 2.0, 2.0, HALF, HALF, 2, 2, None, "inadmissible"),
    # q2 > q
    (1, "S", 0.0, 1.0, 2.0, ONE, ONE, 2.5, 2.5, None, "inadmissible"),
    (1, "S", 0.1, 1.0, 2.0, HALF, ONE, 2, 2.5, None, "inadmissible"),
    # equal weights, unequal indices
    (1, "S", 0.1, 1.0, 4.0, ONE, ONE, 1, 2, None, "inadmissible"),
    # unequal weights: interval (0, n(1 - q2/q) / q1)
    (1, "S", 0.1, 1.0, 2.0, HALF, ONE, 2, 1, None, "Thm1.1(ii)"),
    (1, "S", 0.0, 1.0, 2.0, HALF, ONE, 2, 1, None, "inadmissible"),
    (1, "S", -0.1, 1.0, 2.0, HALF, ONE, 2, 1, None, "inadmissible"),
    (1, "S", 0.25, 1.0, 2.0, HALF, ONE, 2, 1, None, "Thm1.2-endpoint"),
    (1, "S", 0.3, 1.0, 2.0, HALF, ONE, 2, 1, None, "inadmissible"),
    # q = 1.5: endpoint 1/3 is not a dyadic number
    (1, "S", 1 / 3, 1.0, 1.5, ONE, ONE, 1, 1, None, "Thm1.2-endpoint"),
    (1, "S", 0.3333, 1.0, 1.5, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    # G follows the S theorems
    (1, "G", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (1, "G", 0.5, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.2-endpoint"),
    # G*: lambda > max{q2, 3}
    (1, "G*", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, 4.0, "Thm1.3(i)"),
    (1, "G*", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, 3.01, "Thm1.3(i)"),
    (1, "G*", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, 3.0, "inadmissible"),
    (1, "G*", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, 2.5, "inadmissible"),
    (1, "G*", 0.25, 1.0, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (1, "G*", 0.0, 1.0, 4.0, ONE, ONE, 3.5, 3.5, 3.5, "inadmissible"),
    (1, "G*", 0.0, 1.0, 4.0, ONE, ONE, 3.5, 3.5, 3.6, "Thm1.3(i)"),
    (1, "G*", 0.5, 1.0, 2.0, ONE, ONE, 1, 1, 4.0, "Thm1.4-endpoint"),
    (1, "G*", 0.5, 1.5, 2.0, ONE, ONE, 1, 1, 4.0, "inadmissible"),
    (1, "G*", 0.5, 1.0, 2.0, ONE, ONE, 1, 1, 3.0, "inadmissible"),
    (1, "G*", 0.1, 1.0, 2.0, HALF, ONE, 2, 1, 4.0, "Thm1.3(ii)"),
    (1, "G*", 0.0, 1.0, 2.0, HALF, ONE, 2, 1, 4.0, "inadmissible"),
    # n = 2: interval (-1, 1) for q = 2, q1 = q2 = 1
    (2, "S", 0.99, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (2, "S", 1.0, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.2-endpoint"),
    (2, "S", -1.0, 1.0, 2.0, ONE, ONE, 1, 1, None, "inadmissible"),
    (2, "S", -0.99, 1.0, 2.0, ONE, ONE, 1, 1, None, "Thm1.1(i)"),
    (2, "G*", 0.5, 1.0, 2.0, ONE, ONE, 1, 1, 4.0, "Thm1.3(i)"),
]
