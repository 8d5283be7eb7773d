"""All the tests for the mtsa package.

Refer to conftest.py for shared helpers and the TINY data set.

test_properties.py : hypothesis properties of the solvers
test_* : one module per package module
"""
