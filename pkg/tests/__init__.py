# hidex test suite
