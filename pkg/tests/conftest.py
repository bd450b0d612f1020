from j2cj import repair_engine

# Library classes whose names start with Test are not test containers.
repair_engine.TestCase.__test__ = False
repair_engine.TestResult.__test__ = False
