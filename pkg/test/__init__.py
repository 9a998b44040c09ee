"""
Test package for PythonDDRO; fixtures sit next to the test modules
"""
