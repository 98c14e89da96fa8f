# QSQED test suite
