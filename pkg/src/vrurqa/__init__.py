"""Vulnerable-road-user detection from smartphone inertial data.

Time-domain and recurrence-quantification features per 1-s window, mRMR
feature ranking and a from-scratch random forest.
"""

__version__ = "0.1.0"
