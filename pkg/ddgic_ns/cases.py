"""
Registry of the built-in verification and validation cases and their defaults.
"""

import math
from typing import Any, Dict, List, Optional

MMS = 'mms'
PULSE = 'pulse'
PLATE = 'plate'
CYLINDER_STEADY = 'cylinder_steady'
CYLINDER_UNSTEADY = 'cylinder_unsteady'
SCALAR = 'scalar'

FAMILIES = (MMS, PULSE, PLATE, CYLINDER_STEADY, CYLINDER_UNSTEADY, SCALAR)

_CASES: List[Dict[str, Any]] = [
    {
        'name': 'mms1',
        'family': MMS,
        'description': 'Travelling-wave manufactured solution on the periodic unit square',
        'defaults': {'mesh': 'square:0', 'mu': 1e-3, 'final_time': 2.0 * math.pi,
                     'viscosity': 'constant', 'mode': 'final_time'},
    },
    {
        'name': 'mms2',
        'family': MMS,
        'description': 'Wave-packet manufactured solution on the periodic unit square',
        'defaults': {'mesh': 'square:0', 'mu': 1e-2, 'final_time': 1.0,
                     'viscosity': 'constant', 'mode': 'final_time'},
    },
    {
        'name': 'pulse',
        'family': PULSE,
        'description': 'Pressure pulse in a periodic box, measured against a stored reference run',
        'defaults': {'mesh': 'square:0', 'mu': 1e-2, 'final_time': 0.1,
                     'viscosity': 'constant', 'mode': 'final_time'},
    },
    {
        'name': 'plate',
        'family': PLATE,
        'description': 'Laminar boundary layer on an adiabatic flat plate, Re = 1e4, M = 0.3',
        'defaults': {'mesh': 'plate', 'reynolds': 1e4, 'mach': 0.3, 'viscosity': 'sutherland',
                     'mode': 'steady', 'steady_tol': 1e-5, 'export': ('vtk', 'csv')},
    },
    {
        'name': 'cylinder-steady',
        'family': CYLINDER_STEADY,
        'description': 'Steady separated flow past a circular cylinder, Re = 40, M = 0.2',
        'defaults': {'mesh': 'cylinder', 'reynolds': 40.0, 'mach': 0.2, 'viscosity': 'sutherland',
                     'mode': 'steady', 'steady_tol': 1e-6, 'save_reference': True},
    },
    {
        'name': 'cylinder-unsteady',
        'family': CYLINDER_UNSTEADY,
        'description': 'Vortex shedding behind a circular cylinder, Re = 75, M = 0.2',
        'defaults': {'mesh': 'cylinder', 'reynolds': 75.0, 'mach': 0.2, 'viscosity': 'sutherland',
                     'mode': 'final_time', 'final_time': 300.0, 'perturbation': 0.01,
                     'record_every': 10},
    },
    {
        'name': 'scalar-heat',
        'family': SCALAR,
        'description': 'Scalar heat equation with a decaying sine mode (exact solution known)',
        'defaults': {'mesh': 'square:0', 'final_time': 0.01, 'mode': 'final_time',
                     'problem': 'heat', 'scheme': 'new', 'export': ()},
    },
    {
        'name': 'scalar-nonlinear',
        'family': SCALAR,
        'description': 'Scalar diffusion with A(u) = (1 + u^2) I',
        'defaults': {'mesh': 'square:0', 'final_time': 0.01, 'mode': 'final_time',
                     'problem': 'nonlinear', 'scheme': 'new', 'export': ()},
    },
]


class CaseCatalog:
    """Look-up of registered cases by name."""

    def __init__(self):
        self.cases: List[Dict[str, Any]] = [dict(case) for case in _CASES]
        self.logger = None

    def set_logger(self, logger):
        """Set logger for this catalog."""
        self.logger = logger

    def get_all_cases(self) -> List[Dict[str, Any]]:
        return self.cases

    def names(self) -> List[str]:
        return [case['name'] for case in self.cases]

    def get_case_by_name(self, name: str) -> Optional[Dict[str, Any]]:
        """
        Get a case by its name (case-insensitive).

        Returns:
            Case entry or None if not found
        """
        for case in self.cases:
            if case['name'].lower() == name.lower():
                return case
        if self.logger:
            self.logger.debug(f"Case not found: {name}")
        return None

    def search_cases(self, query: str) -> List[Dict[str, Any]]:
        """Cases whose name, family or description contains ``query``."""
        query = query.lower()
        return [case for case in self.cases
                if query in f"{case['name']} {case['family']} {case['description']}".lower()]
