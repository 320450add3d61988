"""memsim: behavioral simulation of a capacitor-gated CMOS memristor emulator.

The package splits along the natural seams of the problem:

- ``devices``  pure device laws (emulator, switch, sources)
- ``netlist``  text format, circuit data model, round-trip serialization
- ``engine``   per-step MNA solve plus explicit state integration
- ``analysis`` hysteresis fingerprints and pulse-programming checks
- ``maze``     maze-to-network compilation, analog solve, graph oracles
- ``cli``      command-line front end over all of the above
"""

from .devices import (
    Dc,
    MemristorParams,
    MemristorState,
    Pulse,
    Pwl,
    Sin,
    SourceSpec,
    SwitchParams,
    apply_pulse,
    gm_output_current,
    memristor_conductance,
    memristor_current,
    source_value,
    state_derivative,
)

__version__ = "0.1.0"
