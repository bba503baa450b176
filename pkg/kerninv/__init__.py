"""The root of the kerninv namespace.

kerninv learns kernel-based representations that trade the information they
keep about a target against the information they leak about a semantic
attribute, and sweeps that trade-off. Its modules form a tree of dependencies,
where each module only knows about the modules below it (every module may use
:mod:`kerninv.kernels`)::

    kerninv.cli
    ├── kerninv.config
    │   └── kerninv.config_fields
    ├── kerninv.data
    └── kerninv.tradeoff
        ├── kerninv.solver
        │   └── kerninv.rff
        ├── kerninv.dependence
        └── kerninv.kernels

"""

from logging import basicConfig

basicConfig()
