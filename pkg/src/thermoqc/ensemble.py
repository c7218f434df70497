"""ensemble - bookkeeping for the probe states of a protocol run

A protocol propagates several initial states through the same sequence of
generators.  Each of them is a probe.  A probe is only an identifier, its
data lives in components:

    'state'     ProbeState, the column stacked density matrix
    'target'    the Operator the probe should end up in
    'log'       ProbeLog, per step diagnostics

Systems are plain functions that run once per time step on every probe
that has the requested components.

Workflow:

    1. ens = Ensemble()
    2. eid = ens.create_probe(components={'state': ProbeState.of(rho), ...})
       ...
    3. ens.add_system(propagate_system, 'state')
       ens.add_system_to_domain('propagate', propagate_system)
       ...
    4. per time step ens.run_domain(dt, 'propagate', plan=plan)

A system has the prototype

    fkt(dt, eid, *comps, **kwargs)

and gets the components in the order they were requested.  All systems of
a domain get the same keyword arguments, so a system takes `**kwargs` and
ignores the ones it has no use for.
"""

import logging

from dataclasses import dataclass, field
from uuid import uuid4

import numpy as np

from thermoqc.errors import EnsembleError, UnknownComponentError, UnknownProbeError, UnknownSystemError
from thermoqc.operators import Operator
from thermoqc.propagation import unvec, vec

__all__ = ['Ensemble', 'ProbeState', 'ProbeLog', 'propagate_system']

logger = logging.getLogger(__name__)


@dataclass
class ProbeState:
    """Mutable column stacked density matrix of one probe."""
    vector: np.ndarray
    dim: int

    @classmethod
    def of(cls, rho):
        op = rho if isinstance(rho, Operator) else Operator(rho)
        return cls(vec(op).copy(), op.dim)

    @property
    def rho(self):
        return Operator(unvec(self.vector, self.dim))


@dataclass
class ProbeLog:
    """Per step samples of one probe and the states they were taken from."""
    samples: list = field(default_factory=list)
    states: list = field(default_factory=list)


def propagate_system(dt, eid, state, *, plan, **kwargs):
    """Advance a probe by one step with a prepared propagator plan."""
    state.vector = plan.apply(state.vector)


class Ensemble:
    """Registry of probes, their components and the systems working on them.

    `eidx` maps probe -> {cid: component}, `cidx` maps cid -> {probe:
    component}.  Both always hold the same objects, see `healthcheck`.
    """

    def __init__(self):
        self.eidx = {}
        self.cidx = {}
        self.sidx = {}
        self.didx = {}

    def reset(self):
        """Remove all probes, systems and domains."""
        for eid in list(self.eidx):
            self.remove_probe(eid)
        for fkt in list(self.sidx):
            self.remove_system(fkt)
        self.cidx.clear()
        self.didx.clear()

    def healthcheck(self):
        """Verify that the probe and the component index agree.

        Returns
        -------
        bool
            True if successful, exception otherwise.

        Raises
        ------
        EnsembleError(error, eid, cid, component, other=None)

        """
        for eid, comps in self.eidx.items():
            for cid, comp in comps.items():
                if cid not in self.cidx:
                    raise EnsembleError('Component in eidx is missing in cidx', eid=eid, cid=cid, component=comp)
                if eid not in self.cidx[cid]:
                    raise EnsembleError('Probe in eidx is missing in cidx component', eid=eid, cid=cid, component=comp)
                if comp is not self.cidx[cid][eid]:
                    raise EnsembleError('Component object differs between eidx and cidx',
                                        eid=eid, cid=cid, component=comp, other=self.cidx[cid][eid])
        for cid, probes in self.cidx.items():
            for eid, comp in probes.items():
                if eid not in self.eidx:
                    raise EnsembleError('Probe in cidx is missing in eidx', eid=eid, cid=cid, component=comp)
                if cid not in self.eidx[eid]:
                    raise EnsembleError('Component in cidx is missing in eidx', eid=eid, cid=cid, component=comp)

        return True

    def __len__(self):
        return len(self.eidx)

    def __contains__(self, eid):
        return eid in self.eidx

    def create_probe(self, tag=None, components=None):
        """Create a probe, optionally with components.

            create_probe(tag=None, components=None) -> eid

        Without a tag a uuid is used.
        """
        eid = tag if tag is not None else str(uuid4())
        self.eidx[eid] = {}
        for cid, comp in (components or {}).items():
            self.add_component(eid, cid, comp)
        return eid

    def remove_probe(self, eid):
        """Remove a probe and its components, unknown probes are ignored."""
        try:
            cids = list(self.eidx[eid])
        except KeyError:
            return

        self.remove_component(eid, *cids)
        del self.eidx[eid]

    def add_component(self, eid, cid, comp):
        if eid not in self.eidx:
            raise UnknownProbeError(f'Probe {eid} is not registered')

        self.cidx.setdefault(cid, {})[eid] = comp
        self.eidx[eid][cid] = comp
        return cid

    def remove_component(self, eid, *cids):
        for cid in cids:
            try:
                del self.cidx[cid][eid]
                del self.eidx[eid][cid]
            except KeyError:
                pass

    def comps_of_eid(self, eid, *cids):
        """Components of a probe, all of them if no cids are given."""
        if eid not in self.eidx:
            raise UnknownProbeError(f'Probe {eid} is not registered')

        if not cids:
            return list(self.eidx[eid].values())

        try:
            return [self.eidx[eid][cid] for cid in cids]
        except KeyError as e:
            raise UnknownComponentError(f'Component {e} not registered with probe {eid}') from e

    def comp_of_eid(self, eid, cid):
        return self.comps_of_eid(eid, cid)[0]

    def eids_by_cids(self, *cids):
        """Probes that have all of the cids.

            eids_by_cids(*cids) -> [(eid, [comps]), ...]

        Probes are returned in creation order.
        """
        res = []
        for eid, have in self.eidx.items():
            if all(cid in have for cid in cids):
                res.append((eid, [have[cid] for cid in cids]))
        return res

    def add_system(self, fkt, *cids):
        self.sidx[fkt] = cids

    def remove_system(self, fkt):
        for domain in self.didx.values():
            if fkt in domain:
                domain.remove(fkt)
        self.sidx.pop(fkt, None)

    def add_system_to_domain(self, domain, fkt):
        if fkt not in self.sidx:
            raise UnknownSystemError(f'system {fkt} is not registered')
        # lists keep the run order stable
        systems = self.didx.setdefault(domain, [])
        if fkt not in systems:
            systems.append(fkt)

    def run_system(self, dt, fkt, *cids, **kwargs):
        """Run fkt on every probe with the cids.

            run_system(dt, fkt, *cids, **kwargs) -> {eid: fkt(dt, eid, *comps, **kwargs), ...}

        """
        call_list = self.eids_by_cids(*cids)
        return {eid: fkt(dt, eid, *comps, **kwargs) for eid, comps in call_list}

    def run_domain(self, dt, domain, **kwargs):
        """Run the systems of a domain in registration order, unknown domains do nothing."""
        if domain not in self.didx:
            return {}

        return {fkt: self.run_system(dt, fkt, *self.sidx[fkt], **kwargs)
                for fkt in self.didx[domain]}

    def states(self):
        return [state.rho for _, (state,) in self.eids_by_cids('state')]
