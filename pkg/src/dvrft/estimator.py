"""Scikit-learn style estimator wrapping the synthesis pipeline.

fit(X, y) consumes an input/output experiment (X the applied inputs, y the
measured outputs, both (N, L)) and identifies the distributed controller;
predict(X) treats X as reference signals and returns the closed-loop response
of the identified controller on the spec's plant.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .evaluation import (
    assemble_closed_loop,
    estimate_jmr,
    performance_metric,
    simulate_closed_loop,
    synthesize_controller,
)
from .config import ControllerClassSpec
from .identification import build_regressors, excitation_check
from .ideal import build_ideal_controller, check_realizability, map_to_parameters
from .network import normalize_interconnection, simulate_reference
from .validation import ensure_spec, ensure_same_horizon, ensure_time_series

__all__ = ["DistributedVRFT"]


class DistributedVRFT(BaseEstimator):
    """One-shot data-driven synthesis of a distributed model-reference controller.

    Parameters
    ----------
    spec : NetworkSpec, dict, or path
        Interconnected plant and structured reference model.
    controller_class : {'full', 'reduced', 'decentralized', 'custom'}
        Communication structure of the controller to identify.
    drop_edges : sequence of (i, j), optional
        Links removed for the 'reduced' class (spec node labels).
    edges : sequence of (i, j), optional
        Explicit link set for the 'custom' class.
    trim : int, optional
        Regressor rows dropped at the start of the horizon; defaults to the
        largest basis denominator degree.
    allow_rank_deficient : bool
        Accept the minimum-norm solution when link channels are redundant.
    cancel_tol : float
        Pole/zero cancellation tolerance for the transfer-function algebra.

    Attributes
    ----------
    controller_ : DistributedController
    rho_ : list of ndarray, identified parameters per node
    results_ : list of IdentificationResult
    parametrization_ : ControllerParametrization
    virtual_horizon_ : int, samples kept after virtual-reference inversion
    excitation_ : ExcitationDiagnostics
    """

    def __init__(
        self,
        spec=None,
        controller_class="full",
        drop_edges=None,
        edges=None,
        trim=None,
        allow_rank_deficient=False,
        cancel_tol=1e-9,
    ):
        self.spec = spec
        self.controller_class = controller_class
        self.drop_edges = drop_edges
        self.edges = edges
        self.trim = trim
        self.allow_rank_deficient = allow_rank_deficient
        self.cancel_tol = cancel_tol

    def _resolved_spec(self):
        return ensure_spec(self.spec)

    def fit(self, X, y):
        """Identify the controller from an input/output experiment."""
        spec = self._resolved_spec()
        L = spec.n_nodes
        X = ensure_time_series(X, L, name="X")
        y = ensure_time_series(y, L, name="y")
        ensure_same_horizon(X, y)

        report = check_realizability(normalize_interconnection(spec))
        if not report.ok:
            raise ValueError(
                "ideal controller not realizable: " + "; ".join(report.messages())
            )
        class_spec = ControllerClassSpec(
            label=str(self.controller_class),
            kind=str(self.controller_class),
            drop_edges=tuple(tuple(e) for e in self.drop_edges) if self.drop_edges else (),
            edges=tuple(tuple(e) for e in self.edges) if self.edges else (),
        )
        ctrl, param, results, vd = synthesize_controller(
            spec,
            X,
            y,
            class_spec=class_spec,
            trim=self.trim,
            cancel_tol=self.cancel_tol,
            allow_rank_deficient=self.allow_rank_deficient,
        )
        self.spec_ = spec
        self.n_nodes_ = L
        self.controller_ = ctrl
        self.parametrization_ = param
        self.results_ = results
        self.rho_ = [r.rho for r in results]
        self.virtual_horizon_ = vd.horizon
        self.excitation_ = excitation_check(
            u=X, regressors=build_regressors(param, vd, X, trim=self.trim)
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "controller_"):
            raise NotFittedError("this DistributedVRFT instance is not fitted yet")

    def predict(self, X):
        """Closed-loop node outputs for reference signals X on the spec's plant."""
        self._check_fitted()
        X = ensure_time_series(X, self.n_nodes_, name="X")
        loop = assemble_closed_loop(self.spec_, self.controller_)
        y, _ = simulate_closed_loop(loop, X)
        return y

    def score(self, X, y=None):
        """Negative model-reference error against the reference model (or given y)."""
        self._check_fitted()
        X = ensure_time_series(X, self.n_nodes_, name="X")
        desired = simulate_reference(self.spec_, X) if y is None else ensure_time_series(y, self.n_nodes_, name="y")
        return -estimate_jmr(self.predict(X), desired)

    def ideal_parameters(self):
        """Parameters of the ideal controller in this class, when representable."""
        self._check_fitted()
        work = normalize_interconnection(self.spec_)
        ideal_nodes = build_ideal_controller(work, cancel_tol=self.cancel_tol)
        return [
            map_to_parameters(ideal_nodes[p.node], p) for p in self.parametrization_.nodes
        ]

    def performance(self, omegas=None):
        """Largest spectral-norm gap to the reference model over the grid."""
        self._check_fitted()
        return performance_metric(self.spec_, self.controller_, omegas)
