# src/solver.py
import logging
from dataclasses import replace
from typing import Any, Dict, List, Optional

from src.config import RunConfig
from src.tools.dynamics import DistributionState, IntegrationError, IntegratorConfig, integrate
from src.tools.kernels import CollisionKernel, KernelConfig, build_potential
from src.tools.lattice import ModelParams, build_grid
from src.tools.observables import ObservableRecord, observe
from src.tools.scenarios import make_equilibrium, make_ground_plus_noise, make_pump_bump
from src.tools.spectrum import build_spectral_table
from src.tools.trajectory_writer import TrajectoryWriter, load_snapshot_for_grid

logger = logging.getLogger(__name__)


class KineticSolver:
    """
    Orchestrateur: config -> grille et tables -> état initial -> RK4 -> CSV + snapshots.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        model = config.model
        self.params = ModelParams(U=model.U, J=model.J, dim=model.dim)
        self.grid = build_grid(self.params, model.grid_sizes)

        eta = config.kernel.eta or self.grid.default_eta()
        if not eta > 0:
            raise ValueError("cannot derive a default eta from a grid with a single J_k level; set kernel.eta")

        potential = None
        if config.kernel.regime == "weak":
            spec = config.kernel.potential_spec
            potential = build_potential(
                self.grid,
                spec.kind if spec else "hubbard",
                spec.same if spec else None,
                spec.opposite if spec else None,
            )
        self.kernel_config = KernelConfig(config.kernel.regime, eta, config.kernel.delta, potential)
        self.spectral = build_spectral_table(self.params, self.grid, "strong")

        threads = config.threads or 1
        self.kernel = CollisionKernel(self.grid, self.kernel_config, spectral=self.spectral, threads=threads)
        # Ddot n'existe qu'avec les tables en ordre fort
        self.ddot_kernel: Optional[CollisionKernel] = None
        if config.kernel.regime in ("strong", "general"):
            self.ddot_kernel = CollisionKernel(
                self.grid, replace(self.kernel_config, regime="general"), spectral=self.spectral, threads=threads
            )

        self.integrator = IntegratorConfig(
            dt=config.integrate.dt,
            t_final=config.integrate.t_final,
            output_every=config.integrate.output_every,
            clamp_tolerance=config.integrate.clamp_tolerance,
        )
        self.writer = TrajectoryWriter(output_dir=config.output.directory)

    def initial_state(self) -> DistributionState:
        init = self.config.init
        if init.kind == "equilibrium":
            return make_equilibrium(self.grid, init.alpha_plus, init.alpha_minus, init.beta)
        if init.kind == "pump_bump":
            return make_pump_bump(self.grid, init.center, init.width, init.amplitude)
        if init.kind == "ground_plus_noise":
            seed = init.seed if init.seed is not None else self.config.seed
            return make_ground_plus_noise(self.grid, init.noise, seed)
        return load_snapshot_for_grid(init.path, self.grid)

    def run(self) -> Dict[str, Any]:
        """
        Lance la trajectoire configurée et renvoie un dict résultat.
        """
        logger.info(
            "🚀 Démarrage: regime=%s U=%g grid=%s eta=%.4g steps=%d",
            self.kernel_config.regime,
            self.params.U,
            list(self.grid.sizes),
            self.kernel_config.eta,
            self.integrator.n_steps,
        )
        try:
            # 1) Condition initiale
            state = self.initial_state()

            # 2) Intégration + snapshots périodiques
            stride = self.config.output.snapshot_stride
            n_steps = self.integrator.n_steps
            snapshots: List[str] = []
            final = {"state": state, "step": 0}

            def on_step(current: DistributionState, step: int) -> None:
                final["state"], final["step"] = current, step
                if stride and 0 < step < n_steps and step % stride == 0:
                    snapshots.append(self.writer.write_snapshot(current, self.grid, step))

            def observer(current: DistributionState, step: int) -> ObservableRecord:
                return observe(current, self.grid, self.kernel, self.ddot_kernel)

            records = integrate(state, self.kernel, self.integrator, observer=observer, on_step=on_step)
            snapshots.append(self.writer.write_snapshot(final["state"], self.grid, final["step"]))

            # 3) Fichier trajectoire
            trajectory = self.writer.write_trajectory(records)
        except (IntegrationError, OSError, ValueError) as exc:
            logger.error("❌ Run failed: %s", exc)
            return {"status": "error", "message": str(exc)}

        logger.info("✅ Simulation terminée: %d enregistrements, t=%.6g", len(records), records[-1].t)
        return {
            "status": "success",
            "trajectory": trajectory,
            "snapshots": snapshots,
            "records": len(records),
            "final": records[-1].as_row(),
        }
