"""Band-center spectra of disordered generalized SSH chains via phase dynamics."""
from .disorder import (DisorderSpec, KappaStats, ModelError, RandomStream, ScalarDistribution,
                       SigmaSample, kappa, kappa_moments, kappa_mgf, sample_sigma)
from .ssh_model import (EnsembleConstants, ExpansionCoefficients, HypothesisError, ResolventEntries,
                        TransferMatrix, ensemble_constants, expansion_coefficients, resolvent_entries,
                        transfer_matrix)
from .phase_dynamics import (BirkhoffAccumulator, EpsMaxError, PruferState, RotationEstimate,
                             merge_accumulators, prufer_half_step_D, prufer_half_step_R, run_birkhoff)
from .ds_processes import (ComparisonThresholds, FasterConstructionError, PassageRecord, SandwichReport,
                           StoppingReport, StoppingStats, collect_excursions, collect_passage_times,
                           ds_step, mean_passage_time, optional_stopping_diagnostics, record_passages,
                           run_faster, run_slower, sandwich_check, thresholds)
from .theory import (NuRoot, ScalingRegime, SpikePrediction, classify_scaling, predicted_inverse_times,
                     solve_nu, solve_rho_tilde, spike_coefficient)
from .spectra_oracle import (FiniteHamiltonian, InertiaCount, assemble_hamiltonian, count_eigenvalues_leq,
                             idos_oracle)

__version__ = "0.1.0"
