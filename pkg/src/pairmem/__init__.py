"""Desk-scale simulator for a frequency-multiplexed cavity SPDC photon-pair
source coupled to an atomic-frequency-comb quantum memory."""

__version__ = "0.1.0"

from .cavity import (BiphotonSpectrum, CavityParams, ClusterSpectrum,
                     ModeLine, PhaseMatching, analytic_g2, cluster_spectrum,
                     comb_spectrum, g2_envelope, mode_weights, resonant_modes)
from .memory import (AfcPlan, AfcProfile, FilterSpec, StoredResponse,
                     design_afc, filter_transmission, memory_response,
                     storage_time)
from .montecarlo import (DetectorModel, EventStream, GatingSequence,
                         SourceModel, concatenate_streams, generate_events,
                         make_rng, sample_pair_delay, sequence_phase,
                         split_seed)
from .analysis import (AnalysisReport, CorrelationHistogram, HistogramConfig,
                       build_histogram, classical_limit, coincidence_rate,
                       detect_peaks, effective_modes, estimate_fsr,
                       fit_envelope, g2_estimate, merge_histograms,
                       noise_floor, shuffle_channel)
from .scenario import (RunBundle, Scenario, analyze_events, default_scenario,
                       load_scenario, run_scenario, run_sweep, save_scenario,
                       scenario_digest, simulate)
from .eventio import (read_events, read_events_csv, write_events,
                      write_events_csv)
from .figures import emit_figure_data
