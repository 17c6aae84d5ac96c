"""Multi-layered cepstrum and frequency/periodicity fusion for multi-pitch estimation."""
from .cfp import (
    CfpRepresentation,
    LogFreqBank,
    fuse,
    fuse_stack,
    project_to_bands,
    quefrency_index,
)
from .degrade import (
    ButterworthSpec,
    DegradeSpec,
    add_impulse,
    build_simulation,
    butterworth_apply,
    gen_fm_sawtooth,
    gen_pink,
    gen_square,
    mix_at_snr,
)
from .evaluation import (
    EvalCounts,
    PianoRoll,
    Scores,
    evaluate,
    hz_to_midi,
    ingest_ground_truth,
    pick_pitches,
    scores,
)
from .mlc import LayerParams, LayerStack, MlcConfig, compute_layer0, compute_next_layer, compute_stack
from .pipeline import estimate, estimate_salience
from .search import SearchSpace, SgdConfig, brute_force, greedy, kfold_split, sgd_train
from .signal import (
    Spectrogram,
    TimeSeries,
    WindowSpec,
    highpass_mask,
    make_window,
    power_activation,
    real_dft,
    stft_magnitude,
)

__version__ = "0.1.0"
