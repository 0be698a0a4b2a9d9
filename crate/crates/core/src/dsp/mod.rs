//! Audio input and the log-mel front end.

mod features;
mod mel;
mod stft;
mod wav;

pub use features::{
    log_mel, stack_frames, stack_frames_matrix, FeatureConfig, FeatureExtractor,
    LogMelSpectrogram, StackedFeature,
};
pub use mel::{mel_filterbank, MelFilterbank, MelScale};
pub use stft::{stft_power, window, FrameParams, PowerSpectrogram, WindowKind};
pub use wav::{read_wav, write_wav, AudioClip, WavEncoding};
