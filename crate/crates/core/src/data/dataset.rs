use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    events_to_labelgrid, read_labels_csv, sample_note_sequence_with, synthesize_clip_with, wav_read, wav_write,
    write_labels_csv, DataError, LabelGrid, NoteEvent, SynthesisParams,
};
use crate::layer::EnvelopeConfig;
use crate::signal::AudioSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    fn index(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SPLIT_STRIDE: u64 = 1_000_000;

/// Seed of clip `index` in `split`. Each split owns a disjoint block of one
/// million seeds inside the block of `base_seed`.
pub fn clip_seed(base_seed: u64, split: Split, index: usize) -> u64 {
    assert!((index as u64) < SPLIT_STRIDE, "split too large");
    base_seed * 3 * SPLIT_STRIDE + split.index() * SPLIT_STRIDE + index as u64
}

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub base_seed: u64,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub sample_rate_hz: u32,
    pub frame_window_samples: usize,
    pub frame_stride_samples: usize,
    pub synthesis: SynthesisParams,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        let env = EnvelopeConfig::default();
        Self {
            base_seed: 0,
            train: 2000,
            valid: 200,
            test: 200,
            sample_rate_hz: 16_000,
            frame_window_samples: env.pool_window,
            frame_stride_samples: env.pool_stride,
            synthesis: SynthesisParams::default(),
        }
    }
}

impl DatasetSpec {
    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        EnvelopeConfig {
            pool_window: self.frame_window_samples,
            pool_stride: self.frame_stride_samples,
        }
    }

    pub fn frame_rate(&self) -> f64 {
        f64::from(self.sample_rate_hz) / self.frame_stride_samples as f64
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for split in Split::ALL {
            let n = self.count(split);
            if n == 0 {
                return Err(DataError::Config(format!("{split} split must contain at least one clip")));
            }
            if n as u64 >= SPLIT_STRIDE {
                return Err(DataError::Config(format!("{split} split is limited to {SPLIT_STRIDE} clips")));
            }
        }
        self.envelope()
            .validate()
            .map_err(|e| DataError::Config(e.to_string()))?;
        Ok(())
    }
}

/// A synthesised clip with its frame labels.
#[derive(Debug, Clone)]
pub struct Clip {
    pub seed: u64,
    pub events: Vec<NoteEvent>,
    pub audio: AudioSignal,
    pub labels: LabelGrid,
}

fn make_clip(spec: &DatasetSpec, seed: u64) -> Result<Clip, DataError> {
    let events = sample_note_sequence_with(seed, &spec.synthesis);
    let audio = synthesize_clip_with(&events, spec.sample_rate_hz, &spec.synthesis)?;
    let labels = events_to_labelgrid(&events, &spec.envelope(), spec.sample_rate_hz, audio.len());
    Ok(Clip {
        seed,
        events,
        audio,
        labels,
    })
}

/// Synthesises one split in memory, in parallel across clips.
pub fn generate_split(spec: &DatasetSpec, split: Split) -> Result<Vec<Clip>, DataError> {
    (0..spec.count(split))
        .into_par_iter()
        .map(|i| make_clip(spec, clip_seed(spec.base_seed, split, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub audio: String,
    pub labels: String,
    pub duration_s: f64,
    pub seed: u64,
}

/// One split's manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: Split,
    pub spec: DatasetSpec,
    pub clips: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn file_name(split: Split) -> String {
        format!("manifest_{split}.toml")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable")
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        toml::from_str(&text).map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Writes every split's clips, label CSVs and manifests under `out_dir`.
/// Output depends only on `spec`; re-running overwrites identically.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    spec.validate()?;
    let mut manifests = Vec::new();
    for split in Split::ALL {
        let dir = out_dir.join(split.name());
        fs::create_dir_all(&dir).map_err(|e| DataError::io(&dir, e))?;
        let entries = (0..spec.count(split))
            .into_par_iter()
            .map(|i| -> Result<ManifestEntry, DataError> {
                let clip = make_clip(spec, clip_seed(spec.base_seed, split, i))?;
                let stem = format!("clip_{i:05}");
                let audio = format!("{}/{stem}.wav", split.name());
                let labels = format!("{}/{stem}.csv", split.name());
                wav_write(&out_dir.join(&audio), &clip.audio)?;
                write_labels_csv(&clip.labels, &out_dir.join(&labels))?;
                Ok(ManifestEntry {
                    audio,
                    labels,
                    duration_s: clip.audio.duration_secs(),
                    seed: clip.seed,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let manifest = DatasetManifest {
            split,
            spec: spec.clone(),
            clips: entries,
        };
        let path = out_dir.join(DatasetManifest::file_name(split));
        fs::write(&path, manifest.to_toml()).map_err(|e| DataError::io(&path, e))?;
        manifests.push(path);
    }
    Ok(manifests)
}

/// Loads every clip listed in a manifest. Note events are re-derived from
/// the recorded seeds.
pub fn load_split(manifest_path: &Path) -> Result<(DatasetManifest, Vec<Clip>), DataError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let frame_rate = manifest.spec.frame_rate();
    let clips = manifest
        .clips
        .par_iter()
        .map(|e| -> Result<Clip, DataError> {
            let audio = wav_read(&root.join(&e.audio))?;
            if audio.sample_rate() != manifest.spec.sample_rate_hz {
                return Err(DataError::Manifest(format!(
                    "{} is {} Hz, manifest says {} Hz",
                    e.audio,
                    audio.sample_rate(),
                    manifest.spec.sample_rate_hz
                )));
            }
            let labels = read_labels_csv(&root.join(&e.labels), frame_rate)?;
            Ok(Clip {
                seed: e.seed,
                events: sample_note_sequence_with(e.seed, &manifest.spec.synthesis),
                audio,
                labels,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, clips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::rms;

    fn small() -> DatasetSpec {
        DatasetSpec {
            base_seed: 7,
            train: 3,
            valid: 2,
            test: 2,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn seeds_are_disjoint_across_splits() {
        let mut seen = std::collections::HashSet::new();
        for split in Split::ALL {
            for i in 0..500 {
                assert!(seen.insert(clip_seed(3, split, i)));
            }
        }
        assert_ne!(clip_seed(0, Split::Test, 0), clip_seed(1, Split::Train, 0));
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_dataset(&small(), a.path()).unwrap();
        generate_dataset(&small(), b.path()).unwrap();
        for rel in ["manifest_train.toml", "manifest_test.toml", "train/clip_00002.wav", "valid/clip_00001.csv"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }

    #[test]
    fn load_matches_memory_generation() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small();
        generate_dataset(&spec, dir.path()).unwrap();
        let (manifest, loaded) = load_split(&dir.path().join("manifest_valid.toml")).unwrap();
        assert_eq!(manifest.split, Split::Valid);
        let mem = generate_split(&spec, Split::Valid).unwrap();
        for (l, m) in loaded.iter().zip(&mem) {
            assert_eq!(l.labels, m.labels);
            assert_eq!(l.events, m.events);
            for (a, b) in l.audio.samples().iter().zip(m.audio.samples()) {
                assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }

    #[test]
    fn zero_count_is_rejected() {
        let spec = DatasetSpec { train: 0, ..small() };
        assert!(generate_dataset(&spec, tempfile::tempdir().unwrap().path()).is_err());
    }

    #[test]
    fn labels_are_monophonic_and_consistent_with_audio() {
        let spec = DatasetSpec {
            train: 40,
            ..small()
        };
        let env = spec.envelope();
        for clip in generate_split(&spec, Split::Train).unwrap() {
            let x = clip.audio.samples();
            // One hop centred on each frame centre.
            let segment = |f: usize| {
                let c = env.frame_center(f) as usize;
                let half = env.pool_stride / 2;
                &x[c - half..(c + half).min(x.len())]
            };
            let in_gap = |f: usize| {
                let c = env.frame_center(f) as usize;
                let (lo, hi) = (c - env.pool_stride / 2, c + env.pool_stride / 2);
                let fs = f64::from(spec.sample_rate_hz);
                clip.events.iter().all(|n| {
                    let s = (n.onset * fs).round() as usize;
                    let e = s + (n.duration * fs).round() as usize;
                    hi <= s || lo >= e
                })
            };
            let labelled_min = (0..clip.labels.frames())
                .filter(|&f| clip.labels.active()[f].is_some())
                .map(|f| rms(segment(f)))
                .fold(f64::INFINITY, f64::min);
            let gap_max = (0..clip.labels.frames())
                .filter(|&f| clip.labels.active()[f].is_none() && in_gap(f))
                .map(|f| rms(segment(f)))
                .fold(0.0, f64::max);
            assert!(labelled_min >= 10.0 * gap_max, "seed {}: {labelled_min} vs {gap_max}", clip.seed);
            assert!(labelled_min > 0.0);
        }
    }
}
