//! TOML experiment files. Every key is optional and falls back to the
//! defaults of the corresponding spec.
//!
//! ```toml
//! seed = 7
//!
//! [ber_sweep]
//! snr_db = [6, 8, 10]
//! trials = 1000
//! decoders = ["fsjd", "rsjd512", "psud"]
//! scenario = "near-realistic"
//!
//! [feel]
//! uplinks = ["ideal", "digital", "analog-misaligned"]
//! snr_db = [9, 20]
//! bits = [13]
//! seeds = 10
//!
//! [analog_compare]
//! snr_db = [30, 40]
//! rounds = 1000
//!
//! [selftest]
//! instances = 500
//! ```

use std::path::Path;

use aircomp::channel::ScenarioKind;
use aircomp::convcodec::CodeSpec;
use aircomp::feel::Uplink;
use aircomp::protocol::DecoderKind;
use aircomp::quantizer::QuantMode;
use serde::Deserialize;

use crate::analog::{AnalogSpec, Mode};
use crate::error::{Error, Result};
use crate::learning::{arms, FeelSpec};
use crate::selftest::SelftestSpec;
use crate::sweep::SweepSpec;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub ber_sweep: SweepSection,
    #[serde(default)]
    pub feel: FeelSection,
    #[serde(default)]
    pub analog_compare: AnalogSection,
    #[serde(default)]
    pub selftest: SelftestSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub experiment: Option<String>,
    pub snr_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub decoders: Option<Vec<DecoderKind>>,
    pub scenario: Option<ScenarioKind>,
    pub source_bits: Option<usize>,
    pub constraint_length: Option<usize>,
    pub generators: Option<[u32; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeelSection {
    pub experiment: Option<String>,
    pub uplinks: Option<Vec<Uplink>>,
    pub decoders: Option<Vec<DecoderKind>>,
    pub snr_db: Option<Vec<f64>>,
    pub bits: Option<Vec<usize>>,
    pub mode: Option<QuantMode>,
    pub seeds: Option<usize>,
    pub scenario: Option<ScenarioKind>,
    pub num_devices: Option<usize>,
    pub iterations: Option<usize>,
    pub local_epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub analog_repeats: Option<usize>,
    pub classes: Option<usize>,
    pub dim: Option<usize>,
    pub train: Option<usize>,
    pub test: Option<usize>,
    pub separation: Option<f64>,
    pub iid_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogSection {
    pub experiment: Option<String>,
    pub snr_db: Option<Vec<f64>>,
    pub rounds: Option<usize>,
    pub repeats: Option<usize>,
    pub num_params: Option<usize>,
    pub scale: Option<f64>,
    pub scenario: Option<ScenarioKind>,
    pub modes: Option<Vec<Mode>>,
    pub decoder: Option<DecoderKind>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSection {
    pub instances: Option<usize>,
    pub max_bits: Option<usize>,
    pub snr_min: Option<f64>,
    pub snr_max: Option<f64>,
    pub ordering_trials: Option<usize>,
    pub ordering_bits: Option<usize>,
    pub ordering_snr_db: Option<f64>,
    pub scenarios: Option<Vec<ScenarioKind>>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn sweep(&self) -> Result<SweepSpec> {
        let s = &self.ber_sweep;
        let mut spec = SweepSpec::default();
        set(&mut spec.experiment, s.experiment.clone());
        set(&mut spec.snr_db, s.snr_db.clone());
        set(&mut spec.trials, s.trials);
        set(&mut spec.decoders, s.decoders.clone());
        set(&mut spec.scenario, s.scenario);
        set(&mut spec.source_bits, s.source_bits);
        set(&mut spec.master_seed, self.seed);
        if s.constraint_length.is_some() || s.generators.is_some() {
            let base = CodeSpec::IEEE80211;
            spec.code = CodeSpec::new(
                s.constraint_length.unwrap_or(base.constraint_length),
                s.generators.unwrap_or(base.generators),
            )?;
        }
        Ok(spec)
    }

    pub fn feel(&self) -> Result<FeelSpec> {
        let s = &self.feel;
        let mut spec = FeelSpec::default();
        set(&mut spec.experiment, s.experiment.clone());
        set(&mut spec.seeds, s.seeds);
        set(&mut spec.master_seed, self.seed);
        let b = &mut spec.base;
        set(&mut b.scenario, s.scenario);
        set(&mut b.num_devices, s.num_devices);
        set(&mut b.iterations, s.iterations);
        set(&mut b.train.epochs, s.local_epochs);
        set(&mut b.train.learning_rate, s.learning_rate);
        set(&mut b.train.batch_size, s.batch_size);
        set(&mut b.train.weight_decay, s.weight_decay);
        set(&mut b.analog_repeats, s.analog_repeats);
        set(&mut b.quantizer.mode, s.mode);
        set(&mut b.dataset.classes, s.classes);
        set(&mut b.dataset.dim, s.dim);
        set(&mut b.dataset.train, s.train);
        set(&mut b.dataset.test, s.test);
        set(&mut b.dataset.separation, s.separation);
        set(&mut b.dataset.iid_fraction, s.iid_fraction);
        if s.uplinks.is_some() || s.decoders.is_some() || s.snr_db.is_some() || s.bits.is_some() {
            spec.arms = arms(
                s.uplinks.as_deref().unwrap_or(&Uplink::ALL),
                s.decoders.as_deref().unwrap_or(&[DecoderKind::Rsjd(512)]),
                s.snr_db.as_deref().unwrap_or(&[9.0, 20.0]),
                s.bits.as_deref().unwrap_or(&[13]),
            );
        }
        Ok(spec)
    }

    pub fn analog(&self) -> AnalogSpec {
        let s = &self.analog_compare;
        let mut spec = AnalogSpec::default();
        set(&mut spec.experiment, s.experiment.clone());
        set(&mut spec.snr_db, s.snr_db.clone());
        set(&mut spec.rounds, s.rounds);
        set(&mut spec.repeats, s.repeats);
        set(&mut spec.num_params, s.num_params);
        set(&mut spec.scale, s.scale);
        set(&mut spec.scenario, s.scenario);
        set(&mut spec.modes, s.modes.clone());
        set(&mut spec.decoder, s.decoder);
        set(&mut spec.master_seed, self.seed);
        spec
    }

    pub fn selftest(&self) -> SelftestSpec {
        let s = &self.selftest;
        let mut spec = SelftestSpec::default();
        set(&mut spec.instances, s.instances);
        set(&mut spec.max_bits, s.max_bits);
        set(&mut spec.snr_range.0, s.snr_min);
        set(&mut spec.snr_range.1, s.snr_max);
        set(&mut spec.ordering_trials, s.ordering_trials);
        set(&mut spec.ordering_bits, s.ordering_bits);
        set(&mut spec.ordering_snr_db, s.ordering_snr_db);
        set(&mut spec.scenarios, s.scenarios.clone());
        set(&mut spec.master_seed, self.seed);
        spec
    }
}
