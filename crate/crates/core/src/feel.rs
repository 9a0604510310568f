//! Federated edge learning over the simulated uplink.
//!
//! A multinomial logistic regression is trained on Gaussian class clusters.
//! Each iteration two devices train locally from the global model and upload
//! through the configured link; the server's aggregate becomes the next
//! global model.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioKind;
use crate::error::{Error, Result};
use crate::ofdm::OfdmConfig;
use crate::protocol::{
    aggregate_models, run_analog_round, run_digital_round, AnalogConfig, DecoderKind, LinkConfig,
    RoundConfig, NUM_SELECTED,
};
use crate::quantizer::QuantizerConfig;
use crate::rng::{derive, stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub classes: usize,
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the class means; samples have unit variance.
    pub separation: f64,
    /// Share of the training set dealt uniformly at random.
    pub iid_fraction: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 16,
            train: 1000,
            test: 200,
            separation: 0.6,
            iid_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Train and test sets drawn from the same clusters, classes balanced.
pub fn synthetic_dataset(spec: &DatasetSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    if spec.classes < 2 || spec.dim < 1 {
        return Err(Error::Config("dataset needs at least 2 classes and 1 feature".into()));
    }
    let mut rng = stream(seed, Stream::Data);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut draw = |n: usize| {
        let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
        labels.shuffle(&mut rng);
        let features = labels
            .iter()
            .map(|&c| {
                means[c]
                    .iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Dataset {
            features,
            labels,
            classes: spec.classes,
        }
    };
    let train = draw(spec.train);
    let test = draw(spec.test);
    Ok((train, test))
}

/// Deal sample indices to devices: a random share in equal parts, then the
/// rest sorted by label in contiguous equal blocks.
pub fn make_noniid_partition(
    labels: &[usize],
    num_devices: usize,
    iid_fraction: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if num_devices == 0 {
        return Err(Error::Config("no devices".into()));
    }
    if !(0.0..=1.0).contains(&iid_fraction) {
        return Err(Error::Config(format!("iid fraction {iid_fraction} outside [0, 1]")));
    }
    let n_iid = (iid_fraction * n as f64).round() as usize;
    let n_sorted = n - n_iid;
    if n_iid % num_devices != 0 || n_sorted % num_devices != 0 {
        return Err(Error::Config(format!(
            "{n} samples ({n_iid} random, {n_sorted} sorted) do not split over {num_devices} devices"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Stream::Partition));
    let (iid, rest) = order.split_at_mut(n_iid);
    rest.sort_by_key(|&i| (labels[i], i));
    let (a, b) = (n_iid / num_devices, n_sorted / num_devices);
    Ok((0..num_devices)
        .map(|d| {
            let mut s = iid[d * a..(d + 1) * a].to_vec();
            s.extend_from_slice(&rest[d * b..(d + 1) * b]);
            s
        })
        .collect())
}

/// Multinomial logistic regression, `classes × dim` weights plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyModel {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TinyModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn num_params(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Length {
                context: "model parameters",
                expected: self.num_params(),
                actual: p.len(),
            });
        }
        let (w, b) = p.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let w = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (c, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / data.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 0.05,
            batch_size: 5,
            weight_decay: 0.01,
        }
    }
}

/// Minibatch SGD on cross-entropy over `indices`, reshuffled every epoch.
pub fn local_train(
    model: &TinyModel,
    data: &Dataset,
    indices: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> TinyModel {
    let mut m = model.clone();
    if indices.is_empty() || cfg.epochs == 0 {
        return m;
    }
    let mut rng = stream(seed, Stream::Selection);
    let mut order = indices.to_vec();
    let (c, d) = (m.classes, m.dim);
    let mut gw = vec![0.0; c * d];
    let mut gb = vec![0.0; c];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &data.features[i];
                let z = m.logits(x);
                let zmax = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
                let total: f64 = e.iter().sum();
                for k in 0..c {
                    let r = e[k] / total - f64::from(u8::from(k == data.labels[i]));
                    gb[k] += r;
                    for (g, xv) in gw[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += r * xv;
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            let decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
            for (w, g) in m.weights.iter_mut().zip(&gw) {
                *w = decay * *w - step * g;
            }
            for (b, g) in m.bias.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
    }
    m
}

/// How local models reach the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uplink {
    /// Error-free averaging of the unquantized models.
    Ideal,
    Digital,
    AnalogMisaligned,
    AnalogAligned,
}

impl Uplink {
    pub const ALL: [Uplink; 4] = [
        Uplink::Ideal,
        Uplink::Digital,
        Uplink::AnalogMisaligned,
        Uplink::AnalogAligned,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Uplink::Ideal => "ideal",
            Uplink::Digital => "digital",
            Uplink::AnalogMisaligned => "analog-misaligned",
            Uplink::AnalogAligned => "analog-aligned",
        }
    }
}

impl std::str::FromStr for Uplink {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Uplink::ALL
            .into_iter()
            .find(|u| u.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown uplink '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeelConfig {
    pub num_devices: usize,
    pub devices_per_round: usize,
    pub iterations: usize,
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub uplink: Uplink,
    pub quantizer: QuantizerConfig,
    pub decoder: DecoderKind,
    pub scenario: ScenarioKind,
    pub snr_db: f64,
    pub analog_repeats: usize,
    pub ofdm: OfdmConfig,
}

impl Default for FeelConfig {
    fn default() -> Self {
        Self {
            num_devices: 40,
            devices_per_round: NUM_SELECTED,
            iterations: 100,
            train: TrainConfig::default(),
            dataset: DatasetSpec::default(),
            uplink: Uplink::Digital,
            quantizer: QuantizerConfig::default(),
            decoder: DecoderKind::Rsjd(512),
            scenario: ScenarioKind::NearRealistic,
            snr_db: 20.0,
            analog_repeats: 13,
            ofdm: OfdmConfig::default(),
        }
    }
}

impl FeelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.devices_per_round == 0 || self.devices_per_round > self.num_devices {
            return Err(Error::Config(format!(
                "{} devices per round out of {}",
                self.devices_per_round, self.num_devices
            )));
        }
        if self.uplink != Uplink::Ideal && self.devices_per_round != NUM_SELECTED {
            return Err(Error::Config(format!(
                "over-the-air uplinks aggregate exactly {NUM_SELECTED} devices"
            )));
        }
        self.quantizer.validate()
    }

    fn round(&self) -> RoundConfig {
        RoundConfig {
            num_selected: self.devices_per_round,
            decoder: self.decoder,
            quantizer: self.quantizer,
            link: LinkConfig {
                scenario: self.scenario,
                snr_db: self.snr_db,
                ofdm: self.ofdm.clone(),
                ..Default::default()
            },
        }
    }

    fn analog(&self) -> AnalogConfig {
        AnalogConfig {
            repeats: self.analog_repeats,
            aligned: self.uplink == Uplink::AnalogAligned,
            scenario: self.scenario,
            snr_db: self.snr_db,
            ofdm: self.ofdm.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeelTrace {
    /// Test accuracy after each iteration.
    pub accuracy: Vec<f64>,
    /// Parameters clamped before digital upload, summed over the run.
    pub clipped: usize,
    pub sum_bit_errors: usize,
    pub total_sum_bits: usize,
}

impl FeelTrace {
    pub fn final_accuracy(&self) -> f64 {
        self.accuracy.last().copied().unwrap_or(0.0)
    }
}

/// Sub-seeds of one iteration.
fn iteration_seed(seed: u64, i: usize) -> u64 {
    derive(derive(seed, 0x46454), i as u64)
}

/// Devices chosen in iteration `i`, in increasing order.
pub fn select_devices(num_devices: usize, per_round: usize, seed: u64, i: usize) -> Vec<usize> {
    let mut rng = stream(iteration_seed(seed, i), Stream::Selection);
    let mut v = index::sample(&mut rng, num_devices, per_round).into_vec();
    v.sort_unstable();
    v
}

/// Per-device training seed for iteration `i`.
pub fn training_seed(seed: u64, i: usize, device: usize) -> u64 {
    derive(derive(iteration_seed(seed, i), 1), device as u64)
}

/// The dataset, partition and test set `run_feel` uses for `seed`.
pub fn feel_setup(cfg: &FeelConfig, seed: u64) -> Result<(Dataset, Dataset, Vec<Vec<usize>>)> {
    let (train, test) = synthetic_dataset(&cfg.dataset, seed)?;
    let parts = make_noniid_partition(&train.labels, cfg.num_devices, cfg.dataset.iid_fraction, seed)?;
    Ok((train, test, parts))
}

pub fn run_feel(cfg: &FeelConfig, seed: u64) -> Result<FeelTrace> {
    cfg.validate()?;
    let (train, test, parts) = feel_setup(cfg, seed)?;
    let mut global = TinyModel::zeros(cfg.dataset.classes, cfg.dataset.dim);
    let round = cfg.round();
    let analog = cfg.analog();
    let mut trace = FeelTrace::default();
    for i in 0..cfg.iterations {
        let locals: Vec<Vec<f64>> = select_devices(cfg.num_devices, cfg.devices_per_round, seed, i)
            .into_iter()
            .map(|d| local_train(&global, &train, &parts[d], &cfg.train, training_seed(seed, i, d)).params())
            .collect();
        let link_seed = derive(iteration_seed(seed, i), 2);
        let next = match cfg.uplink {
            Uplink::Ideal => {
                let mut sum = vec![0.0; global.num_params()];
                for p in &locals {
                    sum.iter_mut().zip(p).for_each(|(s, v)| *s += v);
                }
                aggregate_models(&sum, locals.len())
            }
            Uplink::Digital => {
                let r = run_digital_round(&locals[0], &locals[1], &round, link_seed)?;
                trace.clipped += r.diagnostics.clipped;
                trace.sum_bit_errors += r.diagnostics.sum_bit_errors;
                trace.total_sum_bits += r.diagnostics.total_sum_bits;
                r.aggregated
            }
            Uplink::AnalogMisaligned | Uplink::AnalogAligned => {
                run_analog_round(&locals[0], &locals[1], &analog, link_seed)?.aggregated
            }
        };
        global.set_params(&next)?;
        trace.accuracy.push(global.accuracy(&test));
    }
    Ok(trace)
}
