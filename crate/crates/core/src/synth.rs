//! Target states of the higher-order-emission noise model and synthetic
//! count data.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::measurements::{self, PauliString, Scheme, SettingSet};
use crate::spin_rep::{PIState, State};

/// Noise fraction `q` and coupling asymmetry `λ` of the six-qubit model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub q: f64,
    pub lambda: f64,
}

impl NoiseParams {
    pub fn new(q: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("q={q} outside [0, 1]")));
        }
        if !(-1.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda={lambda} outside [-1, 1]")));
        }
        Ok(NoiseParams { q, lambda })
    }
}

/// `(1-q) ρ_D3 + q [ 4/7 ρ_D3 + 3/14 ((1+λ) ρ_D2 + (1-λ) ρ_D4) ]` for six
/// qubits, with `ρ_Dn` the Dicke projectors.
pub fn noise_state(params: NoiseParams) -> Result<PIState> {
    let NoiseParams { q, lambda } = NoiseParams::new(params.q, params.lambda)?;
    let mut block = CMatrix::zeros(7, 7);
    block[(3, 3)] = Complex64::new(1.0 - q + q * 4.0 / 7.0, 0.0);
    block[(2, 2)] = Complex64::new(q * 3.0 / 14.0 * (1.0 + lambda), 0.0);
    block[(4, 4)] = Complex64::new(q * 3.0 / 14.0 * (1.0 - lambda), 0.0);
    PIState::symmetric(6, block)
}

/// Measured or simulated counts for every setting.
///
/// Outcomes are ordered by excitation number `n` for PI data and by the
/// bit-string value (qubit 0 most significant) for full data.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_qubits: usize,
    pub settings: SettingSet,
    pub counts: Vec<Vec<u64>>,
    pub metadata: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(
        n_qubits: usize,
        settings: SettingSet,
        counts: Vec<Vec<u64>>,
        metadata: BTreeMap<String, String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let d = Dataset {
            n_qubits,
            settings,
            counts,
            metadata,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn scheme(&self) -> Scheme {
        self.settings.scheme()
    }

    pub fn n_outcomes(&self) -> usize {
        match self.scheme() {
            Scheme::Pi => self.n_qubits + 1,
            Scheme::Full => 1 << self.n_qubits,
        }
    }

    pub fn n_settings(&self) -> usize {
        self.counts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Validation("n_qubits must be positive".into()));
        }
        if self.scheme() == Scheme::Full && self.n_qubits > crate::spin_rep::MAX_DENSE_QUBITS {
            return Err(Error::Validation(format!(
                "full-scheme data is limited to {} qubits",
                crate::spin_rep::MAX_DENSE_QUBITS
            )));
        }
        if self.settings.len() != self.counts.len() {
            return Err(Error::Validation(format!(
                "{} settings but {} count vectors",
                self.settings.len(),
                self.counts.len()
            )));
        }
        if let SettingSet::Full(labels) = &self.settings {
            for (s, l) in labels.iter().enumerate() {
                if l.len() != self.n_qubits {
                    return Err(Error::Validation(format!(
                        "setting {s}: Pauli label {l} does not have {} characters",
                        self.n_qubits
                    )));
                }
            }
        }
        let len = self.n_outcomes();
        for (s, c) in self.counts.iter().enumerate() {
            if c.len() != len {
                return Err(Error::Validation(format!(
                    "setting {s}: {} outcomes, expected {len} for the {} scheme",
                    c.len(),
                    self.scheme()
                )));
            }
        }
        Ok(())
    }

    pub fn totals(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.iter().sum()).collect()
    }

    /// Largest per-setting total.
    pub fn n_max(&self) -> u64 {
        self.totals().into_iter().max().unwrap_or(0)
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|c| {
                let t: u64 = c.iter().sum();
                c.iter()
                    .map(|&x| if t == 0 { 0.0 } else { x as f64 / t as f64 })
                    .collect()
            })
            .collect()
    }

    /// Data restricted to the settings at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::invalid("empty setting subset"));
        }
        let mut seen = vec![false; self.n_settings()];
        for &i in indices {
            if i >= self.n_settings() {
                return Err(Error::invalid(format!(
                    "setting index {i} out of range (dataset has {})",
                    self.n_settings()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("setting index {i} repeated")));
            }
        }
        Ok(Dataset {
            n_qubits: self.n_qubits,
            settings: self.settings.subset(indices),
            counts: indices.iter().map(|&i| self.counts[i].clone()).collect(),
            metadata: self.metadata.clone(),
            seed: self.seed,
        })
    }

    /// Index of the setting along a coordinate axis, if present (PI only).
    pub fn axis_setting(&self, axis: measurements::Direction) -> Option<usize> {
        self.settings
            .directions()?
            .iter()
            .position(|d| d.angle_to(&axis) < measurements::MIN_DIRECTION_SEPARATION)
    }
}

/// Counter-based random stream for a (seed, index) pair.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One multinomial draw of `total` events by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, total: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|p| !p.is_finite() || *p < -1e-9) {
        return Err(Error::Internal(format!(
            "outcome probabilities sum to {sum}, expected 1"
        )));
    }
    let mut remaining = total;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        if k + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        let draw = if remaining == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            remaining
        } else {
            Binomial::new(remaining, (p / mass).min(1.0))
                .map_err(|e| Error::Internal(e.to_string()))?
                .sample(rng)
        };
        out.push(draw);
        remaining -= draw;
        mass -= p;
    }
    Ok(out)
}

/// Exact outcome probabilities of `state` for every setting. Dense states
/// are twirled for PI settings and block states embedded for Pauli settings.
pub fn outcome_probabilities(state: &State, settings: &SettingSet) -> Result<Vec<Vec<f64>>> {
    match settings {
        SettingSet::Pi(_) => measurements::pi_probabilities(&state.to_pi()?, settings),
        SettingSet::Full(_) => measurements::full_probabilities(&state.to_full()?, settings),
    }
}

/// Samples `events_per_setting` events for every setting.
pub fn sample_dataset(
    state: &State,
    settings: &SettingSet,
    events_per_setting: u64,
    seed: u64,
) -> Result<Dataset> {
    if events_per_setting == 0 {
        return Err(Error::invalid("events_per_setting must be at least 1"));
    }
    sample_dataset_with_totals(state, settings, &vec![events_per_setting; settings.len()], seed)
}

/// Samples with an individual event total per setting.
pub fn sample_dataset_with_totals(
    state: &State,
    settings: &SettingSet,
    totals: &[u64],
    seed: u64,
) -> Result<Dataset> {
    if totals.len() != settings.len() {
        return Err(Error::invalid(format!(
            "{} totals for {} settings",
            totals.len(),
            settings.len()
        )));
    }
    let probs = outcome_probabilities(state, settings)?;
    let counts = probs
        .iter()
        .zip(totals)
        .enumerate()
        .map(|(s, (p, &t))| multinomial(&mut substream(seed, s as u64), t, p))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(state.n_qubits(), settings.clone(), counts, BTreeMap::new(), Some(seed))
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    scheme: Scheme,
    n_qubits: usize,
    settings: serde_json::Value,
    counts: Vec<Vec<i64>>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default)]
    seed: Option<u64>,
}

impl Serialize for Dataset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let settings = match &self.settings {
            SettingSet::Pi(d) => serde_json::to_value(d),
            SettingSet::Full(l) => serde_json::to_value(l),
        }
        .map_err(S::Error::custom)?;
        DatasetJson {
            scheme: self.scheme(),
            n_qubits: self.n_qubits,
            settings,
            counts: self
                .counts
                .iter()
                .map(|c| c.iter().map(|&x| x as i64).collect())
                .collect(),
            metadata: self.metadata.clone(),
            seed: self.seed,
        }
        .serialize(s)
    }
}

fn dataset_from_json(raw: DatasetJson) -> Result<Dataset> {
    let settings = match raw.scheme {
        Scheme::Pi => {
            let dirs: Vec<measurements::Direction> = serde_json::from_value(raw.settings)
                .map_err(|e| Error::Validation(format!("settings: {e}")))?;
            SettingSet::pi(dirs).map_err(|e| Error::Validation(format!("settings: {e}")))?
        }
        Scheme::Full => {
            let labels: Vec<PauliString> = serde_json::from_value(raw.settings)
                .map_err(|e| Error::Validation(format!("settings: {e}")))?;
            SettingSet::full(labels, raw.n_qubits)
                .map_err(|e| Error::Validation(format!("settings: {e}")))?
        }
    };
    let mut counts = Vec::with_capacity(raw.counts.len());
    for (s, row) in raw.counts.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (k, &c) in row.iter().enumerate() {
            if c < 0 {
                return Err(Error::Validation(format!(
                    "setting {s}, outcome {k}: negative count {c}"
                )));
            }
            out.push(c as u64);
        }
        counts.push(out);
    }
    Dataset::new(raw.n_qubits, settings, counts, raw.metadata, raw.seed)
}

impl Dataset {
    pub fn from_json_str(text: &str) -> Result<Dataset> {
        let raw: DatasetJson = serde_json::from_str(text)?;
        dataset_from_json(raw)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    d.validate()?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, d)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_json_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{default_pi_settings, Direction};
    use crate::spin_rep::dicke_state_pi;

    #[test]
    fn noise_state_limits() {
        let s = noise_state(NoiseParams::new(0.0, 0.3).unwrap()).unwrap();
        assert!(s.distance(&dicke_state_pi(6, 3).unwrap()) < 1e-15);

        let s = noise_state(NoiseParams::new(1.0, 0.0).unwrap()).unwrap();
        let b = s.symmetric_block();
        assert!((b[(2, 2)].re - 3.0 / 14.0).abs() < 1e-15);
        assert!((b[(3, 3)].re - 4.0 / 7.0).abs() < 1e-15);
        assert!((b[(4, 4)].re - 3.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn noise_params_range() {
        assert!(NoiseParams::new(1.1, 0.0).is_err());
        assert!(NoiseParams::new(0.5, -1.5).is_err());
        assert!(noise_state(NoiseParams { q: -0.1, lambda: 0.0 }).is_err());
    }

    #[test]
    fn degenerate_distribution_sampling() {
        let settings = SettingSet::pi(vec![Direction::z_axis()]).unwrap();
        let d = sample_dataset(&dicke_state_pi(6, 3).unwrap().into(), &settings, 500, 9).unwrap();
        assert_eq!(d.counts[0], vec![0, 0, 0, 500, 0, 0, 0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let settings = default_pi_settings(6).unwrap();
        let state: State = noise_state(NoiseParams::new(0.8, 0.2).unwrap()).unwrap().into();
        let a = sample_dataset(&state, &settings, 230, 42).unwrap();
        let b = sample_dataset(&state, &settings, 230, 42).unwrap();
        let c = sample_dataset(&state, &settings, 230, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.totals().iter().all(|&t| t == 230));
    }

    #[test]
    fn zero_events_rejected() {
        let settings = default_pi_settings(2).unwrap();
        let state: State = PIState::maximally_mixed(2).unwrap().into();
        assert!(sample_dataset(&state, &settings, 0, 1).is_err());
    }

    #[test]
    fn bad_probabilities_rejected() {
        let mut rng = substream(1, 0);
        assert!(matches!(
            multinomial(&mut rng, 10, &[0.5, 0.4]),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn validation_messages() {
        let text = r#"{"scheme":"pi","n_qubits":1,"settings":[{"theta":0.0,"phi":0.0}],
            "counts":[[3,-1]],"metadata":{},"seed":null}"#;
        let err = Dataset::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("setting 0") && err.contains("outcome 1"), "{err}");

        let text = r#"{"scheme":"pi","n_qubits":2,"settings":[{"theta":0.0,"phi":0.0}],
            "counts":[[1,1,1,1]]}"#;
        assert!(matches!(Dataset::from_json_str(text), Err(Error::Validation(_))));

        let text = "{\"scheme\":\"pi\",\n\"n_qubits\": oops}";
        match Dataset::from_json_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
