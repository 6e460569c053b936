use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use serde::Serialize;
use symtomo::analysis::{
    bootstrap, dataset_symmetric_bound, dicke_spectrum, estimate_noise_params, qfi,
    state_symmetric_bound, witness_expectation, Generator, ReconstructionPipeline, Statistic,
};
use symtomo::measurements::{default_full_settings, default_pi_settings, Direction, Scheme};
use symtomo::reconstruct::{ml_fit, subset_convergence_study, ReconstructionResult, SolverConfig};
use symtomo::spin_rep::{embed_to_full, SpinAxis, State};
use symtomo::synth::{noise_state, sample_dataset, Dataset, NoiseParams};

use crate::output::{self, resolve, sha256_hex};
use crate::{AnalyzeArgs, FitArgs, SchemeArg, SolverArgs, SynthArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 2,
            CliError::Io(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) | CliError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<symtomo::Error> for CliError {
    fn from(e: symtomo::Error) -> Self {
        match e {
            symtomo::Error::Io(_) => CliError::Io(e.to_string()),
            symtomo::Error::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Exit code for a finished fit.
pub const NOT_CONVERGED: u8 = 3;

fn read_state(path: &Path) -> Result<State, CliError> {
    let bytes = output::read(path)?;
    let state: State = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: not a state file: {e}", path.display())))?;
    let check = match &state {
        State::Pi(s) => s.validate(1e-6),
        State::Full(s) => s.validate(1e-6),
    };
    check.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(state)
}

fn read_dataset(path: &Path) -> Result<(Dataset, String), CliError> {
    let bytes = output::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))?;
    let d = Dataset::from_json_str(text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((d, sha256_hex(&bytes)))
}

fn solver_config(a: &SolverArgs) -> Result<SolverConfig, CliError> {
    let mut c = SolverConfig::default();
    if let Some(v) = a.max_iterations {
        c.max_iterations = v;
    }
    if let Some(v) = a.tolerance {
        c.relative_likelihood_tolerance = v;
    }
    if let Some(v) = a.backtracking_shrink {
        c.backtracking_shrink = v;
    }
    c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Pi => "pi",
        Scheme::Full => "full",
    }
}

pub fn synth(a: &SynthArgs) -> Result<ExitCode, CliError> {
    if !(a.events.is_finite() && a.events >= 1.0 && a.events.fract() == 0.0 && a.events <= u64::MAX as f64) {
        return Err(CliError::Usage(format!("--events must be a positive integer, got {}", a.events)));
    }
    let events = a.events as u64;
    let mut metadata = BTreeMap::new();
    let state: State = match &a.state {
        Some(path) => {
            let s = read_state(path)?;
            metadata.insert("source".into(), format!("state sha256:{}", sha256_hex(&output::read(path)?)));
            s
        }
        None => {
            if a.n != 6 {
                return Err(CliError::Usage(format!(
                    "the noise model is a six-qubit state; use --state for n={}",
                    a.n
                )));
            }
            let params = NoiseParams::new(a.q, a.lambda).map_err(|e| CliError::Usage(e.to_string()))?;
            metadata.insert("source".into(), "noise model".into());
            metadata.insert("q".into(), a.q.to_string());
            metadata.insert("lambda".into(), a.lambda.to_string());
            noise_state(params)?.into()
        }
    };
    let n = state.n_qubits();
    if a.state.is_some() && a.n != n && a.n != 6 {
        return Err(CliError::Usage(format!("--n {} does not match the {n}-qubit state", a.n)));
    }
    let (state, settings) = match a.scheme {
        SchemeArg::Pi => (state, default_pi_settings(n)?),
        SchemeArg::Full => {
            let full: State = match state {
                State::Pi(s) => embed_to_full(&s)?.into(),
                s => s,
            };
            (full, default_full_settings(n)?)
        }
    };
    let mut d = sample_dataset(&state, &settings, events, a.seed)?;
    d.metadata.extend(metadata);
    let path = resolve(a.out.as_deref(), "dataset.json");
    output::write(&path, d.to_json_string()?.as_bytes())?;
    if let Some(p) = &a.state_out {
        output::write_json(p, &state)?;
    }
    println!(
        "wrote {}: {} qubits, {} scheme, {} settings, {} events per setting, {} events in total",
        path.display(),
        n,
        scheme_name(d.scheme()),
        d.n_settings(),
        events,
        d.totals().iter().sum::<u64>()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SubsetSize {
    size: usize,
    mean_fidelity: f64,
    converged_trials: usize,
    trials: Vec<SubsetTrialRow>,
}

#[derive(Serialize)]
struct SubsetTrialRow {
    trial: usize,
    fidelity: f64,
    converged: bool,
    indices: Vec<usize>,
}

#[derive(Serialize)]
struct SubsetReport {
    seed: u64,
    trials_per_size: usize,
    sizes: Vec<SubsetSize>,
}

#[derive(Serialize)]
struct FitReport {
    dataset: String,
    dataset_sha256: String,
    scheme: &'static str,
    n_qubits: usize,
    n_settings: usize,
    config: SolverConfig,
    converged: bool,
    iterations: usize,
    final_log_likelihood: f64,
    optimality_residual: f64,
    rank_deficient: bool,
    state_file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    subset_study: Option<SubsetReport>,
}

#[derive(Serialize)]
struct HistogramRow {
    size: usize,
    fidelity_lower: f64,
    count: usize,
    probability: f64,
}

pub fn fit(a: &FitArgs) -> Result<ExitCode, CliError> {
    let config = solver_config(&a.solver)?;
    let (d, digest) = read_dataset(&a.dataset)?;
    let (result, study): (ReconstructionResult, Option<SubsetReport>) = if a.subset.is_empty() {
        if a.csv.is_some() {
            return Err(CliError::Usage("--csv needs --subset".into()));
        }
        (ml_fit(&d, &config)?, None)
    } else {
        let seed = a
            .seed
            .ok_or_else(|| CliError::Usage("--seed is required with --subset".into()))?;
        if a.trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        let study = subset_convergence_study(&d, &a.subset, a.trials, seed, &config)?;
        if let Some(p) = &a.csv {
            let rows: Vec<HistogramRow> = study
                .histogram
                .iter()
                .map(|b| HistogramRow {
                    size: b.size,
                    fidelity_lower: b.fidelity,
                    count: b.count,
                    probability: b.probability,
                })
                .collect();
            output::write_csv(p, &rows)?;
        }
        let sizes = a
            .subset
            .iter()
            .map(|&size| {
                let trials: Vec<SubsetTrialRow> = study
                    .trials
                    .iter()
                    .filter(|t| t.size == size)
                    .map(|t| SubsetTrialRow {
                        trial: t.trial,
                        fidelity: t.fidelity,
                        converged: t.converged,
                        indices: t.indices.clone(),
                    })
                    .collect();
                SubsetSize {
                    size,
                    mean_fidelity: study.mean_fidelity(size).unwrap_or(f64::NAN),
                    converged_trials: trials.iter().filter(|t| t.converged).count(),
                    trials,
                }
            })
            .collect();
        let report = SubsetReport {
            seed,
            trials_per_size: a.trials,
            sizes,
        };
        (study.reference, Some(report))
    };

    let state_path = resolve(a.out.as_deref(), "state.json");
    output::write_json(&state_path, &result.state)?;
    let report = FitReport {
        dataset: a.dataset.display().to_string(),
        dataset_sha256: digest,
        scheme: scheme_name(d.scheme()),
        n_qubits: d.n_qubits,
        n_settings: d.n_settings(),
        config,
        converged: result.converged,
        iterations: result.iterations,
        final_log_likelihood: result.final_log_likelihood,
        optimality_residual: result.optimality_residual,
        rank_deficient: result.rank_deficient,
        state_file: state_path.display().to_string(),
        subset_study: study,
    };
    let report_path = resolve(a.report.as_deref(), "fit_report.json");
    output::write_json(&report_path, &report)?;
    println!(
        "fit {}: converged={} iterations={} log-likelihood={:.6} residual={:.2e}",
        a.dataset.display(),
        result.converged,
        result.iterations,
        result.final_log_likelihood,
        result.optimality_residual
    );
    if let Some(s) = &report.subset_study {
        for size in &s.sizes {
            println!("subset size {}: mean fidelity {:.4} over {} trials", size.size, size.mean_fidelity, s.trials_per_size);
        }
    }
    if !result.converged {
        eprintln!("error: reconstruction did not converge");
        return Ok(ExitCode::from(NOT_CONVERGED));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BootstrapSection {
    replicas: usize,
    seed: u64,
    failed: usize,
    std: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct AnalysisReport {
    n_qubits: usize,
    dicke_spectrum: Vec<f64>,
    symmetric_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    qfi_sx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_s_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<BootstrapSection>,
    notices: Vec<String>,
}

#[derive(Serialize)]
struct StatisticRow {
    statistic: String,
    value: f64,
    std: Option<f64>,
}

fn has_xyz(d: &Dataset) -> bool {
    d.scheme() == Scheme::Pi
        && [Direction::x_axis(), Direction::y_axis(), Direction::z_axis()]
            .into_iter()
            .all(|axis| d.axis_setting(axis).is_some())
}

pub fn analyze(a: &AnalyzeArgs) -> Result<ExitCode, CliError> {
    let config = solver_config(&a.solver)?;
    let dataset = a.dataset.as_deref().map(read_dataset).transpose()?.map(|(d, _)| d);
    if a.bootstrap.is_some() && (dataset.is_none() || a.seed.is_none()) {
        return Err(CliError::Usage("--bootstrap needs --dataset and --seed".into()));
    }
    let state = match (&a.state, &dataset) {
        (Some(p), _) => read_state(p)?,
        (None, Some(d)) => ml_fit(d, &config)?.state,
        (None, None) => unreachable!("clap requires --state or --dataset"),
    };
    let n = state.n_qubits();
    if let Some(d) = &dataset {
        if d.n_qubits != n {
            return Err(CliError::Usage(format!(
                "state has {n} qubits but the dataset has {}",
                d.n_qubits
            )));
        }
    }
    let mut notices = Vec::new();
    let spectrum = dicke_spectrum(&state)?;
    let noise = estimate_noise_params(spectrum.get(2), spectrum.get(3), spectrum.get(4));
    let (q, lambda) = match &noise {
        Ok(est) => {
            if est.out_of_model {
                notices.push("noise parameters were clamped to the model range".to_string());
            }
            if est.lambda_degenerate {
                notices.push("F2 + F4 = 0; lambda set to 0".to_string());
            }
            (Some(est.params.q), Some(est.params.lambda))
        }
        Err(_) => {
            notices.push("noise parameters omitted: F2 + F3 + F4 = 0".to_string());
            (None, None)
        }
    };
    let qfi_sx = qfi(&state, &Generator::Spin(SpinAxis::X))?;
    let witness = if n == 6 {
        Some(witness_expectation(&state)?)
    } else {
        notices.push(format!("witness omitted: defined for 6 qubits, state has {n}"));
        None
    };
    let bound_from_data = dataset.as_ref().is_some_and(has_xyz);
    let p_s_bound = match &dataset {
        Some(d) if bound_from_data => Some(dataset_symmetric_bound(d)?),
        _ => match state_symmetric_bound(&state) {
            Ok(b) => {
                notices.push("p_s_bound evaluated on exact probabilities of the state".to_string());
                Some(b)
            }
            Err(e) => {
                notices.push(format!("p_s_bound omitted: {e}"));
                None
            }
        },
    };

    let boot = match (a.bootstrap, &dataset, a.seed) {
        (Some(b), Some(d), Some(seed)) => {
            let mut statistics: Vec<Statistic> = (0..=n).map(Statistic::DickeFidelity).collect();
            statistics.push(Statistic::SymmetricSum);
            if noise.is_ok() {
                statistics.extend([Statistic::NoiseQ, Statistic::NoiseLambda]);
            }
            statistics.push(Statistic::Qfi(SpinAxis::X));
            if n == 6 {
                statistics.push(Statistic::Witness);
            }
            if bound_from_data {
                statistics.push(Statistic::SymmetricBound);
            }
            let pipeline = ReconstructionPipeline { config: config.clone(), statistics };
            let r = bootstrap(d, &pipeline, b, seed)?;
            Some(BootstrapSection {
                replicas: r.replicas,
                seed,
                failed: r.failed,
                std: r.names.iter().cloned().zip(r.std_dev.iter().copied()).collect(),
            })
        }
        _ => None,
    };

    for notice in &notices {
        eprintln!("notice: {notice}");
    }
    let report = AnalysisReport {
        n_qubits: n,
        dicke_spectrum: spectrum.fidelities.clone(),
        symmetric_sum: spectrum.symmetric_sum,
        q,
        lambda,
        qfi_sx,
        witness,
        p_s_bound,
        bootstrap: boot,
        notices,
    };
    let path = resolve(a.out.as_deref(), "analysis.json");
    output::write_json(&path, &report)?;

    if let Some(p) = &a.csv {
        let std = |name: &str| report.bootstrap.as_ref().and_then(|b| b.std.get(name).copied());
        let mut rows: Vec<StatisticRow> = spectrum
            .fidelities
            .iter()
            .enumerate()
            .map(|(k, &v)| StatisticRow { statistic: format!("F{k}"), value: v, std: std(&format!("F{k}")) })
            .collect();
        let named = [
            ("symmetric_sum", Some(report.symmetric_sum)),
            ("q", report.q),
            ("lambda", report.lambda),
            ("qfi_sx", Some(report.qfi_sx)),
            ("witness", report.witness),
            ("p_s_bound", report.p_s_bound),
        ];
        for (name, value) in named {
            if let Some(v) = value {
                rows.push(StatisticRow { statistic: name.into(), value: v, std: std(name) });
            }
        }
        output::write_csv(p, &rows)?;
    }
    println!(
        "analysis written to {}: F{} = {:.4}, qfi_sx = {:.4}{}",
        path.display(),
        n / 2,
        spectrum.get(n / 2),
        qfi_sx,
        witness.map(|w| format!(", witness = {w:.4}")).unwrap_or_default()
    );
    Ok(ExitCode::SUCCESS)
}
