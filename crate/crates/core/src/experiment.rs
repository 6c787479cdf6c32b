//! Experiment configuration, parameter derivation, Monte Carlo orchestration
//! and metrics files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::channel::{
    family_mod_additive, family_z_or, generate_state_sequence, ChannelFamily, Segment, SegmentLaw, StateSequence,
    StateSpec,
};
use crate::error::{Error, Result};
use crate::info::{empirical_capacity, mutual_information, state_averaged_channel, z_channel_mi, Distribution};
use crate::protocol::{
    estimate_error_probs, m_lower, m_star, DecoderMode, ErrorEstimate, FeedbackMessage, ProtocolParams, Transcript,
    TrialOutcome,
};
use crate::seed::rng_from_seed;
use crate::types::CompositionSpec;

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "RATELESS_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`] when set. Later calls
/// are no-ops.
pub fn configure_threads() {
    let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    if let Some(n) = n.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    ModAdditive,
    ZOr,
    File(PathBuf),
}

impl FamilySpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "mod-additive" => Ok(Self::ModAdditive),
            "z-or" => Ok(Self::ZOr),
            other => match other.strip_prefix("file:") {
                Some(p) => Ok(Self::File(PathBuf::from(p.trim()))),
                None => Err(Error::InvalidParameter(format!("unknown channel family {other:?}"))),
            },
        }
    }

    pub fn build(&self) -> Result<ChannelFamily> {
        match self {
            Self::ModAdditive => Ok(family_mod_additive()),
            Self::ZOr => Ok(family_z_or()),
            Self::File(p) => ChannelFamily::load(p),
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| Error::InvalidParameter(format!("bad {what} entry {v:?}"))))
        .collect()
}

/// Parses a state-sequence description:
///
/// ```text
/// iid 0.89,0.11
/// exact 0.89,0.11
/// periodic 0,1,1
/// piecewise 0.5:0 0.5:1        (fraction:state or fraction:q0/q1/..)
/// file path/to/states.txt
/// ```
pub fn parse_state_spec(s: &str) -> Result<StateSpec> {
    let s = s.trim();
    let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
    let rest = rest.trim();
    let dist = |r: &str| Distribution::new(parse_list::<f64>(r, "probability")?);
    match kind {
        "iid" => Ok(StateSpec::Iid(dist(rest)?)),
        "exact" => Ok(StateSpec::ExactType(dist(rest)?)),
        "periodic" => Ok(StateSpec::Periodic(parse_list(rest, "state")?)),
        "file" => Ok(StateSpec::File(PathBuf::from(rest))),
        "piecewise" => rest
            .split_whitespace()
            .map(|seg| {
                let (f, law) = seg
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidParameter(format!("segment {seg:?} needs fraction:law")))?;
                let fraction = f.parse().map_err(|_| Error::InvalidParameter(format!("bad fraction {f:?}")))?;
                let law = if law.contains('/') {
                    SegmentLaw::Iid(Distribution::new(parse_list(&law.replace('/', ","), "probability")?)?)
                } else {
                    SegmentLaw::Fixed(law.parse().map_err(|_| Error::InvalidParameter(format!("bad state {law:?}")))?)
                };
                Ok(Segment { fraction, law })
            })
            .collect::<Result<Vec<_>>>()
            .map(StateSpec::Piecewise),
        _ => Err(Error::InvalidParameter(format!("unknown state kind {kind:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamMode {
    Direct { k: usize, b: usize, t: usize },
    Asymptotic { g: [f64; 3], kappa: [f64; 3] },
}

impl Default for ParamMode {
    fn default() -> Self {
        Self::Asymptotic { g: [0.35, 0.4, 0.2], kappa: [1.0; 3] }
    }
}

/// Pass/fail thresholds applied to the summary. Unset ones are not checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Thresholds {
    /// Mean rate must reach `reference - rho`; the reference defaults to the
    /// empirical mutual information of the realized state sequence.
    pub rate_reference: Option<f64>,
    pub rho: Option<f64>,
    pub min_rate: Option<f64>,
    pub max_eps_dec: Option<f64>,
    pub max_eps_ach: Option<f64>,
    pub max_empirical_capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub family: FamilySpec,
    pub state: StateSpec,
    pub state_seed: u64,
    pub mode: ParamMode,
    pub n: usize,
    pub eps1: f64,
    pub tau: f64,
    /// Input distribution as integer weights, e.g. `1,1`.
    pub input_weights: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub decoder: DecoderMode,
    pub r_target: f64,
    pub lambda_star: f64,
    pub thresholds: Thresholds,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            family: FamilySpec::ModAdditive,
            state: StateSpec::Iid(Distribution::new(vec![0.89, 0.11]).expect("valid")),
            state_seed: 0,
            mode: ParamMode::Direct { k: 512, b: 1024, t: 64 },
            n: 2_000_000,
            eps1: 0.08,
            tau: 0.05,
            input_weights: vec![1, 1],
            trials: 50,
            seed: 1,
            decoder: DecoderMode::Auto,
            r_target: 0.35,
            lambda_star: 0.002,
            thresholds: Thresholds::default(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a flat `key = value` file, or a TOML table when the path ends in
    /// `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml(&text)
        } else {
            Self::from_key_values(&text)
        }
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut direct = match cfg.mode {
            ParamMode::Direct { k, b, t } => (Some(k), Some(b), Some(t)),
            ParamMode::Asymptotic { .. } => (None, None, None),
        };
        let mut asym = ([0.35, 0.4, 0.2], [1.0; 3]);
        let mut mode = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value, &mut direct, &mut asym, &mut mode)
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        cfg.mode = match mode.as_deref().unwrap_or("direct") {
            "direct" => match direct {
                (Some(k), Some(b), Some(t)) => ParamMode::Direct { k, b, t },
                _ => return Err(Error::InvalidParameter("direct mode needs k, b and t".into())),
            },
            "asymptotic" => ParamMode::Asymptotic { g: asym.0, kappa: asym.1 },
            other => return Err(Error::InvalidParameter(format!("unknown parameter mode {other:?}"))),
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Parse { line: 0, msg: e.message().to_string() })?;
        let mut flat = String::new();
        for (key, value) in &table {
            let v = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Array(items) => {
                    items.iter().map(|x| x.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(",")
                }
                other => other.to_string(),
            };
            let _ = writeln!(flat, "{key} = {v}");
        }
        Self::from_key_values(&flat)
    }

    fn set(
        &mut self,
        key: &str,
        value: &str,
        direct: &mut (Option<usize>, Option<usize>, Option<usize>),
        asym: &mut ([f64; 3], [f64; 3]),
        mode: &mut Option<String>,
    ) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::InvalidParameter(format!("bad value {v:?} for {key}")))
        }
        match key {
            "name" => self.name = value.to_string(),
            "family" => self.family = FamilySpec::parse(value)?,
            "state" => self.state = parse_state_spec(value)?,
            "state_seed" => self.state_seed = num(key, value)?,
            "mode" => *mode = Some(value.to_string()),
            "n" => self.n = num(key, value)?,
            "k" => direct.0 = Some(num(key, value)?),
            "b" => direct.1 = Some(num(key, value)?),
            "t" => direct.2 = Some(num(key, value)?),
            "g1" => asym.0[0] = num(key, value)?,
            "g2" => asym.0[1] = num(key, value)?,
            "g3" => asym.0[2] = num(key, value)?,
            "kappa" => asym.1 = [num(key, value)?; 3],
            "kappa1" => asym.1[0] = num(key, value)?,
            "kappa2" => asym.1[1] = num(key, value)?,
            "kappa3" => asym.1[2] = num(key, value)?,
            "eps1" => self.eps1 = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "input" => self.input_weights = parse_list(value, "input weight")?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "decoder" => self.decoder = value.parse()?,
            "r_target" => self.r_target = num(key, value)?,
            "lambda_star" => self.lambda_star = num(key, value)?,
            "rate_reference" => self.thresholds.rate_reference = Some(num(key, value)?),
            "rho" => self.thresholds.rho = Some(num(key, value)?),
            "min_rate" => self.thresholds.min_rate = Some(num(key, value)?),
            "max_eps_dec" => self.thresholds.max_eps_dec = Some(num(key, value)?),
            "max_eps_ach" => self.thresholds.max_eps_ach = Some(num(key, value)?),
            "max_empirical_capacity" => self.thresholds.max_empirical_capacity = Some(num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::InvalidParameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Protocol parameters for a configuration. Direct mode passes `k, b, t`
/// through; asymptotic mode sets `k = ceil(k1 N^(2 g1))`, `b = ceil(k2 N^g2)`,
/// `t = |X| ceil(k3 N^g3 / |X|)` and then grows `b` until the input
/// composition fits `b - t`.
pub fn derive_params(cfg: &ExperimentConfig, x_size: usize) -> Result<ProtocolParams> {
    if cfg.input_weights.len() != x_size {
        return Err(Error::DimensionMismatch { expected: x_size, actual: cfg.input_weights.len() });
    }
    let denom: usize = cfg.input_weights.iter().sum();
    if denom == 0 {
        return Err(Error::InvalidParameter("input weights are all zero".into()));
    }
    let n = cfg.n as f64;
    let (k, b, t) = match &cfg.mode {
        ParamMode::Direct { k, b, t } => (*k, *b, *t),
        ParamMode::Asymptotic { g, kappa } => {
            let k = ceil_tol(kappa[0] * n.powf(2.0 * g[0]));
            let t = x_size * ceil_tol(kappa[2] * n.powf(g[2]) / x_size as f64);
            let mut b = ceil_tol(kappa[1] * n.powf(g[1]));
            if b > t {
                while (b - t) % denom != 0 {
                    b += 1;
                }
            }
            (k, b, t)
        }
    };
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if t >= b {
        return Err(Error::InvalidParameter(format!("training count t = {t} must be below chunk length b = {b}")));
    }
    let params = ProtocolParams {
        n: cfg.n,
        k,
        b,
        t,
        eps1: cfg.eps1,
        tau: cfg.tau,
        input_composition: CompositionSpec::from_weights(&cfg.input_weights, b - t)?,
        master_seed: cfg.seed,
    };
    params.validate(x_size)?;
    Ok(params)
}

/// Scaling assumptions an asymptotic configuration breaks. These are
/// reported, not enforced, since finite-N runs are still meaningful.
pub fn scaling_notes(mode: &ParamMode) -> Vec<String> {
    let ParamMode::Asymptotic { g, .. } = mode else {
        return Vec::new();
    };
    let mut notes = Vec::new();
    if !g.iter().all(|&x| x > 0.0 && x < 0.5) {
        notes.push(format!("exponents {g:?} not all in (0, 1/2)"));
    }
    if g[0] <= g[1] {
        notes.push(format!("g1 = {} <= g2 = {}, so b^2/k does not vanish", g[0], g[1]));
    }
    if g[1] <= g[2] {
        notes.push(format!("g2 = {} <= g3 = {}, so t/b does not vanish", g[1], g[2]));
    }
    notes
}

/// Round length checks for one transcript: rounds longer than
/// `m_star`, and decoded rounds shorter than `ceil(m_lower)`.
pub fn round_length_violations(tr: &Transcript, params: &ProtocolParams, c_max: f64) -> usize {
    let hi = m_star(params);
    let lo = (m_lower(params, c_max) - 1e-12).ceil() as usize;
    tr.rounds
        .iter()
        .filter(|r| r.chunks_used > hi || (r.outcome == FeedbackMessage::Decoded && r.chunks_used < lo))
        .count()
}

/// `feedback_bits / N <= 2 / b`, compared in integers.
pub fn feedback_within_bound(tr: &Transcript) -> bool {
    tr.feedback_bits_used * tr.b <= 2 * tr.n
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub observed: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub name: String,
    pub params: ProtocolParams,
    pub trials: usize,
    pub m_star: usize,
    pub m_lower: f64,
    /// `log2 min(|X|, |Y|)`.
    pub c_max: f64,
    pub mean_rate: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub eps_dec_hat: f64,
    pub eps_ach_hat: f64,
    pub rate_shortfall_hat: f64,
    pub empirical_mi: f64,
    pub empirical_capacity: f64,
    /// `mean_rate - empirical_mi`.
    pub rate_gap: f64,
    pub feedback_rate_max: f64,
    pub feedback_violations: usize,
    pub round_length_violations: usize,
    pub scaling_notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl ExperimentSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("n", p.n.to_string());
        kv("k", p.k.to_string());
        kv("b", p.b.to_string());
        kv("t", p.t.to_string());
        kv("eps1", fmt_sig(p.eps1));
        kv("tau", fmt_sig(p.tau));
        kv("m_star", self.m_star.to_string());
        kv("m_lower", fmt_sig(self.m_lower));
        kv("trials", self.trials.to_string());
        kv("seed", p.master_seed.to_string());
        kv("mean_rate", fmt_sig(self.mean_rate));
        kv("rate_min", fmt_sig(self.rate_min));
        kv("rate_max", fmt_sig(self.rate_max));
        kv("eps_dec_hat", fmt_sig(self.eps_dec_hat));
        kv("eps_ach_hat", fmt_sig(self.eps_ach_hat));
        kv("rate_shortfall_hat", fmt_sig(self.rate_shortfall_hat));
        kv("empirical_mi", fmt_sig(self.empirical_mi));
        kv("empirical_capacity", fmt_sig(self.empirical_capacity));
        kv("rate_gap", fmt_sig(self.rate_gap));
        kv("feedback_rate_max", fmt_sig(self.feedback_rate_max));
        kv("feedback_bound", fmt_sig(2.0 / p.b as f64));
        kv("feedback_violations", self.feedback_violations.to_string());
        kv("round_length_violations", self.round_length_violations.to_string());
        for note in &self.scaling_notes {
            kv("scaling_note", note.clone());
        }
        for c in &self.checks {
            kv(
                &format!("check.{}", c.name),
                format!("{} observed={} threshold={}", if c.passed { "pass" } else { "FAIL" }, fmt_sig(c.observed), fmt_sig(c.threshold)),
            );
        }
        kv("result", if self.passed() { "pass" } else { "FAIL" }.into());
        s
    }
}

pub const SUMMARY_HEADER: &str = "name,n,k,b,t,trials,mean_rate,rate_min,rate_max,eps_dec_hat,eps_ach_hat,\
empirical_mi,empirical_capacity,rate_gap,feedback_rate_max,round_length_violations,passed";

impl ExperimentSummary {
    pub fn csv_row(&self) -> String {
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.name,
            p.n,
            p.k,
            p.b,
            p.t,
            self.trials,
            fmt_sig(self.mean_rate),
            fmt_sig(self.rate_min),
            fmt_sig(self.rate_max),
            fmt_sig(self.eps_dec_hat),
            fmt_sig(self.eps_ach_hat),
            fmt_sig(self.empirical_mi),
            fmt_sig(self.empirical_capacity),
            fmt_sig(self.rate_gap),
            fmt_sig(self.feedback_rate_max),
            self.round_length_violations,
            self.passed() as u8,
        )
    }
}

pub const TRIAL_HEADER: &str =
    "trial,seed,T,rate,errors,feedback_bits,rounds,bad_noise_rounds,decoded_rounds,wrong_rounds,round_length_violations";

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub outcomes: Vec<TrialOutcome>,
    pub state_sequence: StateSequence,
}

impl ExperimentReport {
    pub fn trials_csv(&self) -> String {
        let p = &self.summary.params;
        let c_max = self.summary.c_max;
        let mut s = String::from(TRIAL_HEADER);
        s.push('\n');
        for o in &self.outcomes {
            let tr = &o.transcript;
            let wrong = tr.rounds.iter().filter(|r| r.correct == Some(false)).count();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                o.trial,
                o.seeds.master,
                tr.decoding_threshold,
                fmt_sig(tr.achieved_rate),
                o.prefix_error as u8,
                tr.feedback_bits_used,
                tr.rounds.len(),
                tr.bad_noise_rounds(),
                tr.decoded_rounds(),
                wrong,
                round_length_violations(tr, p, c_max),
            );
        }
        s
    }

    /// Writes `<name>_trials.csv` and `<name>_summary.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}_trials.csv", self.summary.name)), self.trials_csv())?;
        fs::write(dir.join(format!("{}_summary.txt", self.summary.name)), self.summary.to_text())?;
        Ok(())
    }
}

fn c_max_of(x: usize, y: usize) -> f64 {
    (x.min(y) as f64).log2()
}

/// Formats with 9 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).clamp(0, 30) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let family = cfg.family.build()?;
    let params = derive_params(cfg, family.x_size())?;
    let z = generate_state_sequence(&cfg.state, family.z_size(), cfg.n, &mut rng_from_seed(cfg.state_seed))?;
    if z.len() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, actual: z.len() });
    }
    let est = estimate_error_probs(&params, &family, &z, cfg.trials, cfg.seed, cfg.r_target, cfg.decoder)?;
    let summary = summarize(cfg, &params, &family, &z, &est)?;
    Ok(ExperimentReport { summary, outcomes: est.outcomes, state_sequence: z })
}

fn summarize(
    cfg: &ExperimentConfig,
    params: &ProtocolParams,
    family: &ChannelFamily,
    z: &StateSequence,
    est: &ErrorEstimate,
) -> Result<ExperimentSummary> {
    let c_max = c_max_of(family.x_size(), family.y_size());
    let averaged = state_averaged_channel(family, z)?;
    let empirical_mi = mutual_information(&params.input_distribution(), &averaged)?;
    let (empirical_capacity, _) = empirical_capacity(&averaged, 1e-12)?;
    let transcripts = est.outcomes.iter().map(|o| &o.transcript);
    let feedback_rate_max =
        transcripts.clone().map(|t| t.feedback_bits_used as f64 / t.n as f64).fold(0.0, f64::max);
    let feedback_violations = transcripts.clone().filter(|t| !feedback_within_bound(t)).count();
    let length_violations: usize = transcripts.map(|t| round_length_violations(t, params, c_max)).sum();

    let th = &cfg.thresholds;
    let mut checks = vec![
        Check {
            name: "feedback_rate",
            observed: feedback_violations as f64,
            threshold: 0.0,
            passed: feedback_violations == 0,
        },
        Check {
            name: "feedback_lambda_star",
            observed: 2.0 / params.b as f64,
            threshold: cfg.lambda_star,
            passed: 2.0 / (params.b as f64) < cfg.lambda_star,
        },
        Check {
            name: "round_length",
            observed: length_violations as f64,
            threshold: 0.0,
            passed: length_violations == 0,
        },
    ];
    if let Some(rho) = th.rho {
        let reference = th.rate_reference.unwrap_or(empirical_mi);
        let need = reference - rho;
        checks.push(Check { name: "rate_gap", observed: est.rate_mean, threshold: need, passed: est.rate_mean >= need });
    }
    if let Some(r) = th.min_rate {
        checks.push(Check { name: "min_rate", observed: est.rate_mean, threshold: r, passed: est.rate_mean >= r });
    }
    if let Some(e) = th.max_eps_dec {
        checks.push(Check { name: "eps_dec", observed: est.eps_dec_hat, threshold: e, passed: est.eps_dec_hat <= e });
    }
    if let Some(e) = th.max_eps_ach {
        checks.push(Check { name: "eps_ach", observed: est.eps_ach_hat, threshold: e, passed: est.eps_ach_hat <= e });
    }
    if let Some(c) = th.max_empirical_capacity {
        checks.push(Check {
            name: "empirical_capacity",
            observed: empirical_capacity,
            threshold: c,
            passed: empirical_capacity <= c,
        });
    }

    Ok(ExperimentSummary {
        name: cfg.name.clone(),
        params: params.clone(),
        trials: cfg.trials,
        m_star: m_star(params),
        m_lower: m_lower(params, c_max),
        c_max,
        mean_rate: est.rate_mean,
        rate_min: est.rate_min,
        rate_max: est.rate_max,
        eps_dec_hat: est.eps_dec_hat,
        eps_ach_hat: est.eps_ach_hat,
        rate_shortfall_hat: est.rate_shortfall_hat,
        empirical_mi,
        empirical_capacity,
        rate_gap: est.rate_mean - empirical_mi,
        feedback_rate_max,
        feedback_violations,
        round_length_violations: length_violations,
        scaling_notes: scaling_notes(&cfg.mode),
        checks,
    })
}

pub const PRESETS: [&str; 5] = ["bsc", "piecewise-demo", "zchannel-sweep", "bsc-sweep", "bsc-asymptotic"];

fn bsc_config(p: f64) -> ExperimentConfig {
    ExperimentConfig {
        state: StateSpec::Iid(Distribution::new(vec![1.0 - p, p]).expect("valid")),
        ..ExperimentConfig::default()
    }
}

/// Named experiment sets. Each entry is one summary row.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let bsc = || ExperimentConfig {
        name: "bsc".into(),
        thresholds: Thresholds {
            rate_reference: Some(1.0 - crate::info::binary_entropy(0.11)),
            rho: Some(0.15),
            max_eps_dec: Some(0.05),
            max_eps_ach: Some(0.05),
            ..Thresholds::default()
        },
        ..bsc_config(0.11)
    };
    match name {
        "bsc" => Ok(vec![bsc()]),
        "piecewise-demo" => Ok(vec![ExperimentConfig {
            name: "piecewise-demo".into(),
            state: StateSpec::Piecewise(vec![
                Segment { fraction: 0.5, law: SegmentLaw::Fixed(0) },
                Segment { fraction: 0.5, law: SegmentLaw::Fixed(1) },
            ]),
            thresholds: Thresholds { min_rate: Some(0.6), max_empirical_capacity: Some(1e-9), ..Thresholds::default() },
            ..ExperimentConfig::default()
        }]),
        "zchannel-sweep" => Ok([0.1, 0.3]
            .iter()
            .map(|&q| ExperimentConfig {
                name: format!("zchannel-q{q}"),
                family: FamilySpec::ZOr,
                state: StateSpec::Iid(Distribution::new(vec![1.0 - q, q]).expect("valid")),
                thresholds: Thresholds {
                    rate_reference: Some(z_channel_mi(0.5, q)),
                    rho: Some(0.15),
                    max_eps_dec: Some(0.05),
                    ..Thresholds::default()
                },
                ..ExperimentConfig::default()
            })
            .collect()),
        "bsc-sweep" => Ok((0..=6)
            .map(|i| {
                let p = i as f64 * 0.05;
                ExperimentConfig { name: format!("bsc-p{}", fmt_sig(p)), trials: 10, ..bsc_config(p) }
            })
            .collect()),
        "bsc-asymptotic" => Ok(vec![ExperimentConfig {
            name: "bsc-asymptotic".into(),
            mode: ParamMode::default(),
            n: 2_000_000,
            trials: 20,
            // b is about 332 here, so 2/b sits near 0.006.
            lambda_star: 0.01,
            thresholds: bsc().thresholds,
            ..bsc_config(0.11)
        }]),
        other => Err(Error::InvalidParameter(format!("unknown preset {other:?}; known: {}", PRESETS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_derivation() {
        let cfg = ExperimentConfig { n: 1_000_000, mode: ParamMode::default(), ..ExperimentConfig::default() };
        let p = derive_params(&cfg, 2).unwrap();
        assert_eq!(p.k, 15849);
        assert_eq!(p.b, 252);
        assert_eq!(p.t, 16);
        assert_eq!(p.c() % 2, 0);

        let odd = ExperimentConfig { input_weights: vec![1, 2], ..cfg.clone() };
        let p = derive_params(&odd, 2).unwrap();
        assert_eq!(p.c() % 3, 0);
        assert!(p.b >= 252);

        assert_eq!(scaling_notes(&cfg.mode).len(), 1);
        assert!(scaling_notes(&ParamMode::Asymptotic { g: [0.45, 0.3, 0.1], kappa: [1.0; 3] }).is_empty());
        assert_eq!(scaling_notes(&ParamMode::Asymptotic { g: [0.6, 0.1, 0.2], kappa: [1.0; 3] }).len(), 2);
    }

    #[test]
    fn direct_derivation_is_identity() {
        let cfg = ExperimentConfig::default();
        let p = derive_params(&cfg, 2).unwrap();
        assert_eq!((p.k, p.b, p.t, p.n), (512, 1024, 64, 2_000_000));
        let bad = ExperimentConfig { mode: ParamMode::Direct { k: 8, b: 64, t: 64 }, ..cfg.clone() };
        assert!(derive_params(&bad, 2).is_err());
        let zero = ExperimentConfig { mode: ParamMode::Direct { k: 0, b: 64, t: 8 }, ..cfg };
        assert!(derive_params(&zero, 2).is_err());
    }

    #[test]
    fn key_value_and_toml_agree() {
        let kv = "\
# comment
name = demo
family = z-or
state = piecewise 0.25:0 0.75:0.9/0.1
mode = direct
n = 4096
k = 8
b = 64
t = 8
eps1 = 0.1
trials = 3
decoder = exhaustive
rho = 0.2
";
        let toml = r#"
name = "demo"
family = "z-or"
state = "piecewise 0.25:0 0.75:0.9/0.1"
mode = "direct"
n = 4096
k = 8
b = 64
t = 8
eps1 = 0.1
trials = 3
decoder = "exhaustive"
rho = 0.2
"#;
        let a = ExperimentConfig::from_key_values(kv).unwrap();
        let b = ExperimentConfig::from_toml(toml).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, ParamMode::Direct { k: 8, b: 64, t: 8 });
        assert_eq!(a.decoder, DecoderMode::Exhaustive);
        assert!(matches!(ExperimentConfig::from_key_values("bogus = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(ExperimentConfig::from_key_values("mode = sideways").is_err());
    }

    #[test]
    fn state_spec_forms() {
        assert!(matches!(parse_state_spec("iid 0.9,0.1").unwrap(), StateSpec::Iid(_)));
        assert!(matches!(parse_state_spec("exact 0.9,0.1").unwrap(), StateSpec::ExactType(_)));
        assert_eq!(parse_state_spec("periodic 0,1,1").unwrap(), StateSpec::Periodic(vec![0, 1, 1]));
        assert!(parse_state_spec("sideways 1").is_err());
        assert!(parse_state_spec("piecewise 0.5").is_err());
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456.789012), "123456.789");
        assert_eq!(fmt_sig(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_sig(-2.5), "-2.5");
    }

    fn small(state: &str) -> ExperimentConfig {
        ExperimentConfig::from_key_values(&format!(
            "mode = direct\nn = 3200\nk = 8\nb = 64\nt = 8\neps1 = 0.1\ntrials = 4\nstate = {state}\nr_target = 0.05\nlambda_star = 0.05"
        ))
        .unwrap()
    }

    #[test]
    fn noiseless_summary() {
        let rep = run_experiment(&small("iid 1,0")).unwrap();
        let s = &rep.summary;
        assert_eq!(s.eps_dec_hat, 0.0);
        for o in &rep.outcomes {
            let tr = &o.transcript;
            assert_eq!(tr.achieved_rate, (8 * tr.decoded_rounds()) as f64 / 3200.0);
        }
        assert!((s.empirical_mi - 1.0).abs() < 1e-12);
        assert_eq!(s.round_length_violations, 0);
        assert!(s.passed());
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = small("iid 0.9,0.1");
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.summary.to_text(), b.summary.to_text());
        assert_eq!(a.trials_csv().lines().count(), 5);
        assert!(a.trials_csv().starts_with(TRIAL_HEADER));
    }

    #[test]
    fn thresholds_gate_result() {
        let mut cfg = small("iid 1,0");
        cfg.thresholds.min_rate = Some(0.99);
        let rep = run_experiment(&cfg).unwrap();
        assert!(!rep.summary.passed());
        assert!(rep.summary.to_text().contains("check.min_rate = FAIL"));
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let cfgs = preset(name).unwrap();
            assert!(!cfgs.is_empty());
            for c in &cfgs {
                let fam = c.family.build().unwrap();
                derive_params(c, fam.x_size()).unwrap();
            }
        }
        assert_eq!(preset("bsc-sweep").unwrap().len(), 7);
        assert!(preset("nope").is_err());
    }
}
