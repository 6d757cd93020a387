//! Reproduction driver: GHZ fidelities, up-sampled scans, the nine-qubit
//! encoding and the depolarizing scaling curves.
//!
//! CSV outputs start with `#` comment lines carrying the resolved config;
//! JSON outputs embed it under `"config"`. Nothing time- or thread-dependent
//! is written, so a rerun with the same flags reproduces every byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::{self, BlockModel, ScalingCurve};
use crate::circuits::{
    build_ghz_native, build_shor_encoder, compile_to_native, to_text, with_measurement_basis, Basis, CodeSpec, GhzSpec,
    Sign,
};
use crate::code::{self, VerdictRecord};
use crate::error::Error;
use crate::noise::{run_batch, BatchParams, NoiseConfig, NoiseModel};
use crate::qsim::{outcome_distribution, Bitstring, Circuit, Statevector};
use crate::rng::{aux_rng, derive_seed, TIE_BREAK_STREAM};
use crate::stats::{
    self, estimate_fz, sign_fraction, upsample_detect, upsample_majority_counts, FidelityEstimate, SampleSet,
};

#[derive(Debug, Parser)]
#[command(name = "shor-scaler", version, about = "Noisy GHZ / Shor-code up-sampling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prepare |GHZ_m±> and report F_z, F_x± and majority-vote logical fidelities.
    Ghz {
        #[command(flatten)]
        common: CommonArgs,
        /// Write per-bitstring counts (CSV) for every batch.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Sweep block sizes: GHZ fidelities, majority and detection decoders,
    /// closed-form predictions, and the best code size per decoder.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulate the full nine-qubit [[9,1,3]] encoder and compare with up-sampling.
    Encode913 {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-shot decoder verdicts (CSV); the sign is inserted before the extension.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Decoder whose verdicts go to --verdicts.
        #[arg(long, value_enum, default_value_t = DecoderArg::Majority)]
        verdict_decoder: DecoderArg,
    },
    /// Logical vs physical error curves of the depolarizing block model.
    Curves {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest physical error on the grid.
        #[arg(long, default_value_t = 0.1)]
        grid_max: f64,
        /// Number of grid points, including 0.
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        #[arg(long, value_enum, default_value_t = BlockModelArg::ErrorRate)]
        block_model: BlockModelArg,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Block size(s): `3`, `3,5,7` or `3-7`.
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long, value_enum, default_value_t = SignArg::Both)]
    pub sign: SignArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Both)]
    pub basis: BasisArg,
    /// Shots per batch.
    #[arg(long, default_value_t = 20_000)]
    pub shots: usize,
    /// Master seed.
    #[arg(long, env = "SHOR_SCALER_SEED", default_value_t = 1)]
    pub seed: u64,
    /// JSON calibration file; the bundled calibration is used otherwise.
    #[arg(long)]
    pub noise_config: Option<PathBuf>,
    /// Zero every error rate.
    #[arg(long)]
    pub noiseless: bool,
    /// Override the single-qubit gate error rate.
    #[arg(long)]
    pub p1: Option<f64>,
    /// Override the XX gate error rate for every m.
    #[arg(long)]
    pub p2: Option<f64>,
    /// Override the readout flip rate for every m.
    #[arg(long)]
    pub p_ro: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the native preparation circuits in the line format.
    #[arg(long)]
    pub dump_circuit: Option<PathBuf>,
    /// Worker threads for shot simulation (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
    Both,
}

impl SignArg {
    fn signs(self) -> Vec<Sign> {
        match self {
            SignArg::Plus => vec![Sign::Plus],
            SignArg::Minus => vec![Sign::Minus],
            SignArg::Both => vec![Sign::Plus, Sign::Minus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Z,
    X,
    Both,
}

impl BasisArg {
    fn has(self, b: Basis) -> bool {
        matches!(
            (self, b),
            (BasisArg::Both, _) | (BasisArg::Z, Basis::Z) | (BasisArg::X, Basis::X)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Majority,
    Detect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlockModelArg {
    ErrorRate,
    Literal,
}

impl From<BlockModelArg> for BlockModel {
    fn from(b: BlockModelArg) -> Self {
        match b {
            BlockModelArg::ErrorRate => BlockModel::ErrorRate,
            BlockModelArg::Literal => BlockModel::Literal,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse `3`, `3,5,7` or `3-7`.
pub fn parse_m_list(s: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("cannot parse m list {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Noise settings after applying file, flag overrides and `--noiseless`.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseSetup {
    pub source: String,
    pub noiseless: bool,
    #[serde(skip)]
    config: NoiseConfig,
    p1: Option<f64>,
    p2: Option<f64>,
    p_ro: Option<f64>,
}

impl NoiseSetup {
    pub fn from_args(a: &CommonArgs) -> CliResult<Self> {
        let (config, source) = match &a.noise_config {
            Some(p) => (NoiseConfig::load(p)?, p.display().to_string()),
            None => (NoiseConfig::default(), "builtin".to_string()),
        };
        Ok(NoiseSetup {
            source,
            noiseless: a.noiseless,
            config,
            p1: a.p1,
            p2: a.p2,
            p_ro: a.p_ro,
        })
    }

    fn apply(&self, mut model: NoiseModel) -> CliResult<NoiseModel> {
        if self.noiseless {
            return Ok(NoiseModel::noiseless());
        }
        if let Some(p) = self.p1 {
            model.p1 = p;
        }
        if let Some(p) = self.p2 {
            model.p2 = p;
        }
        if let Some(p) = self.p_ro {
            model.p_ro = p;
        }
        model.validate()?;
        Ok(model)
    }

    pub fn model_for(&self, m: usize) -> CliResult<NoiseModel> {
        if self.noiseless {
            return Ok(NoiseModel::noiseless());
        }
        let base = match self.config.model_for(m) {
            Ok(model) => model,
            // a flag can stand in for a missing table entry
            Err(_) if self.p2.is_some() => NoiseModel {
                p1: self.config.p1,
                p2: 0.0,
                p_ro: self.config.p_ro,
                rz_noisy: self.config.rz_noisy,
            },
            Err(e) => return Err(e.into()),
        };
        self.apply(base)
    }

    pub fn nine_qubit_model(&self) -> CliResult<NoiseModel> {
        if self.noiseless {
            return Ok(NoiseModel::noiseless());
        }
        self.apply(self.config.nine_qubit_model()?)
    }
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedConfig {
    command: &'static str,
    m: Vec<usize>,
    signs: Vec<Sign>,
    bases: Vec<Basis>,
    shots: usize,
    seed: u64,
    noise: NoiseSetup,
    models: BTreeMap<String, NoiseModel>,
    format: Format,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, serde_json::Value>,
}

struct Session {
    args: CommonArgs,
    m: Vec<usize>,
    signs: Vec<Sign>,
    noise: NoiseSetup,
}

impl Session {
    fn new(args: &CommonArgs, default_m: &str) -> CliResult<Self> {
        if args.shots == 0 {
            return Err(usage("--shots must be >= 1"));
        }
        if args.threads == Some(0) {
            return Err(usage("--threads must be >= 1"));
        }
        let m = parse_m_list(args.m.as_deref().unwrap_or(default_m))?;
        Ok(Session {
            args: args.clone(),
            m,
            signs: args.sign.signs(),
            noise: NoiseSetup::from_args(args)?,
        })
    }

    fn bases(&self) -> Vec<Basis> {
        [Basis::Z, Basis::X]
            .into_iter()
            .filter(|&b| self.args.basis.has(b))
            .collect()
    }

    fn check_sim_range(&self) -> CliResult<()> {
        if let Some(&bad) = self.m.iter().find(|&&m| !(2..=9).contains(&m)) {
            return Err(usage(format!("m = {bad} outside 2..=9")));
        }
        Ok(())
    }

    fn params(&self, seed: u64) -> BatchParams {
        BatchParams {
            n_shots: self.args.shots,
            master_seed: seed,
            threads: self.args.threads,
        }
    }

    fn resolved(&self, command: &'static str, models: BTreeMap<String, NoiseModel>) -> ResolvedConfig {
        ResolvedConfig {
            command,
            m: self.m.clone(),
            signs: self.signs.clone(),
            bases: self.bases(),
            shots: self.args.shots,
            seed: self.args.seed,
            noise: self.noise.clone(),
            models,
            format: self.args.format,
            extra: BTreeMap::new(),
        }
    }

    fn models(&self) -> CliResult<BTreeMap<String, NoiseModel>> {
        self.m
            .iter()
            .map(|&m| Ok((m.to_string(), self.noise.model_for(m)?)))
            .collect()
    }
}

fn sign_id(s: Sign) -> u64 {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

fn basis_id(b: Basis) -> u64 {
    match b {
        Basis::Z => 0,
        Basis::X => 1,
    }
}

const GHZ_TAG: u64 = 0x0067_687a;
const NINE_TAG: u64 = 0x0039_3133;

/// Seeded GHZ batch shared by `ghz`, `scan` and the up-sampled side of `encode913`.
fn ghz_batch(s: &Session, m: usize, sign: Sign, basis: Basis, model: &NoiseModel) -> CliResult<SampleSet> {
    let prep = build_ghz_native(&GhzSpec::new(m, sign)?);
    let circuit = with_measurement_basis(&prep, basis)?;
    let seed = derive_seed(s.args.seed, &[GHZ_TAG, m as u64, sign_id(sign), basis_id(basis)]);
    Ok(run_batch(&circuit, model, basis, sign, m, &s.params(seed))?)
}

fn tie_rng(seed: u64, tag: u64, m: usize, sign: Sign) -> crate::rng::SimRng {
    aux_rng(derive_seed(seed, &[tag, m as u64, sign_id(sign)]), TIE_BREAK_STREAM)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Est {
    value: f64,
    sigma: f64,
}

impl From<FidelityEstimate> for Est {
    fn from(e: FidelityEstimate) -> Self {
        Est {
            value: e.value,
            sigma: e.sigma,
        }
    }
}

fn est(successes: usize, trials: usize) -> CliResult<Est> {
    Ok(FidelityEstimate::from_counts(successes, trials)?.into())
}

/// Per-(m, sign) GHZ fidelities, plus the detection columns used by `scan`.
#[derive(Debug, Clone, Serialize)]
struct GhzRow {
    m: usize,
    prep_sign: Sign,
    fz: Option<Est>,
    fx_plus: Option<Est>,
    fx_minus: Option<Est>,
    fl_plus: Option<Est>,
    fl_minus: Option<Est>,
    ties: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detect: Option<DetectRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic: Option<AnalyticRow>,
}

#[derive(Debug, Clone, Serialize)]
struct DetectRow {
    detect_plus: Option<Est>,
    detect_minus: Option<Est>,
    #[serde(rename = "yield")]
    yield_: Est,
    kept: usize,
    groups: usize,
}

#[derive(Debug, Clone, Serialize)]
struct AnalyticRow {
    /// Empirical block success for the prepared sign.
    fx: f64,
    fl: f64,
    detect_fidelity: f64,
    #[serde(rename = "yield")]
    yield_: f64,
}

impl GhzRow {
    fn target_fl(&self) -> Option<f64> {
        match self.prep_sign {
            Sign::Plus => self.fl_plus.map(|e| e.value),
            Sign::Minus => self.fl_minus.map(|e| e.value),
        }
    }

    fn target_fx(&self) -> Option<f64> {
        match self.prep_sign {
            Sign::Plus => self.fx_plus.map(|e| e.value),
            Sign::Minus => self.fx_minus.map(|e| e.value),
        }
    }

    fn target_detect(&self) -> Option<f64> {
        let d = self.detect.as_ref()?;
        match self.prep_sign {
            Sign::Plus => d.detect_plus.map(|e| e.value),
            Sign::Minus => d.detect_minus.map(|e| e.value),
        }
    }
}

fn ghz_row(
    s: &Session,
    m: usize,
    sign: Sign,
    with_detect: bool,
    histograms: &mut Vec<(usize, Sign, Basis, Vec<usize>)>,
) -> CliResult<GhzRow> {
    let model = s.noise.model_for(m)?;
    let mut row = GhzRow {
        m,
        prep_sign: sign,
        fz: None,
        fx_plus: None,
        fx_minus: None,
        fl_plus: None,
        fl_minus: None,
        ties: None,
        detect: None,
        analytic: None,
    };
    for basis in s.bases() {
        let set = ghz_batch(s, m, sign, basis, &model)?;
        histograms.push((m, sign, basis, histogram(&set, m)));
        match basis {
            Basis::Z => row.fz = Some(estimate_fz(&set)?.into()),
            Basis::X => {
                row.fx_plus = Some(sign_fraction(&set, Sign::Plus)?.into());
                row.fx_minus = Some(sign_fraction(&set, Sign::Minus)?.into());
                let mut rng = tie_rng(s.args.seed, GHZ_TAG, m, sign);
                let c = upsample_majority_counts(&set, &mut rng)?;
                row.fl_plus = Some(est(c.plus, c.groups)?);
                row.fl_minus = Some(est(c.groups - c.plus, c.groups)?);
                row.ties = Some(c.ties);
                if with_detect {
                    let d = upsample_detect(&set)?;
                    let (dp, dm) = match d.fidelity {
                        None => (None, None),
                        Some(f) => {
                            let hits = (f.value * d.kept as f64).round() as usize;
                            let plus = if sign == Sign::Plus { hits } else { d.kept - hits };
                            (Some(est(plus, d.kept)?), Some(est(d.kept - plus, d.kept)?))
                        }
                    };
                    row.detect = Some(DetectRow {
                        detect_plus: dp,
                        detect_minus: dm,
                        yield_: d.yield_.into(),
                        kept: d.kept,
                        groups: d.groups,
                    });
                    let fx = row.target_fx().expect("x basis ran");
                    let (df, y) = analytic::detect_fidelity_yield(m, fx)?;
                    row.analytic = Some(AnalyticRow {
                        fx,
                        fl: analytic::logical_fidelity(m, fx)?,
                        detect_fidelity: df,
                        yield_: y,
                    });
                }
            }
        }
    }
    Ok(row)
}

fn histogram(set: &SampleSet, m: usize) -> Vec<usize> {
    let mut counts = vec![0usize; 1 << m];
    for shot in set.shots() {
        counts[shot.to_index()] += 1;
    }
    counts
}

fn opt_cell(e: Option<Est>) -> [String; 2] {
    match e {
        Some(e) => [e.value.to_string(), e.sigma.to_string()],
        None => [String::new(), String::new()],
    }
}

/// Small CSV table with `#` comment lines in front.
struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn render(&self) -> CliResult<Vec<u8>> {
        let mut buf = Vec::new();
        for c in &self.comments {
            writeln!(buf, "# {c}").expect("write to Vec");
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let to_err = |e: csv::Error| CliError::Run(Error::Config(format!("csv: {e}")));
            w.write_record(&self.header).map_err(to_err)?;
            for r in &self.rows {
                w.write_record(r).map_err(to_err)?;
            }
            w.flush().map_err(|e| CliError::Io {
                path: "<csv>".into(),
                source: e,
            })?;
        }
        Ok(buf)
    }
}

fn config_comment(cfg: &ResolvedConfig) -> String {
    format!("config: {}", serde_json::to_string(cfg).expect("config serializes"))
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => io::stdout().write_all(bytes).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

/// `dir/name.ext` -> `dir/name.<tag>.ext`.
pub fn sibling_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn dump_circuits(path: &Path, circuits: &[(String, Circuit)]) -> CliResult<()> {
    let mut text = String::new();
    for (label, c) in circuits {
        text.push_str(&format!("# {label}\n"));
        text.push_str(&to_text(c));
        text.push('\n');
    }
    write_out(Some(path), text.as_bytes())
}

fn ghz_circuits(s: &Session) -> CliResult<Vec<(String, Circuit)>> {
    let mut out = Vec::new();
    for &m in &s.m {
        for &sign in &s.signs {
            out.push((
                format!("ghz m={m} sign={sign}"),
                build_ghz_native(&GhzSpec::new(m, sign)?),
            ));
        }
    }
    Ok(out)
}

const GHZ_HEADER: [&str; 13] = [
    "m",
    "prep_sign",
    "Fz",
    "Fz_sigma",
    "Fx_plus",
    "Fx_plus_sigma",
    "Fx_minus",
    "Fx_minus_sigma",
    "FL_plus",
    "FL_plus_sigma",
    "FL_minus",
    "FL_minus_sigma",
    "ties",
];

fn table1_cells(r: &GhzRow) -> Vec<String> {
    let mut cells = vec![r.m.to_string(), r.prep_sign.to_string()];
    for e in [r.fz, r.fx_plus, r.fx_minus, r.fl_plus, r.fl_minus] {
        cells.extend(opt_cell(e));
    }
    cells.push(r.ties.map(|t| t.to_string()).unwrap_or_default());
    cells
}

#[derive(Serialize)]
struct GhzReport<'a> {
    config: &'a ResolvedConfig,
    rows: &'a [GhzRow],
}

fn cmd_ghz(args: &CommonArgs, histogram_path: Option<&Path>) -> CliResult<()> {
    let s = Session::new(args, "3")?;
    s.check_sim_range()?;
    let cfg = s.resolved("ghz", s.models()?);
    let mut rows = Vec::new();
    let mut hists = Vec::new();
    for &m in &s.m {
        for &sign in &s.signs {
            rows.push(ghz_row(&s, m, sign, false, &mut hists)?);
        }
    }
    let bytes = match args.format {
        Format::Json => json_bytes(&GhzReport {
            config: &cfg,
            rows: &rows,
        }),
        Format::Csv => {
            let mut t = Table::new(&GHZ_HEADER);
            t.comments.push("shor-scaler ghz".into());
            t.comments.push(config_comment(&cfg));
            t.rows = rows.iter().map(table1_cells).collect();
            t.render()?
        }
    };
    write_out(args.out.as_deref(), &bytes)?;
    if let Some(p) = histogram_path {
        let mut t = Table::new(&["m", "prep_sign", "basis", "bitstring", "count", "probability"]);
        t.comments.push("shor-scaler ghz histogram".into());
        t.comments.push(config_comment(&cfg));
        for (m, sign, basis, counts) in &hists {
            let total: usize = counts.iter().sum();
            for (i, &c) in counts.iter().enumerate() {
                t.rows.push(vec![
                    m.to_string(),
                    sign.to_string(),
                    basis.to_string(),
                    Bitstring::from_index(i, *m).to_string(),
                    c.to_string(),
                    (c as f64 / total as f64).to_string(),
                ]);
            }
        }
        write_out(Some(p), &t.render()?)?;
    }
    if let Some(p) = &args.dump_circuit {
        dump_circuits(p, &ghz_circuits(&s)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct OptimalSizes {
    prep_sign: Sign,
    majority_sampled: Option<usize>,
    majority_analytic: Option<usize>,
    detect_sampled: Option<usize>,
    detect_analytic: Option<usize>,
}

fn argmax(pairs: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, v) in pairs {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((m, v));
        }
    }
    best.map(|(m, _)| m)
}

fn optimal_sizes(rows: &[GhzRow], sign: Sign) -> CliResult<OptimalSizes> {
    let mine: Vec<&GhzRow> = rows.iter().filter(|r| r.prep_sign == sign).collect();
    let fx: BTreeMap<usize, f64> = mine.iter().filter_map(|r| Some((r.m, r.target_fx()?))).collect();
    let analytic_for = |d| -> CliResult<Option<usize>> {
        if fx.is_empty() {
            Ok(None)
        } else {
            Ok(Some(analytic::optimal_m(&fx, d)?))
        }
    };
    Ok(OptimalSizes {
        prep_sign: sign,
        majority_sampled: argmax(mine.iter().filter_map(|r| Some((r.m, r.target_fl()?)))),
        majority_analytic: analytic_for(stats::Decoder::Majority)?,
        detect_sampled: argmax(mine.iter().filter_map(|r| Some((r.m, r.target_detect()?)))),
        detect_analytic: analytic_for(stats::Decoder::Detect)?,
    })
}

#[derive(Serialize)]
struct ScanReport<'a> {
    config: &'a ResolvedConfig,
    rows: &'a [GhzRow],
    optimal: &'a [OptimalSizes],
}

fn cmd_scan(args: &CommonArgs) -> CliResult<()> {
    let s = Session::new(args, "3-7")?;
    s.check_sim_range()?;
    if !args.basis.has(Basis::X) {
        return Err(usage("scan needs X-basis batches (--basis x or both)"));
    }
    let cfg = s.resolved("scan", s.models()?);
    let mut rows = Vec::new();
    let mut hists = Vec::new();
    for &m in &s.m {
        for &sign in &s.signs {
            rows.push(ghz_row(&s, m, sign, true, &mut hists)?);
        }
    }
    let optimal: Vec<OptimalSizes> = s
        .signs
        .iter()
        .map(|&sign| optimal_sizes(&rows, sign))
        .collect::<CliResult<_>>()?;

    match args.format {
        Format::Json => write_out(
            args.out.as_deref(),
            &json_bytes(&ScanReport {
                config: &cfg,
                rows: &rows,
                optimal: &optimal,
            }),
        )?,
        Format::Csv => {
            let mut header: Vec<&str> = GHZ_HEADER.to_vec();
            header.extend(["FL_analytic", "detect_analytic", "yield_analytic"]);
            let mut t1 = Table::new(&header);
            t1.comments.push("shor-scaler scan".into());
            t1.comments.push(config_comment(&cfg));
            for o in &optimal {
                t1.comments.push(format!(
                    "optimal prep={} majority_sampled={} majority_analytic={} detect_sampled={} detect_analytic={}",
                    o.prep_sign,
                    fmt_opt(o.majority_sampled),
                    fmt_opt(o.majority_analytic),
                    fmt_opt(o.detect_sampled),
                    fmt_opt(o.detect_analytic)
                ));
            }
            let mut t2 = Table::new(&[
                "m",
                "prep_sign",
                "detect_plus",
                "detect_plus_sigma",
                "detect_minus",
                "detect_minus_sigma",
                "yield",
                "yield_sigma",
                "kept",
                "groups",
            ]);
            t2.comments = t1.comments.clone();
            for r in &rows {
                let mut cells = table1_cells(r);
                match &r.analytic {
                    Some(a) => cells.extend([a.fl.to_string(), a.detect_fidelity.to_string(), a.yield_.to_string()]),
                    None => cells.extend([String::new(), String::new(), String::new()]),
                }
                t1.rows.push(cells);
                if let Some(d) = &r.detect {
                    let mut c = vec![r.m.to_string(), r.prep_sign.to_string()];
                    c.extend(opt_cell(d.detect_plus));
                    c.extend(opt_cell(d.detect_minus));
                    c.extend(opt_cell(Some(d.yield_)));
                    c.extend([d.kept.to_string(), d.groups.to_string()]);
                    t2.rows.push(c);
                }
            }
            write_out(args.out.as_deref(), &t1.render()?)?;
            // the detection table goes next to the main output, or after it on stdout
            match &args.out {
                Some(p) => write_out(Some(&sibling_path(p, "detect")), &t2.render()?)?,
                None => {
                    write_out(None, b"\n")?;
                    write_out(None, &t2.render()?)?
                }
            }
        }
    }
    if let Some(p) = &args.dump_circuit {
        dump_circuits(p, &ghz_circuits(&s)?)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map(|m| m.to_string()).unwrap_or_else(|| "-".into())
}

#[derive(Debug, Clone, Serialize)]
struct StabilizerValue {
    name: String,
    sampled: Option<f64>,
    ideal: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EncodeRow {
    prep_sign: Sign,
    logical_plus: Option<Est>,
    logical_minus: Option<Est>,
    detect_fidelity: Option<Est>,
    detect_yield: Option<Est>,
    block_fidelity: Vec<Option<Est>>,
    block_fz: Vec<Option<Est>>,
    stabilizers: Vec<StabilizerValue>,
    upsampled_fl: Option<Est>,
    upsampled_minus_direct: Option<f64>,
}

#[derive(Serialize)]
struct EncodeReport<'a> {
    config: &'a ResolvedConfig,
    rows: &'a [EncodeRow],
}

fn stabilizer_names(spec: &CodeSpec) -> Vec<String> {
    let mut names: Vec<String> = spec
        .z_stabilizers()
        .iter()
        .map(|&(a, b)| format!("Z{}Z{}", a + 1, b + 1))
        .collect();
    names.extend(
        spec.x_stabilizers()
            .iter()
            .map(|sup| format!("X{}-{}", sup[0] + 1, sup[sup.len() - 1] + 1)),
    );
    names
}

/// Exact stabilizer expectations of a prepared (noiseless) state.
pub fn ideal_stabilizers(prep: &Circuit, spec: &CodeSpec) -> crate::error::Result<Vec<f64>> {
    let mut z_state = Statevector::zero(prep.n_qubits())?;
    z_state.run_ideal(prep)?;
    let z_dist = outcome_distribution(&z_state);
    let mut x_state = Statevector::zero(prep.n_qubits())?;
    x_state.run_ideal(&with_measurement_basis(prep, Basis::X)?)?;
    let x_dist = outcome_distribution(&x_state);
    let mut out: Vec<f64> = spec
        .z_stabilizers()
        .iter()
        .map(|&(a, b)| z_dist.z_parity_expectation(&[a, b]))
        .collect();
    out.extend(spec.x_stabilizers().iter().map(|sup| x_dist.z_parity_expectation(sup)));
    Ok(out)
}

fn parity_mean(bits: impl Iterator<Item = Vec<bool>>, len: usize) -> Vec<f64> {
    let mut sums = vec![0i64; len];
    let mut n = 0i64;
    for b in bits {
        n += 1;
        for (s, v) in sums.iter_mut().zip(b) {
            *s += if v { -1 } else { 1 };
        }
    }
    sums.iter().map(|&s| s as f64 / n as f64).collect()
}

fn cmd_encode913(args: &CommonArgs, verdicts: Option<&Path>, verdict_decoder: DecoderArg) -> CliResult<()> {
    let s = Session::new(args, "3")?;
    if s.m != [3] {
        return Err(usage("encode913 only supports m = 3"));
    }
    let spec = CodeSpec::new(3)?;
    let nine = s.noise.nine_qubit_model()?;
    let ghz_model = s.noise.model_for(3)?;
    let mut models = BTreeMap::new();
    models.insert("9".to_string(), nine);
    models.insert("3".to_string(), ghz_model);
    let cfg = s.resolved("encode913", models);
    let names = stabilizer_names(&spec);
    let n_z = spec.z_stabilizers().len();

    let mut rows = Vec::new();
    let mut circuits = Vec::new();
    for &sign in &s.signs {
        let logical = build_shor_encoder(3, sign)?;
        let prep = compile_to_native(&logical)?;
        circuits.push((format!("encode913 sign={sign}"), prep.clone()));
        let ideal = ideal_stabilizers(&logical, &spec)?;
        let mut row = EncodeRow {
            prep_sign: sign,
            logical_plus: None,
            logical_minus: None,
            detect_fidelity: None,
            detect_yield: None,
            block_fidelity: vec![None; 3],
            block_fz: vec![None; 3],
            stabilizers: Vec::new(),
            upsampled_fl: None,
            upsampled_minus_direct: None,
        };
        let mut sampled: Vec<Option<f64>> = vec![None; names.len()];

        if args.basis.has(Basis::Z) {
            let circuit = with_measurement_basis(&prep, Basis::Z)?;
            let seed = derive_seed(args.seed, &[NINE_TAG, sign_id(sign), basis_id(Basis::Z)]);
            let set = run_batch(&circuit, &nine, Basis::Z, sign, 3, &s.params(seed))?;
            let syn = set
                .shots()
                .iter()
                .map(|b| code::z_syndrome(b, &spec))
                .collect::<crate::error::Result<Vec<_>>>()?;
            for (i, v) in parity_mean(syn.into_iter(), n_z).into_iter().enumerate() {
                sampled[i] = Some(v);
            }
            for (b, block) in spec.blocks().iter().enumerate() {
                let hits = set
                    .shots()
                    .iter()
                    .filter(|shot| {
                        let first = shot.get(block[0]);
                        block.iter().all(|&q| shot.get(q) == first)
                    })
                    .count();
                row.block_fz[b] = Some(est(hits, set.n())?);
            }
        }

        if args.basis.has(Basis::X) {
            let circuit = with_measurement_basis(&prep, Basis::X)?;
            let seed = derive_seed(args.seed, &[NINE_TAG, sign_id(sign), basis_id(Basis::X)]);
            let set = run_batch(&circuit, &nine, Basis::X, sign, 3, &s.params(seed))?;
            let mut rng = tie_rng(args.seed, NINE_TAG, 3, sign);
            let mut plus = 0;
            let mut kept = 0;
            let mut kept_ok = 0;
            let mut block_hits = [0usize; 3];
            let mut records = Vec::new();
            let mut xsyn = Vec::with_capacity(set.n());
            for (i, shot) in set.shots().iter().enumerate() {
                let signs = code::block_signs(shot, &spec)?;
                let vote = code::majority_vote(&signs, &mut rng)?;
                let det = code::detect_vote(&signs)?;
                plus += (vote.logical_sign == Sign::Plus) as usize;
                if let Some(d) = det.sign() {
                    kept += 1;
                    kept_ok += (d == sign) as usize;
                }
                for (b, &bs) in signs.iter().enumerate() {
                    block_hits[b] += (bs == sign) as usize;
                }
                xsyn.push(code::x_syndrome(shot, &spec)?);
                if verdicts.is_some() {
                    records.push(match verdict_decoder {
                        DecoderArg::Majority => VerdictRecord::from_vote(i, shot.clone(), &signs, &vote),
                        DecoderArg::Detect => VerdictRecord::from_detect(i, shot.clone(), &signs, det),
                    });
                }
            }
            let n = set.n();
            row.logical_plus = Some(est(plus, n)?);
            row.logical_minus = Some(est(n - plus, n)?);
            row.detect_yield = Some(est(kept, n)?);
            row.detect_fidelity = if kept > 0 { Some(est(kept_ok, kept)?) } else { None };
            for (slot, &hits) in row.block_fidelity.iter_mut().zip(&block_hits) {
                *slot = Some(est(hits, n)?);
            }
            for (i, v) in parity_mean(xsyn.into_iter(), names.len() - n_z).into_iter().enumerate() {
                sampled[n_z + i] = Some(v);
            }

            // up-sampled comparison from three-qubit GHZ shots
            let up_set = ghz_batch(&s, 3, sign, Basis::X, &ghz_model)?;
            let mut up_rng = tie_rng(args.seed, GHZ_TAG, 3, sign);
            let up = stats::upsample_majority(&up_set, &mut up_rng)?;
            let direct = match sign {
                Sign::Plus => row.logical_plus,
                Sign::Minus => row.logical_minus,
            }
            .expect("set above");
            row.upsampled_fl = Some(up.into());
            row.upsampled_minus_direct = Some(up.value - direct.value);

            if let Some(p) = verdicts {
                let path = sibling_path(p, &sign.to_string());
                let mut buf = Vec::new();
                code::write_verdicts_csv(&mut buf, &records)?;
                write_out(Some(&path), &buf)?;
            }
        }
        row.stabilizers = names
            .iter()
            .zip(&ideal)
            .zip(&sampled)
            .map(|((name, &ideal), &sampled)| StabilizerValue {
                name: name.clone(),
                sampled,
                ideal,
            })
            .collect();
        rows.push(row);
    }

    let bytes = match args.format {
        Format::Json => json_bytes(&EncodeReport {
            config: &cfg,
            rows: &rows,
        }),
        Format::Csv => {
            let mut header: Vec<String> = [
                "prep_sign",
                "logical_plus",
                "logical_plus_sigma",
                "logical_minus",
                "logical_minus_sigma",
                "detect_fidelity",
                "detect_fidelity_sigma",
                "detect_yield",
                "detect_yield_sigma",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            for b in 1..=3 {
                header.push(format!("block{b}_fidelity"));
                header.push(format!("block{b}_fidelity_sigma"));
            }
            for b in 1..=3 {
                header.push(format!("block{b}_fz"));
            }
            for n in &names {
                header.push(n.clone());
                header.push(format!("{n}_ideal"));
            }
            header.extend(["upsampled_FL", "upsampled_FL_sigma", "upsampled_minus_direct"].map(String::from));
            let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            t.comments.push("shor-scaler encode913".into());
            t.comments.push(config_comment(&cfg));
            for r in &rows {
                let mut c = vec![r.prep_sign.to_string()];
                for e in [r.logical_plus, r.logical_minus, r.detect_fidelity, r.detect_yield] {
                    c.extend(opt_cell(e));
                }
                for e in &r.block_fidelity {
                    c.extend(opt_cell(*e));
                }
                for e in &r.block_fz {
                    c.push(e.map(|e| e.value.to_string()).unwrap_or_default());
                }
                for st in &r.stabilizers {
                    c.push(st.sampled.map(|v| v.to_string()).unwrap_or_default());
                    c.push(st.ideal.to_string());
                }
                c.extend(opt_cell(r.upsampled_fl));
                c.push(r.upsampled_minus_direct.map(|v| v.to_string()).unwrap_or_default());
                t.rows.push(c);
            }
            t.render()?
        }
    };
    write_out(args.out.as_deref(), &bytes)?;
    if let Some(p) = &args.dump_circuit {
        dump_circuits(p, &circuits)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct Crossing {
    m_small: usize,
    m_large: usize,
    physical_error: Vec<f64>,
}

#[derive(Serialize)]
struct CurvesReport<'a> {
    config: &'a ResolvedConfig,
    curves: &'a [ScalingCurve],
    crossings: &'a [Crossing],
}

/// Crossing search resolution for `curves`.
pub const CROSSING_TOL: f64 = 1e-9;
const CROSSING_SCAN_POINTS: usize = 4000;

/// Pairwise crossings of the error-rate curves on `(0, 1/m_large)`.
pub fn pairwise_crossings(ms: &[usize]) -> crate::error::Result<Vec<(usize, usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, &a) in ms.iter().enumerate() {
        for &b in &ms[i + 1..] {
            let xs = analytic::curve_crossings(
                a,
                b,
                0.0,
                1.0 / b as f64,
                CROSSING_SCAN_POINTS,
                CROSSING_TOL,
                BlockModel::ErrorRate,
            )?;
            out.push((a, b, xs));
        }
    }
    Ok(out)
}

fn cmd_curves(args: &CommonArgs, grid_max: f64, grid_points: usize, block_model: BlockModelArg) -> CliResult<()> {
    let s = Session::new(args, "3,5,7,9")?;
    if args.dump_circuit.is_some() {
        return Err(usage("curves has no circuits to dump"));
    }
    if grid_points < 2 {
        return Err(usage("--grid-points must be >= 2"));
    }
    if !(grid_max > 0.0 && grid_max <= 1.0) {
        return Err(usage("--grid-max must be in (0, 1]"));
    }
    let model: BlockModel = block_model.into();
    let mut curves = Vec::new();
    for &m in &s.m {
        let grid: Vec<f64> = (0..grid_points)
            .map(|k| {
                let t = k as f64 / (grid_points - 1) as f64;
                match model {
                    BlockModel::ErrorRate => 1.0 - grid_max * t,
                    // literal reading is only defined for f <= 1/m
                    BlockModel::Literal => t / m as f64,
                }
            })
            .collect();
        curves.push(analytic::scaling_curve(m, &grid, model).map_err(CliError::Run)?);
    }
    let crossings: Vec<Crossing> = match model {
        BlockModel::ErrorRate => pairwise_crossings(&s.m)?
            .into_iter()
            .map(|(m_small, m_large, physical_error)| Crossing {
                m_small,
                m_large,
                physical_error,
            })
            .collect(),
        BlockModel::Literal => Vec::new(),
    };
    let mut cfg = s.resolved("curves", BTreeMap::new());
    cfg.extra.insert("grid_max".into(), grid_max.into());
    cfg.extra.insert("grid_points".into(), grid_points.into());
    cfg.extra
        .insert("block_model".into(), serde_json::to_value(model).expect("enum"));
    let bytes = match args.format {
        Format::Json => json_bytes(&CurvesReport {
            config: &cfg,
            curves: &curves,
            crossings: &crossings,
        }),
        Format::Csv => {
            let mut t = Table::new(&["m", "physical_error", "logical_error"]);
            t.comments.push("shor-scaler curves".into());
            t.comments.push(config_comment(&cfg));
            for c in &crossings {
                let xs: Vec<String> = c.physical_error.iter().map(|x| x.to_string()).collect();
                t.comments
                    .push(format!("crossing m={} m={} at {}", c.m_small, c.m_large, xs.join(";")));
            }
            for c in &curves {
                for &(pe, le) in &c.points {
                    t.rows.push(vec![c.m.to_string(), pe.to_string(), le.to_string()]);
                }
            }
            t.render()?
        }
    };
    write_out(args.out.as_deref(), &bytes)
}

pub fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ghz { common, histogram } => cmd_ghz(common, histogram.as_deref()),
        Command::Scan { common } => cmd_scan(common),
        Command::Encode913 {
            common,
            verdicts,
            verdict_decoder,
        } => cmd_encode913(common, verdicts.as_deref(), *verdict_decoder),
        Command::Curves {
            common,
            grid_max,
            grid_points,
            block_model,
        } => cmd_curves(common, *grid_max, *grid_points, *block_model),
    }
}
