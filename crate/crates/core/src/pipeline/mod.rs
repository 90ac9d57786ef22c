//! Experiment orchestration over the (language x algorithm x scaling x vocab)
//! grid: training, evaluation, profiling, curve fitting, planning, validation,
//! statistics and plot data. Every stage reads its inputs from and writes its
//! outputs to the run's output directory, so stages can also run one at a time.

mod io;
pub mod ledger;
pub mod manifest;
pub mod report;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ledger::{hash_hex, JobRecord, JobStatus, RunLedger};
pub use manifest::{ContaminationSettings, ExperimentManifest, LanguageEntry, DEFAULT_VOCAB_GRID};

use crate::bpe::train_bpe;
use crate::corpus::{
    contamination_scan, encoding_ratios_of, ingest_corpus, read_lines, sample_bytes, ContaminationReport,
    CorpusHandle, EncodingRatios, Scaling, ScaledSubset,
};
use crate::curvefit::{
    fit_power_law, invert_for_target, validate_plan, OptimalVocabEntry, PlanValidation, PowerLawFit,
    VocabBounds,
};
use crate::error::{Error, Result};
use crate::metrics::{
    corpus_token_count, load_phoneme_table, measure_cell, script_group, token_premium, CompressionReport,
    LanguageProfile, ScriptGroup,
};
use crate::model::{Algorithm, TokenizerModel};
use crate::pretok::PreTokenizerSpec;
use crate::stats::{bonferroni, mann_whitney_u, paired_t_test, variance_ratio_test};
use crate::superbpe::{train_superbpe, SuperBpeConfig};
use crate::unigram::{train_unigram, UnigramTrainConfig};
use io::{read_csv, write_atomic, write_csv, write_records};

pub const LEDGER_FILE: &str = "ledger.json";
pub const COMPRESSION_FILE: &str = "compression.csv";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const FITS_FILE: &str = "fits.csv";
pub const PLAN_FILE: &str = "plan.csv";
pub const OPTIMAL_FILE: &str = "optimal_compression.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const CONTAMINATION_FILE: &str = "contamination.csv";
pub const REPORTS_DIR: &str = "reports";

pub const COMPRESSION_HEADER: [&str; 10] = [
    "language_tag",
    "tokenizer_id",
    "algorithm",
    "vocab_size",
    "ctc",
    "token_premium",
    "mean_token_len_vocab",
    "mean_token_len_corpus",
    "data_sim",
    "proportion_whitespace",
];
pub const PROFILE_HEADER: [&str; 14] = [
    "language_tag",
    "vocab_size",
    "n_phonemes",
    "proportion_whitespace",
    "unigrams_unique",
    "bigrams_entropy_nospace",
    "unigrams_entropy_nospace",
    "char_coef",
    "byte_coef",
    "byte_premium",
    "vocab_mean_token_len",
    "flores_mean_token_len",
    "data_sim",
    "script",
];
pub const FIT_HEADER: [&str; 6] = ["language_tag", "a", "b", "c", "rmse_fit", "r2"];
pub const PLAN_HEADER: [&str; 5] = ["language_tag", "target_ctc", "planned_vocab", "predicted_ctc", "clamped"];
pub const OPTIMAL_HEADER: [&str; 5] = ["language_tag", "target_ctc", "planned_vocab", "clamped", "ctc"];
pub const VALIDATION_HEADER: [&str; 3] = ["target_ctc", "rmse", "n"];
pub const STATS_HEADER: [&str; 8] = ["test", "group_a", "group_b", "statistic", "df1", "df2", "p", "p_adjusted"];
pub const REGRESSION_HEADER: [&str; 3] = ["predictor", "p_value", "r2"];

/// Number of targets picked when the manifest lists none.
pub const AUTO_TARGETS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Train,
    Evaluate,
    Profile,
    Fit,
    Plan,
    Retrain,
    Validate,
    Stats,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Train,
        Stage::Evaluate,
        Stage::Profile,
        Stage::Fit,
        Stage::Plan,
        Stage::Retrain,
        Stage::Validate,
        Stage::Stats,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Profile => "profile",
            Stage::Fit => "fit",
            Stage::Plan => "plan",
            Stage::Retrain => "retrain",
            Stage::Validate => "validate",
            Stage::Stats => "stats",
            Stage::Report => "report",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    All,
    Density,
    Box,
    Regression,
    Rmse,
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => ReportKind::All,
            "density" => ReportKind::Density,
            "box" => ReportKind::Box,
            "regression" => ReportKind::Regression,
            "rmse" => ReportKind::Rmse,
            other => return Err(Error::InvalidConfig(format!("unknown report {other:?}"))),
        })
    }
}

/// One tokenizer configuration within a language.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpec {
    pub algorithm: Algorithm,
    pub scaling: Scaling,
    pub vocab_size: usize,
    pub transition_fraction: Option<f64>,
}

impl CellSpec {
    /// `bpe_none_8192`, `superbpe_byte_premium_8192_t0.9`, ...
    pub fn id(&self) -> String {
        let mut s = format!("{}_{}_{}", self.algorithm, self.scaling, self.vocab_size);
        if let Some(t) = self.transition_fraction {
            s.push_str(&format!("_t{t}"));
        }
        s
    }

    pub fn parse(id: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("malformed tokenizer id {id:?}"));
        let (algorithm, rest) = [Algorithm::SuperBpe, Algorithm::Unigram, Algorithm::Bpe]
            .into_iter()
            .find_map(|a| id.strip_prefix(a.as_str()).and_then(|r| r.strip_prefix('_')).map(|r| (a, r)))
            .ok_or_else(bad)?;
        let (scaling, rest) = [Scaling::BytePremium, Scaling::None]
            .into_iter()
            .find_map(|s| rest.strip_prefix(s.as_str()).and_then(|r| r.strip_prefix('_')).map(|r| (s, r)))
            .ok_or_else(bad)?;
        let (vocab, tf) = match rest.split_once("_t") {
            Some((v, t)) => (v, Some(t.parse::<f64>().map_err(|_| bad())?)),
            None => (rest, None),
        };
        Ok(Self {
            algorithm,
            scaling,
            vocab_size: vocab.parse().map_err(|_| bad())?,
            transition_fraction: tf,
        })
    }

    fn same_series(&self, other: &CellSpec) -> bool {
        self.algorithm == other.algorithm
            && self.scaling == other.scaling
            && self.transition_fraction == other.transition_fraction
    }

    fn with_vocab(&self, vocab_size: usize) -> Self {
        Self { vocab_size, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub language_tag: String,
    pub spec: CellSpec,
    lang_idx: usize,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("{}/{}", self.language_tag, self.spec.id())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub resume: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainSummary {
    pub trained: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub language_tag: String,
    pub vocab_size: usize,
    pub n_phonemes: Option<u32>,
    pub proportion_whitespace: f64,
    pub unigrams_unique: usize,
    pub bigrams_entropy_nospace: f64,
    pub unigrams_entropy_nospace: f64,
    pub char_coef: f64,
    pub byte_coef: f64,
    pub byte_premium: f64,
    pub vocab_mean_token_len: f64,
    pub flores_mean_token_len: f64,
    pub data_sim: f64,
    pub script: ScriptGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitRow {
    language_tag: String,
    a: f64,
    b: f64,
    c: f64,
    rmse_fit: f64,
    r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlanRow {
    language_tag: String,
    target_ctc: u64,
    planned_vocab: usize,
    predicted_ctc: f64,
    clamped: String,
}

impl PlanRow {
    fn from_entry(e: &OptimalVocabEntry) -> Self {
        Self {
            language_tag: e.language_tag.clone(),
            target_ctc: e.target_ctc,
            planned_vocab: e.planned_vocab,
            predicted_ctc: e.predicted_ctc,
            clamped: e.clamp_label(),
        }
    }

    fn into_entry(self) -> Result<OptimalVocabEntry> {
        Ok(OptimalVocabEntry {
            clamped: OptimalVocabEntry::parse_clamp(&self.clamped)?,
            language_tag: self.language_tag,
            target_ctc: self.target_ctc,
            planned_vocab: self.planned_vocab,
            predicted_ctc: self.predicted_ctc,
        })
    }
}

/// CTC of the tokenizer trained at a planned vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalMeasurement {
    pub language_tag: String,
    pub target_ctc: u64,
    pub planned_vocab: usize,
    pub clamped: String,
    pub ctc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub test: String,
    pub group_a: String,
    pub group_b: String,
    pub statistic: f64,
    pub df1: Option<f64>,
    pub df2: Option<f64>,
    pub p: f64,
    pub p_adjusted: Option<f64>,
}

struct LangData {
    tag: String,
    corpus: CorpusHandle,
    eval: Vec<String>,
    corpus_hash: String,
    ratios: EncodingRatios,
    phonemes: Option<u32>,
}

pub struct Experiment {
    manifest: ExperimentManifest,
    out: PathBuf,
    seed: u64,
    resume: bool,
    pool: rayon::ThreadPool,
}

impl Experiment {
    pub fn new(manifest: ExperimentManifest, opts: &RunOptions) -> Result<Self> {
        manifest.validate()?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = opts.jobs {
            if j == 0 {
                return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self {
            out: opts.output_dir.clone().unwrap_or_else(|| manifest.output_dir.clone()),
            seed: opts.seed.unwrap_or(manifest.seed),
            resume: opts.resume,
            manifest,
            pool,
        })
    }

    pub fn load(manifest_path: impl AsRef<Path>, opts: &RunOptions) -> Result<Self> {
        Self::new(ExperimentManifest::load(manifest_path)?, opts)
    }

    pub fn manifest(&self) -> &ExperimentManifest {
        &self.manifest
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn model_path(&self, language_tag: &str, spec: &CellSpec) -> PathBuf {
        self.out.join("models").join(language_tag).join(format!("{}.json", spec.id()))
    }

    fn planned_model_path(&self, language_tag: &str, spec: &CellSpec) -> PathBuf {
        self.out.join("planned_models").join(language_tag).join(format!("{}.json", spec.id()))
    }

    /// Every grid cell, in a fixed order that all CSV outputs follow.
    pub fn cells(&self) -> Vec<Cell> {
        let m = &self.manifest;
        let mut cells = Vec::new();
        for (lang_idx, lang) in m.languages.iter().enumerate() {
            for &algorithm in &m.algorithms {
                for &scaling in &m.scaling {
                    let fractions: Vec<Option<f64>> = if algorithm == Algorithm::SuperBpe {
                        m.transition_fractions.iter().copied().map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for transition_fraction in fractions {
                        for &vocab_size in &m.vocab_grid {
                            cells.push(Cell {
                                language_tag: lang.tag.clone(),
                                lang_idx,
                                spec: CellSpec {
                                    algorithm,
                                    scaling,
                                    vocab_size,
                                    transition_fraction,
                                },
                            });
                        }
                    }
                }
            }
        }
        cells
    }

    /// The series that curve fitting and planning use: BPE when trained
    /// (otherwise the first algorithm), the first scaling and first fraction.
    pub fn primary_spec(&self, vocab_size: usize) -> CellSpec {
        let m = &self.manifest;
        let algorithm = if m.algorithms.contains(&Algorithm::Bpe) {
            Algorithm::Bpe
        } else {
            m.algorithms[0]
        };
        CellSpec {
            algorithm,
            scaling: m.scaling[0],
            vocab_size,
            transition_fraction: (algorithm == Algorithm::SuperBpe).then(|| m.transition_fractions[0]),
        }
    }

    fn bounds(&self) -> VocabBounds {
        let g = &self.manifest.vocab_grid;
        VocabBounds {
            min_vocab: g[0],
            max_vocab: g[g.len() - 1],
        }
    }

    /// Grid bounds, narrowed to the sizes actually measured when cells at the
    /// edges failed (e.g. a corpus too small for the largest vocabulary).
    fn language_bounds(&self, tag: &str, obs: &BTreeMap<usize, f64>) -> VocabBounds {
        let grid = self.bounds();
        let (Some(&lo), Some(&hi)) = (obs.keys().next(), obs.keys().next_back()) else {
            return grid;
        };
        let b = VocabBounds {
            min_vocab: grid.min_vocab.max(lo),
            max_vocab: grid.max_vocab.min(hi),
        };
        if b.min_vocab != grid.min_vocab || b.max_vocab != grid.max_vocab {
            warn!("{tag}: clamp bounds narrowed to measured sizes {}..{}", b.min_vocab, b.max_vocab);
        }
        b
    }

    fn load_languages(&self) -> Result<Vec<LangData>> {
        let m = &self.manifest;
        let table = match &m.phoneme_table {
            Some(p) => load_phoneme_table(p)?,
            None => HashMap::new(),
        };
        let reference = m.language(&m.reference_language).expect("validated");
        let ref_eval = read_lines(&reference.eval_path)?;
        let loaded: Vec<Result<LangData>> = self.pool.install(|| {
            m.languages
                .par_iter()
                .map(|l| {
                    let corpus = ingest_corpus(&l.corpus_paths, &l.tag)?;
                    let eval = read_lines(&l.eval_path)?;
                    if eval.len() != ref_eval.len() {
                        return Err(Error::LengthMismatch(eval.len(), ref_eval.len()));
                    }
                    let ratios = encoding_ratios_of(&eval, &ref_eval)?;
                    Ok(LangData {
                        tag: l.tag.clone(),
                        corpus_hash: hash_hex(&[corpus.text().as_bytes()]),
                        corpus,
                        eval,
                        ratios,
                        phonemes: l.phoneme_count.or_else(|| table.get(&l.tag).copied()),
                    })
                })
                .collect()
        });
        loaded.into_iter().collect()
    }

    fn subset(&self, lang: &LangData, scaling: Scaling) -> Result<ScaledSubset> {
        sample_bytes(&lang.corpus, self.manifest.train_bytes, scaling, lang.ratios.byte_premium, self.seed)
    }

    fn input_hash(&self, lang: &LangData, cell: &Cell) -> String {
        let premium = match cell.spec.scaling {
            Scaling::None => 1.0,
            Scaling::BytePremium => lang.ratios.byte_premium,
        };
        hash_hex(&[
            b"montok-train-1",
            cell.key().as_bytes(),
            &self.manifest.train_bytes.to_le_bytes(),
            &self.seed.to_le_bytes(),
            &premium.to_bits().to_le_bytes(),
            lang.corpus_hash.as_bytes(),
        ])
    }

    /// All stages in order.
    pub fn run(&self) -> Result<()> {
        for stage in Stage::ALL {
            if matches!(stage, Stage::Retrain | Stage::Validate) && !self.manifest.retrain_planned {
                continue;
            }
            info!("stage {}", stage.as_str());
            self.run_stage(stage)?;
        }
        Ok(())
    }

    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Train => {
                let s = self.train()?;
                info!("trained {} cells, skipped {}, failed {}", s.trained, s.skipped, s.failed);
            }
            Stage::Evaluate => drop(self.evaluate()?),
            Stage::Profile => drop(self.profile()?),
            Stage::Fit => drop(self.fit()?),
            Stage::Plan => drop(self.plan()?),
            Stage::Retrain => drop(self.retrain()?),
            Stage::Validate => drop(self.validate()?),
            Stage::Stats => drop(self.stats()?),
            Stage::Report => drop(self.report(ReportKind::All)?),
        }
        Ok(())
    }

    /// Trains every grid cell not already done with identical inputs.
    ///
    /// BPE cells of one language and scaling share a single training run: the
    /// merge sequence does not depend on the target size, so each smaller model
    /// is a truncation of the largest.
    pub fn train(&self) -> Result<TrainSummary> {
        let langs = self.load_languages()?;
        let ledger_path = self.path(LEDGER_FILE);
        let mut ledger = if self.resume {
            RunLedger::load_or_default(&ledger_path)?
        } else {
            RunLedger::default()
        };
        let cells = self.cells();
        let mut summary = TrainSummary::default();
        let mut todo = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            let hash = self.input_hash(&langs[cell.lang_idx], cell);
            let path = self.model_path(&cell.language_tag, &cell.spec);
            if self.resume && ledger.is_done(&cell.key(), &hash) && path.exists() {
                summary.skipped += 1;
                continue;
            }
            if path.exists() {
                fs::remove_file(&path)?;
            }
            ledger.set(&cell.key(), JobStatus::Pending, &hash, 0.0);
            todo.push((i, hash));
        }
        fs::create_dir_all(&self.out)?;
        ledger.save(&ledger_path)?;

        let mut units: Vec<Vec<(usize, String)>> = Vec::new();
        let mut bpe_unit: HashMap<(usize, Scaling), usize> = HashMap::new();
        for (i, hash) in todo {
            let c = &cells[i];
            if c.spec.algorithm == Algorithm::Bpe {
                let u = *bpe_unit.entry((c.lang_idx, c.spec.scaling)).or_insert_with(|| {
                    units.push(Vec::new());
                    units.len() - 1
                });
                units[u].push((i, hash));
            } else {
                units.push(vec![(i, hash)]);
            }
        }

        let ledger = Mutex::new(ledger);
        let saved: Vec<Result<(usize, usize)>> = self.pool.install(|| {
            units
                .par_iter()
                .map(|unit| {
                    let start = Instant::now();
                    let outcomes = self.train_unit(&langs, &cells, unit);
                    let secs = start.elapsed().as_secs_f64();
                    let mut l = ledger.lock().expect("ledger lock");
                    let (mut ok, mut failed) = (0, 0);
                    for ((i, hash), outcome) in unit.iter().zip(outcomes) {
                        let status = match outcome {
                            Ok(()) => {
                                ok += 1;
                                JobStatus::Done
                            }
                            Err(reason) => {
                                warn!("{} failed: {reason}", cells[*i].key());
                                failed += 1;
                                JobStatus::Failed { reason }
                            }
                        };
                        l.set(&cells[*i].key(), status, hash, secs);
                    }
                    l.save(&ledger_path)?;
                    Ok((ok, failed))
                })
                .collect()
        });
        for r in saved {
            let (ok, failed) = r?;
            summary.trained += ok;
            summary.failed += failed;
        }
        Ok(summary)
    }

    fn train_unit(
        &self,
        langs: &[LangData],
        cells: &[Cell],
        unit: &[(usize, String)],
    ) -> Vec<std::result::Result<(), String>> {
        let first = &cells[unit[0].0];
        let lang = &langs[first.lang_idx];
        let subset = match self.subset(lang, first.spec.scaling) {
            Ok(s) => s,
            Err(e) => return vec![Err(e.to_string()); unit.len()],
        };
        let pretok = PreTokenizerSpec::whitespace();
        match first.spec.algorithm {
            Algorithm::Bpe => {
                let max_v = unit.iter().map(|(i, _)| cells[*i].spec.vocab_size).max().unwrap_or(0);
                match train_bpe(&subset, max_v, pretok) {
                    Err(e) => vec![Err(e.to_string()); unit.len()],
                    Ok(full) => unit
                        .iter()
                        .map(|(i, _)| {
                            let c = &cells[*i];
                            let model = if c.spec.vocab_size >= full.vocab_size() {
                                Ok(full.clone())
                            } else {
                                full.truncated(c.spec.vocab_size)
                            };
                            self.store_cell(c, model)
                        })
                        .collect(),
                }
            }
            Algorithm::Unigram => {
                let cfg = UnigramTrainConfig::new(first.spec.vocab_size);
                vec![self.store_cell(first, train_unigram(&subset, &cfg, pretok))]
            }
            Algorithm::SuperBpe => {
                let tf = first.spec.transition_fraction.expect("superbpe cells carry a fraction");
                let cfg = SuperBpeConfig::new(first.spec.vocab_size, tf);
                vec![self.store_cell(first, train_superbpe(&subset, &cfg))]
            }
        }
    }

    fn store_cell(&self, cell: &Cell, model: Result<TokenizerModel>) -> std::result::Result<(), String> {
        let model = model.map_err(|e| e.to_string())?;
        if model.vocab_size() < cell.spec.vocab_size {
            return Err(format!(
                "training stopped at {} of {} tokens",
                model.vocab_size(),
                cell.spec.vocab_size
            ));
        }
        let json = model.to_json().map_err(|e| e.to_string())?;
        write_atomic(&self.model_path(&cell.language_tag, &cell.spec), json.as_bytes()).map_err(|e| e.to_string())
    }

    fn require_ledger(&self) -> Result<RunLedger> {
        let path = self.path(LEDGER_FILE);
        if !path.exists() {
            return Err(Error::MissingStage(format!("train ({} not found)", path.display())));
        }
        RunLedger::load(&path)
    }

    /// Measures every trained cell on its language's evaluation text.
    pub fn evaluate(&self) -> Result<Vec<CompressionReport>> {
        let ledger = self.require_ledger()?;
        let langs = self.load_languages()?;
        let done: Vec<Cell> = self
            .cells()
            .into_iter()
            .filter(|c| ledger.status(&c.key()) == Some(&JobStatus::Done))
            .collect();
        let measured: Vec<Result<_>> = self.pool.install(|| {
            done.par_iter()
                .map(|c| {
                    let lang = &langs[c.lang_idx];
                    let model = TokenizerModel::load(self.model_path(&c.language_tag, &c.spec))?;
                    let subset = self.subset(lang, c.spec.scaling)?;
                    let train: Vec<&str> = subset.lines().collect();
                    let m = measure_cell(&model, &train, &lang.eval)?;
                    Ok((m, model.vocab_size()))
                })
                .collect()
        });
        let measured: Vec<_> = measured.into_iter().collect::<Result<_>>()?;
        let reference = &self.manifest.reference_language;
        let ref_ctc: HashMap<String, u64> = done
            .iter()
            .zip(&measured)
            .filter(|(c, _)| &c.language_tag == reference)
            .map(|(c, (m, _))| (c.spec.id(), m.ctc))
            .collect();
        let mut rows = Vec::with_capacity(done.len());
        for (c, (m, vocab)) in done.iter().zip(measured) {
            let Some(&rc) = ref_ctc.get(&c.spec.id()) else {
                warn!("{}: reference tokenizer missing, row skipped", c.key());
                continue;
            };
            rows.push(CompressionReport {
                language_tag: c.language_tag.clone(),
                tokenizer_id: c.spec.id(),
                algorithm: c.spec.algorithm,
                vocab_size: vocab,
                ctc: m.ctc,
                token_premium: token_premium(m.ctc, rc)?,
                mean_token_len_vocab: m.mean_token_len_vocab,
                mean_token_len_corpus: m.mean_token_len_corpus,
                data_similarity: m.data_similarity,
                proportion_whitespace: m.proportion_whitespace,
            });
        }
        write_csv(&self.path(COMPRESSION_FILE), &COMPRESSION_HEADER, &rows)?;
        Ok(rows)
    }

    pub fn read_compression(&self) -> Result<Vec<CompressionReport>> {
        read_csv(&self.path(COMPRESSION_FILE), "evaluate")
    }

    /// Primary-series CTCs per language, keyed by vocabulary size.
    fn observed(&self, rows: &[CompressionReport]) -> Result<BTreeMap<String, BTreeMap<usize, f64>>> {
        let mut out: BTreeMap<String, BTreeMap<usize, f64>> = BTreeMap::new();
        for r in rows {
            let spec = CellSpec::parse(&r.tokenizer_id)?;
            if spec.same_series(&self.primary_spec(0)) {
                out.entry(r.language_tag.clone()).or_default().insert(spec.vocab_size, r.ctc as f64);
            }
        }
        Ok(out)
    }

    /// Predictor values per language and primary-series vocabulary size.
    pub fn profile(&self) -> Result<Vec<ProfileRow>> {
        let rows = self.read_compression()?;
        let langs = self.load_languages()?;
        let primary = self.primary_spec(0);
        let mut out = Vec::new();
        for lang in &langs {
            let subset = self.subset(lang, primary.scaling)?;
            let train: Vec<&str> = subset.lines().collect();
            let p = LanguageProfile::build(&lang.tag, &lang.ratios, &train, lang.phonemes)?;
            for r in rows.iter().filter(|r| r.language_tag == lang.tag) {
                let spec = CellSpec::parse(&r.tokenizer_id)?;
                if !spec.same_series(&primary) {
                    continue;
                }
                out.push(ProfileRow {
                    language_tag: lang.tag.clone(),
                    vocab_size: spec.vocab_size,
                    n_phonemes: p.n_phonemes,
                    proportion_whitespace: r.proportion_whitespace,
                    unigrams_unique: p.unigrams_unique,
                    bigrams_entropy_nospace: p.bigram_entropy_nospace,
                    unigrams_entropy_nospace: p.unigram_entropy_nospace,
                    char_coef: p.length_ratio,
                    byte_coef: p.byte_coefficient,
                    byte_premium: p.byte_premium,
                    vocab_mean_token_len: r.mean_token_len_vocab,
                    flores_mean_token_len: r.mean_token_len_corpus,
                    data_sim: r.data_similarity,
                    script: p.script_group,
                });
            }
        }
        write_csv(&self.path(PROFILES_FILE), &PROFILE_HEADER, &out)?;
        Ok(out)
    }

    /// Power-law fit of the primary series for every language with enough points.
    pub fn fit(&self) -> Result<Vec<PowerLawFit>> {
        let observed = self.observed(&self.read_compression()?)?;
        let mut fits = Vec::new();
        for lang in &self.manifest.languages {
            let Some(points) = observed.get(&lang.tag) else { continue };
            let pts: Vec<(usize, f64)> = points.iter().map(|(&v, &c)| (v, c)).collect();
            match fit_power_law(&lang.tag, &pts) {
                Ok(f) => fits.push(f),
                Err(e) => warn!("{}: no fit: {e}", lang.tag),
            }
        }
        let rows: Vec<FitRow> = fits
            .iter()
            .map(|f| FitRow {
                language_tag: f.language_tag.clone(),
                a: f.a,
                b: f.b,
                c: f.c,
                rmse_fit: f.rmse_fit,
                r2: f.r2,
            })
            .collect();
        write_csv(&self.path(FITS_FILE), &FIT_HEADER, &rows)?;
        Ok(fits)
    }

    pub fn read_fits(&self) -> Result<Vec<PowerLawFit>> {
        let rows: Vec<FitRow> = read_csv(&self.path(FITS_FILE), "fit")?;
        Ok(rows
            .into_iter()
            .map(|r| PowerLawFit {
                rmse_fit: r.rmse_fit,
                r2: r.r2,
                ..PowerLawFit::from_params(&r.language_tag, r.a, r.b, r.c)
            })
            .collect())
    }

    /// Planned vocabulary per (language, target CTC).
    pub fn plan(&self) -> Result<Vec<OptimalVocabEntry>> {
        let fits = self.read_fits()?;
        let observed = self.observed(&self.read_compression()?)?;
        let targets = if self.manifest.target_ctcs.is_empty() {
            auto_targets(&observed, AUTO_TARGETS)
        } else {
            self.manifest.target_ctcs.clone()
        };
        let empty = BTreeMap::new();
        let mut plan = Vec::new();
        'langs: for fit in &fits {
            let obs = observed.get(&fit.language_tag).unwrap_or(&empty);
            let bounds = self.language_bounds(&fit.language_tag, obs);
            let mut entries = Vec::with_capacity(targets.len());
            for &t in &targets {
                match invert_for_target(fit, t, obs, bounds) {
                    Ok(e) => entries.push(e),
                    Err(e) => {
                        warn!("{}: not planned: {e}", fit.language_tag);
                        continue 'langs;
                    }
                }
            }
            plan.extend(entries);
        }
        let rows: Vec<PlanRow> = plan.iter().map(PlanRow::from_entry).collect();
        write_csv(&self.path(PLAN_FILE), &PLAN_HEADER, &rows)?;
        Ok(plan)
    }

    pub fn read_plan(&self) -> Result<Vec<OptimalVocabEntry>> {
        let rows: Vec<PlanRow> = read_csv(&self.path(PLAN_FILE), "plan")?;
        rows.into_iter().map(PlanRow::into_entry).collect()
    }

    /// Builds a tokenizer at every planned vocabulary and measures its CTC.
    pub fn retrain(&self) -> Result<Vec<OptimalMeasurement>> {
        let plan = self.read_plan()?;
        let ledger = self.require_ledger()?;
        let langs = self.load_languages()?;
        let by_tag: HashMap<&str, &LangData> = langs.iter().map(|l| (l.tag.as_str(), l)).collect();
        let mut wanted: Vec<(String, usize)> = plan.iter().map(|e| (e.language_tag.clone(), e.planned_vocab)).collect();
        wanted.sort();
        wanted.dedup();
        let measured: Vec<Result<u64>> = self.pool.install(|| {
            wanted
                .par_iter()
                .map(|(tag, v)| {
                    let lang = by_tag
                        .get(tag.as_str())
                        .ok_or_else(|| Error::InvalidConfig(format!("plan names unknown language {tag}")))?;
                    let model = self.planned_model(lang, *v, &ledger)?;
                    Ok(corpus_token_count(&model, &lang.eval))
                })
                .collect()
        });
        let ctc: HashMap<(String, usize), u64> =
            wanted.into_iter().zip(measured).map(|(k, m)| m.map(|c| (k, c))).collect::<Result<_>>()?;
        let rows: Vec<OptimalMeasurement> = plan
            .iter()
            .map(|e| OptimalMeasurement {
                language_tag: e.language_tag.clone(),
                target_ctc: e.target_ctc,
                planned_vocab: e.planned_vocab,
                clamped: e.clamp_label(),
                ctc: ctc[&(e.language_tag.clone(), e.planned_vocab)],
            })
            .collect();
        write_csv(&self.path(OPTIMAL_FILE), &OPTIMAL_HEADER, &rows)?;
        Ok(rows)
    }

    fn planned_model(&self, lang: &LangData, vocab: usize, ledger: &RunLedger) -> Result<TokenizerModel> {
        let spec = self.primary_spec(vocab);
        let done = |s: &CellSpec| {
            ledger.status(&format!("{}/{}", lang.tag, s.id())) == Some(&JobStatus::Done)
        };
        let model = if done(&spec) {
            TokenizerModel::load(self.model_path(&lang.tag, &spec))?
        } else if spec.algorithm == Algorithm::Bpe {
            // any larger BPE model of the series truncates to the planned size
            let larger = self
                .manifest
                .vocab_grid
                .iter()
                .rev()
                .map(|&g| spec.with_vocab(g))
                .find(|s| s.vocab_size >= vocab && done(s));
            match larger {
                Some(s) => TokenizerModel::load(self.model_path(&lang.tag, &s))?.truncated(vocab)?,
                None => train_bpe(&self.subset(lang, spec.scaling)?, vocab, PreTokenizerSpec::whitespace())?,
            }
        } else {
            let subset = self.subset(lang, spec.scaling)?;
            match spec.algorithm {
                Algorithm::Unigram => {
                    train_unigram(&subset, &UnigramTrainConfig::new(vocab), PreTokenizerSpec::whitespace())?
                }
                _ => train_superbpe(
                    &subset,
                    &SuperBpeConfig::new(vocab, spec.transition_fraction.expect("superbpe fraction")),
                )?,
            }
        };
        write_atomic(&self.planned_model_path(&lang.tag, &spec), model.to_json()?.as_bytes())?;
        Ok(model)
    }

    pub fn read_optimal(&self) -> Result<Vec<OptimalMeasurement>> {
        read_csv(&self.path(OPTIMAL_FILE), "retrain")
    }

    /// RMSE between planned and measured CTCs, per target and overall.
    pub fn validate(&self) -> Result<Option<PlanValidation>> {
        let plan = self.read_plan()?;
        let measured: HashMap<(String, u64), f64> = self
            .read_optimal()?
            .into_iter()
            .map(|m| ((m.language_tag, m.target_ctc), m.ctc as f64))
            .collect();
        if plan.is_empty() {
            warn!("empty plan, nothing to validate");
            write_records(&self.path(VALIDATION_FILE), &VALIDATION_HEADER, &[])?;
            return Ok(None);
        }
        let v = validate_plan(&plan, &measured)?;
        let mut rows: Vec<Vec<String>> = v
            .per_target
            .iter()
            .map(|(t, rmse, n)| vec![t.to_string(), rmse.to_string(), n.to_string()])
            .collect();
        rows.push(vec!["all".into(), v.overall.to_string(), plan.len().to_string()]);
        write_records(&self.path(VALIDATION_FILE), &VALIDATION_HEADER, &rows)?;
        Ok(Some(v))
    }

    /// Significance tests over the evaluated grid.
    pub fn stats(&self) -> Result<Vec<StatRow>> {
        let rows = self.read_compression()?;
        let primary = self.primary_spec(0);
        let parsed: Vec<(CellSpec, &CompressionReport)> =
            rows.iter().map(|r| Ok((CellSpec::parse(&r.tokenizer_id)?, r))).collect::<Result<_>>()?;
        let fixed: Vec<f64> = parsed
            .iter()
            .filter(|(s, _)| s.same_series(&primary))
            .map(|(_, r)| r.ctc as f64)
            .collect();
        let mut out = Vec::new();

        // CTC variance at planned vocabularies against the fixed grid
        if self.path(OPTIMAL_FILE).exists() {
            let optimal = self.read_optimal()?;
            let mut by_target: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for m in &optimal {
                by_target.entry(m.target_ctc).or_default().push(m.ctc as f64);
            }
            let mut f_rows = Vec::new();
            for (t, ctcs) in by_target {
                match variance_ratio_test(&ctcs, &fixed) {
                    Ok(f) => f_rows.push(StatRow {
                        test: "variance_ratio".into(),
                        group_a: format!("optimal_{t}"),
                        group_b: "fixed_grid".into(),
                        statistic: f.f_stat,
                        df1: Some(f.df1),
                        df2: Some(f.df2),
                        p: f.p_two_sided,
                        p_adjusted: None,
                    }),
                    Err(e) => warn!("variance test at target {t} skipped: {e}"),
                }
            }
            adjust(&mut f_rows);
            out.extend(f_rows);
        }

        // paired comparisons of series that differ in one factor
        let index: HashMap<(String, String), f64> = parsed
            .iter()
            .map(|(s, r)| ((r.language_tag.clone(), s.id()), r.token_premium))
            .collect();
        let ctc_index: HashMap<(String, String), f64> = parsed
            .iter()
            .map(|(s, r)| ((r.language_tag.clone(), s.id()), r.ctc as f64))
            .collect();
        let mut paired = |a_spec: CellSpec, b_spec: CellSpec, values: &HashMap<(String, String), f64>, label: &str| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for lang in &self.manifest.languages {
                for &v in &self.manifest.vocab_grid {
                    let ka = (lang.tag.clone(), a_spec.with_vocab(v).id());
                    let kb = (lang.tag.clone(), b_spec.with_vocab(v).id());
                    if let (Some(&x), Some(&y)) = (values.get(&ka), values.get(&kb)) {
                        xs.push(x);
                        ys.push(y);
                    }
                }
            }
            match paired_t_test(&xs, &ys) {
                Ok(t) => out.push(StatRow {
                    test: format!("paired_t_{label}"),
                    group_a: series_label(&a_spec),
                    group_b: series_label(&b_spec),
                    statistic: t.t_stat,
                    df1: Some(t.df),
                    df2: None,
                    p: t.p_two_sided,
                    p_adjusted: None,
                }),
                Err(e) => warn!("paired test {label} skipped: {e}"),
            }
        };
        if self.manifest.scaling.len() > 1 {
            for &s in &self.manifest.scaling[1..] {
                paired(primary, CellSpec { scaling: s, ..primary }, &index, "token_premium");
            }
        }
        for &alg in &self.manifest.algorithms {
            if alg == primary.algorithm {
                continue;
            }
            let tf = (alg == Algorithm::SuperBpe).then(|| self.manifest.transition_fractions[0]);
            paired(primary, CellSpec { algorithm: alg, transition_fraction: tf, ..primary }, &ctc_index, "ctc");
        }

        // script groups, pooled over the primary grid
        let mut groups: BTreeMap<ScriptGroup, Vec<f64>> = BTreeMap::new();
        for (s, r) in &parsed {
            if s.same_series(&primary) {
                groups.entry(script_group(&r.language_tag)?).or_default().push(r.ctc as f64);
            }
        }
        let keys: Vec<ScriptGroup> = groups.keys().copied().collect();
        let mut mwu_rows = Vec::new();
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                match mann_whitney_u(&groups[a], &groups[b]) {
                    Ok(m) => mwu_rows.push(StatRow {
                        test: "mann_whitney_u".into(),
                        group_a: a.as_str().into(),
                        group_b: b.as_str().into(),
                        statistic: m.u_stat,
                        df1: None,
                        df2: None,
                        p: m.p_two_sided,
                        p_adjusted: None,
                    }),
                    Err(e) => warn!("script test {}/{} skipped: {e}", a.as_str(), b.as_str()),
                }
            }
        }
        adjust(&mut mwu_rows);
        out.extend(mwu_rows);

        write_csv(&self.path(STATS_FILE), &STATS_HEADER, &out)?;
        Ok(out)
    }

    /// Plot and table data under `reports/`; returns the files written.
    pub fn report(&self, which: ReportKind) -> Result<Vec<PathBuf>> {
        let rows = self.read_compression()?;
        let dir = self.out.join(REPORTS_DIR);
        let primary = self.primary_spec(0);
        let mut series: BTreeMap<usize, Vec<(&str, f64)>> = BTreeMap::new();
        for r in &rows {
            let spec = CellSpec::parse(&r.tokenizer_id)?;
            if spec.same_series(&primary) {
                series.entry(spec.vocab_size).or_default().push((&r.language_tag, r.ctc as f64));
            }
        }
        let mut written = Vec::new();
        let all = which == ReportKind::All;

        if all || which == ReportKind::Density {
            let mut out = Vec::new();
            for (v, pts) in &series {
                let ctcs: Vec<f64> = pts.iter().map(|p| p.1).collect();
                for (x, d) in report::kde(&ctcs, report::DENSITY_POINTS) {
                    out.push(vec![v.to_string(), x.to_string(), d.to_string()]);
                }
            }
            let path = dir.join("density.csv");
            write_records(&path, &["vocab_size", "ctc", "density"], &out)?;
            written.push(path);
        }

        if all || which == ReportKind::Box {
            let mut out = Vec::new();
            for g in ScriptGroup::ALL {
                for (v, pts) in &series {
                    let vals: Vec<f64> = pts
                        .iter()
                        .filter(|(tag, _)| script_group(tag).ok() == Some(g))
                        .map(|p| p.1)
                        .collect();
                    if let Some(b) = report::box_stats(&vals) {
                        out.push(vec![
                            g.as_str().to_string(),
                            v.to_string(),
                            b.n.to_string(),
                            b.min.to_string(),
                            b.q1.to_string(),
                            b.median.to_string(),
                            b.q3.to_string(),
                            b.max.to_string(),
                        ]);
                    }
                }
            }
            let path = dir.join("script_box.csv");
            write_records(&path, &["script", "vocab_size", "n", "min", "q1", "median", "q3", "max"], &out)?;
            written.push(path);
        }

        if all || which == ReportKind::Regression {
            match read_csv::<ProfileRow>(&self.path(PROFILES_FILE), "profile") {
                Ok(profiles) => written.extend(self.regression_reports(&dir, &profiles, &series)?),
                Err(e) if all => warn!("regression tables skipped: {e}"),
                Err(e) => return Err(e),
            }
        }

        if all || which == ReportKind::Rmse {
            let path = self.path(VALIDATION_FILE);
            if path.exists() {
                let mut r = csv::Reader::from_path(&path)?;
                let mut out = Vec::new();
                for rec in r.records() {
                    let rec = rec?;
                    out.push(vec![rec[0].to_string(), rec[1].to_string()]);
                }
                let dest = dir.join("rmse_table.csv");
                write_records(&dest, &["target_ctc", "rmse"], &out)?;
                written.push(dest);
            } else if !all {
                return Err(Error::MissingStage(format!("validate ({} not found)", path.display())));
            }
        }
        Ok(written)
    }

    fn regression_reports(
        &self,
        dir: &Path,
        profiles: &[ProfileRow],
        series: &BTreeMap<usize, Vec<(&str, f64)>>,
    ) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (v, pts) in series {
            let ctc: HashMap<&str, f64> = pts.iter().copied().collect();
            let rows: Vec<&ProfileRow> = profiles
                .iter()
                .filter(|p| p.vocab_size == *v && ctc.contains_key(p.language_tag.as_str()))
                .collect();
            let response: Vec<f64> = rows.iter().map(|p| ctc[p.language_tag.as_str()]).collect();
            let col = |f: fn(&ProfileRow) -> f64| rows.iter().map(|p| f(p)).collect::<Vec<f64>>();
            let mut predictors: Vec<(&str, Vec<f64>)> = Vec::new();
            if rows.iter().all(|p| p.n_phonemes.is_some()) {
                predictors.push(("n_phonemes", col(|p| p.n_phonemes.unwrap_or(0) as f64)));
            }
            predictors.extend([
                ("proportion_whitespace", col(|p| p.proportion_whitespace)),
                ("unigrams_unique", col(|p| p.unigrams_unique as f64)),
                ("bigrams_entropy_nospace", col(|p| p.bigrams_entropy_nospace)),
                ("unigrams_entropy_nospace", col(|p| p.unigrams_entropy_nospace)),
                ("char_coef", col(|p| p.char_coef)),
                ("byte_coef", col(|p| p.byte_coef)),
                ("byte_premium", col(|p| p.byte_premium)),
                ("vocab_mean_token_len", col(|p| p.vocab_mean_token_len)),
                ("flores_mean_token_len", col(|p| p.flores_mean_token_len)),
                ("data_sim", col(|p| p.data_sim)),
            ]);
            let table = report::regression_table(&predictors, &response);
            let path = dir.join(format!("regression_{v}.csv"));
            write_csv(&path, &REGRESSION_HEADER, &table)?;
            written.push(path);
        }
        Ok(written)
    }

    /// Scans each training corpus for the evaluation examples' token prefixes.
    pub fn contamination(&self) -> Result<Vec<ContaminationReport>> {
        let settings = &self.manifest.contamination;
        let vocab = settings.vocab_size.unwrap_or(self.manifest.vocab_grid[0]);
        let spec = self.primary_spec(vocab);
        let langs = self.load_languages()?;
        let reports: Vec<Result<ContaminationReport>> = self.pool.install(|| {
            langs
                .par_iter()
                .map(|lang| {
                    let path = self.model_path(&lang.tag, &spec);
                    if !path.exists() {
                        return Err(Error::MissingStage(format!("train ({} not found)", path.display())));
                    }
                    let model = TokenizerModel::load(&path)?;
                    contamination_scan(&lang.corpus, &lang.eval, &model, settings.prefix_len)
                })
                .collect()
        });
        let reports: Vec<ContaminationReport> = reports.into_iter().collect::<Result<_>>()?;
        let mut text = String::from(ContaminationReport::CSV_HEADER);
        text.push('\n');
        for r in &reports {
            text.push_str(&r.csv_row());
            text.push('\n');
        }
        write_atomic(&self.path(CONTAMINATION_FILE), text.as_bytes())?;
        Ok(reports)
    }
}

fn series_label(spec: &CellSpec) -> String {
    let mut s = format!("{}_{}", spec.algorithm, spec.scaling);
    if let Some(t) = spec.transition_fraction {
        s.push_str(&format!("_t{t}"));
    }
    s
}

fn adjust(rows: &mut [StatRow]) {
    let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    for (r, p) in rows.iter_mut().zip(bonferroni(&ps)) {
        r.p_adjusted = Some(p);
    }
}

/// Evenly spaced targets strictly inside every language's observed CTC range.
/// Falls back to the median observation when the ranges do not overlap.
pub fn auto_targets(observed: &BTreeMap<String, BTreeMap<usize, f64>>, count: usize) -> Vec<u64> {
    let ranges: Vec<(f64, f64)> = observed
        .values()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let lo = m.values().copied().fold(f64::INFINITY, f64::min);
            let hi = m.values().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    if ranges.is_empty() || count == 0 {
        return Vec::new();
    }
    let lo = ranges.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = ranges.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut targets: Vec<u64> = if hi - lo >= 2.0 {
        (1..=count)
            .map(|k| (lo + (hi - lo) * k as f64 / (count + 1) as f64).round() as u64)
            .collect()
    } else {
        let mut all: Vec<f64> = observed.values().flat_map(|m| m.values().copied()).collect();
        all.sort_by(f64::total_cmp);
        vec![all[all.len() / 2].round() as u64]
    };
    targets.dedup();
    targets
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_ids_round_trip() {
        for spec in [
            CellSpec { algorithm: Algorithm::Bpe, scaling: Scaling::None, vocab_size: 8192, transition_fraction: None },
            CellSpec {
                algorithm: Algorithm::SuperBpe,
                scaling: Scaling::BytePremium,
                vocab_size: 16384,
                transition_fraction: Some(0.9),
            },
            CellSpec { algorithm: Algorithm::Unigram, scaling: Scaling::BytePremium, vocab_size: 512, transition_fraction: None },
        ] {
            assert_eq!(CellSpec::parse(&spec.id()).unwrap(), spec);
        }
        assert_eq!(CellSpec::parse("superbpe_none_512_t0.9").unwrap().id(), "superbpe_none_512_t0.9");
        assert!(CellSpec::parse("bpe_half_512").is_err());
    }

    #[test]
    fn auto_targets_inside_shared_range() {
        let obs: BTreeMap<String, BTreeMap<usize, f64>> = [
            ("a".to_string(), [(512, 100.0), (1024, 60.0)].into_iter().collect()),
            ("b".to_string(), [(512, 120.0), (1024, 80.0)].into_iter().collect()),
        ]
        .into_iter()
        .collect();
        let t = auto_targets(&obs, 3);
        assert_eq!(t, vec![85, 90, 95]);
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("bogus".parse::<Stage>().is_err());
    }
}
