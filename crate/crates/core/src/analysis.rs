//! Proportions of probe and attack targets per condition, and the
//! pattern-level comparison against imported human data.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CostScheme, ServerKind};
use crate::ibl::Stage;
use crate::record::DecisionRecord;
use crate::scalar::Scalar;

/// Maximum cross-condition spread for a proportion to count as flat.
pub const FLATNESS_TOLERANCE: f64 = 0.05;
/// Allowed deviation from 1 for rows of imported (rounded) human data.
pub const HUMAN_ROW_TOLERANCE: f64 = 0.02;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no {stage} decisions for condition {condition}")]
    MissingData { condition: CostScheme, stage: &'static str },
    #[error("no records to aggregate")]
    Empty,
    #[error("conditions differ: model has {model:?}, human data has {human:?}")]
    ConditionMismatch {
        model: Vec<CostScheme>,
        human: Vec<CostScheme>,
    },
    #[error("human data: {0}")]
    HumanData(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Proportions of one stage's decisions by target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple<F> {
    pub regular: F,
    pub honeypot: F,
    pub none: F,
}

impl<F: Scalar> Triple<F> {
    pub fn new(regular: f64, honeypot: f64, none: f64) -> Self {
        Self {
            regular: F::of(regular),
            honeypot: F::of(honeypot),
            none: F::of(none),
        }
    }

    pub fn sum(&self) -> F {
        self.regular + self.honeypot + self.none
    }

    pub fn cells(&self) -> [(Cell, F); 3] {
        [
            (Cell::Regular, self.regular),
            (Cell::Honeypot, self.honeypot),
            (Cell::None, self.none),
        ]
    }

    pub fn get(&self, cell: Cell) -> F {
        match cell {
            Cell::Regular => self.regular,
            Cell::Honeypot => self.honeypot,
            Cell::None => self.none,
        }
    }

    fn from_counts(counts: [usize; 3]) -> Self {
        let total = F::of(counts.iter().sum::<usize>() as f64);
        let p = |c: usize| F::of(c as f64) / total;
        Self {
            regular: p(counts[0]),
            honeypot: p(counts[1]),
            none: p(counts[2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Probe,
    Attack,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Probe, Measure::Attack];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Probe => "probe",
            Measure::Attack => "attack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cell {
    Regular,
    Honeypot,
    None,
}

impl Cell {
    pub fn as_str(self) -> &'static str {
        match self {
            Cell::Regular => "regular",
            Cell::Honeypot => "honeypot",
            Cell::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats<F> {
    pub condition: CostScheme,
    pub probe: Triple<F>,
    pub attack: Triple<F>,
}

impl<F: Scalar> ConditionStats<F> {
    pub fn measure(&self, m: Measure) -> &Triple<F> {
        match m {
            Measure::Probe => &self.probe,
            Measure::Attack => &self.attack,
        }
    }
}

/// Per-condition proportions, ordered by increasing probing cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats<F> {
    pub conditions: Vec<ConditionStats<F>>,
}

impl<F: Scalar> AggregateStats<F> {
    pub fn get(&self, condition: CostScheme) -> Option<&ConditionStats<F>> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    pub fn condition_list(&self) -> Vec<CostScheme> {
        self.conditions.iter().map(|c| c.condition).collect()
    }

    /// Values of one cell across conditions, in cost order.
    pub fn series(&self, measure: Measure, cell: Cell) -> Vec<F> {
        self.conditions
            .iter()
            .map(|c| c.measure(measure).get(cell))
            .collect()
    }

    /// Max minus min of one cell across conditions.
    pub fn spread(&self, measure: Measure, cell: Cell) -> F {
        let s = self.series(measure, cell);
        let max = s.iter().copied().fold(F::neg_infinity(), F::max);
        let min = s.iter().copied().fold(F::infinity(), F::min);
        if s.is_empty() {
            F::zero()
        } else {
            max - min
        }
    }

    /// Regular and honeypot proportions both vary by at most `tolerance`.
    pub fn is_flat(&self, measure: Measure, tolerance: F) -> bool {
        [Cell::Regular, Cell::Honeypot]
            .into_iter()
            .all(|cell| self.spread(measure, cell) <= tolerance)
    }

    /// The `none` proportion never drops as probing gets more expensive.
    pub fn none_non_decreasing(&self, measure: Measure) -> bool {
        self.series(measure, Cell::None)
            .windows(2)
            .all(|w| w[0] <= w[1])
    }
}

/// Proportions of probe and attack targets for each condition in `records`.
pub fn aggregate<F: Scalar>(records: &[DecisionRecord]) -> Result<AggregateStats<F>, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::Empty);
    }
    // [stage][cell] counts per condition
    let mut counts: BTreeMap<CostScheme, [[usize; 3]; 2]> = BTreeMap::new();
    for r in records {
        let stage = match r.stage {
            Stage::Probe => 0,
            Stage::Attack => 1,
        };
        let cell = match r.target_kind {
            Some(ServerKind::Regular) => 0,
            Some(ServerKind::Honeypot) => 1,
            None => 2,
        };
        counts.entry(r.condition).or_default()[stage][cell] += 1;
    }
    let conditions = counts
        .into_iter()
        .map(|(condition, [probe, attack])| {
            for (c, stage) in [(probe, "probe"), (attack, "attack")] {
                if c.iter().sum::<usize>() == 0 {
                    return Err(AnalysisError::MissingData { condition, stage });
                }
            }
            Ok(ConditionStats {
                condition,
                probe: Triple::from_counts(probe),
                attack: Triple::from_counts(attack),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(AggregateStats { conditions })
}

/// Human proportions for the same measures, imported from aggregate tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanDataTable<F> {
    pub source: String,
    pub stats: AggregateStats<F>,
}

#[derive(Debug, Deserialize)]
struct HumanRow {
    condition: CostScheme,
    measure: Measure,
    regular: f64,
    honeypot: f64,
    none: f64,
}

impl<F: Scalar> HumanDataTable<F> {
    /// Parses `condition,measure,regular,honeypot,none` rows. Every condition
    /// needs one probe and one attack row.
    pub fn from_csv<R: Read>(input: R, source: impl Into<String>) -> Result<Self, AnalysisError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut rows: BTreeMap<CostScheme, [Option<Triple<F>>; 2]> = BTreeMap::new();
        for row in reader.deserialize::<HumanRow>() {
            let row = row?;
            let triple = Triple::<F>::new(row.regular, row.honeypot, row.none);
            for (cell, v) in triple.cells() {
                if !(v >= F::zero() && v <= F::one()) {
                    return Err(AnalysisError::HumanData(format!(
                        "{} {} {} = {v} is not a proportion",
                        row.condition,
                        row.measure.as_str(),
                        cell.as_str()
                    )));
                }
            }
            if (triple.sum() - F::one()).abs() > F::of(HUMAN_ROW_TOLERANCE) {
                return Err(AnalysisError::HumanData(format!(
                    "{} {} row sums to {}",
                    row.condition,
                    row.measure.as_str(),
                    triple.sum()
                )));
            }
            let slot = &mut rows.entry(row.condition).or_default()[row.measure as usize];
            if slot.replace(triple).is_some() {
                return Err(AnalysisError::HumanData(format!(
                    "duplicate {} row for {}",
                    row.measure.as_str(),
                    row.condition
                )));
            }
        }
        if rows.is_empty() {
            return Err(AnalysisError::HumanData("no rows".into()));
        }
        let conditions = rows
            .into_iter()
            .map(|(condition, [probe, attack])| match (probe, attack) {
                (Some(probe), Some(attack)) => Ok(ConditionStats {
                    condition,
                    probe,
                    attack,
                }),
                _ => Err(AnalysisError::HumanData(format!(
                    "{condition} needs both a probe and an attack row"
                ))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            source: source.into(),
            stats: AggregateStats { conditions },
        })
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let file = fs::File::open(path).map_err(|source| AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(file, path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDelta<F> {
    pub condition: CostScheme,
    pub measure: Measure,
    pub cell: Cell,
    pub model: F,
    pub human: F,
    /// `model - human`.
    pub delta: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCheck {
    pub model: bool,
    pub human: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub model: bool,
    /// `None` when the human data has no such decisions at all.
    pub human: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternChecks {
    pub probe_flat: SideCheck,
    pub attack_flat: SideCheck,
    pub no_probe_non_decreasing: TrendCheck,
    pub no_attack_non_decreasing: TrendCheck,
}

impl PatternChecks {
    /// All checks that apply to the model side hold.
    pub fn model_passes(&self) -> bool {
        self.probe_flat.model
            && self.attack_flat.model
            && self.no_probe_non_decreasing.model
            && self.no_attack_non_decreasing.model
    }

    pub fn all_pass(&self) -> bool {
        self.model_passes()
            && self.probe_flat.human
            && self.attack_flat.human
            && self.no_probe_non_decreasing.human != Some(false)
            && self.no_attack_non_decreasing.human != Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<F> {
    pub human_source: String,
    pub flatness_tolerance: F,
    pub deltas: Vec<CellDelta<F>>,
    pub max_abs_delta: F,
    pub checks: PatternChecks,
    pub note: String,
}

/// Compares model proportions with human proportions cell by cell and checks
/// the shared qualitative patterns.
pub fn compare<F: Scalar>(
    model: &AggregateStats<F>,
    human: &HumanDataTable<F>,
) -> Result<ComparisonReport<F>, AnalysisError> {
    let model_conditions = model.condition_list();
    let human_conditions = human.stats.condition_list();
    if model_conditions != human_conditions {
        return Err(AnalysisError::ConditionMismatch {
            model: model_conditions,
            human: human_conditions,
        });
    }

    let mut deltas = Vec::new();
    for (m, h) in model.conditions.iter().zip(&human.stats.conditions) {
        for measure in Measure::ALL {
            for ((cell, mv), (_, hv)) in m.measure(measure).cells().into_iter().zip(h.measure(measure).cells()) {
                deltas.push(CellDelta {
                    condition: m.condition,
                    measure,
                    cell,
                    model: mv,
                    human: hv,
                    delta: mv - hv,
                });
            }
        }
    }
    let max_abs_delta = deltas
        .iter()
        .map(|d| d.delta.abs())
        .fold(F::zero(), F::max);

    let tol = F::of(FLATNESS_TOLERANCE);
    let human_trend = |measure| {
        let never = human
            .stats
            .series(measure, Cell::None)
            .iter()
            .all(|v| *v == F::zero());
        (!never).then(|| human.stats.none_non_decreasing(measure))
    };
    let checks = PatternChecks {
        probe_flat: SideCheck {
            model: model.is_flat(Measure::Probe, tol),
            human: human.stats.is_flat(Measure::Probe, tol),
        },
        attack_flat: SideCheck {
            model: model.is_flat(Measure::Attack, tol),
            human: human.stats.is_flat(Measure::Attack, tol),
        },
        no_probe_non_decreasing: TrendCheck {
            model: model.none_non_decreasing(Measure::Probe),
            human: human_trend(Measure::Probe),
        },
        no_attack_non_decreasing: TrendCheck {
            model: model.none_non_decreasing(Measure::Attack),
            human: human_trend(Measure::Attack),
        },
    };

    Ok(ComparisonReport {
        human_source: human.source.clone(),
        flatness_tolerance: tol,
        deltas,
        max_abs_delta,
        checks,
        note: "Model runs use a fixed number of probe decisions per round while human \
               participants probe freely, so cell deltas are descriptive only; the \
               comparison is about shared patterns, not absolute agreement."
            .into(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Report<F> {
    pub model: AggregateStats<F>,
    pub human: Option<HumanDataTable<F>>,
    pub comparison: Option<ComparisonReport<F>>,
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub model_csv: PathBuf,
    pub human_csv: Option<PathBuf>,
}

/// Plot-ready table: one row per measure/cell, one column per condition.
pub fn plot_csv<F: Scalar>(stats: &AggregateStats<F>) -> String {
    let mut out = String::from("measure");
    for c in &stats.conditions {
        out.push(',');
        out.push_str(c.condition.as_str());
    }
    out.push('\n');
    for measure in Measure::ALL {
        for cell in [Cell::Regular, Cell::Honeypot, Cell::None] {
            out.push_str(&format!("{}-{}", measure.as_str(), cell.as_str()));
            for v in stats.series(measure, cell) {
                out.push_str(&format!(",{:.6}", v.to_f64_lossy()));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `json_path` plus `<stem>_model.csv` (and `<stem>_human.csv` when
/// human data is given) next to it.
pub fn emit_report<F: Scalar>(
    stats: &AggregateStats<F>,
    human: Option<&HumanDataTable<F>>,
    comparison: Option<&ComparisonReport<F>>,
    json_path: &Path,
) -> Result<ReportFiles, AnalysisError> {
    let write = |path: &Path, text: &str| {
        fs::write(path, text).map_err(|source| AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let sibling = |suffix: &str| {
        let stem = json_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "report".into());
        json_path.with_file_name(format!("{stem}_{suffix}.csv"))
    };

    let report = Report {
        model: stats.clone(),
        human: human.cloned(),
        comparison: comparison.cloned(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(json_path, &(json + "\n"))?;

    let model_csv = sibling("model");
    write(&model_csv, &plot_csv(stats))?;
    let human_csv = match human {
        Some(h) => {
            let path = sibling("human");
            write(&path, &plot_csv(&h.stats))?;
            Some(path)
        }
        None => None,
    };
    Ok(ReportFiles {
        json: json_path.to_path_buf(),
        model_csv,
        human_csv,
    })
}
