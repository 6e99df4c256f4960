//! Evaluation of a signal ranking against known adverse events: set-level
//! confusion counts, ROC curves, full and partial AUC, and AUC significance
//! comparison.
//!
//! Known adverse events are *sets* of event keys: a single side effect such
//! as nausea is recorded under many codes across the hierarchy levels, and
//! the sets differ in size. Counting is therefore asymmetric by design: a
//! known event counts as detected when at least one of its codes signals
//! (so large sets are not easier to miss), while false positives are counted
//! per code over the rest of the universe.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::EventKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("known set {set:?} is empty")]
    EmptyKnownSet { set: String },
    #[error("known set {set:?} contains {key}, which is outside the universe")]
    KnownCodeOutsideUniverse { set: String, key: String },
    #[error("signaled event {key} is outside the universe")]
    SignaledOutsideUniverse { key: String },
    #[error("scored event {key} is outside the universe")]
    ScoreOutsideUniverse { key: String },
    #[error("no known adverse-event sets: true positive rate is undefined")]
    NoKnownSets,
    #[error("every event in the universe is a known adverse-event code: false positive rate is undefined")]
    NoNegatives,
    #[error("fpr_max {0} outside (0, 1]")]
    FprMaxOutOfRange(f64),
    #[error("auc {0} outside [0, 1]")]
    AucOutOfRange(f64),
    #[error("positive and negative counts must be at least 1")]
    EmptyClass,
    #[error("correlation {0} outside [0, 1]")]
    CorrelationOutOfRange(f64),
    #[error("indistinguishable (zero variance)")]
    ZeroVariance,
    #[error("curve is not monotone at point {index}")]
    NonMonotoneCurve { index: usize },
}

/// One known adverse event and the set of event keys that record it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownAdeSet {
    name: String,
    codes: BTreeSet<EventKey>,
}

impl KnownAdeSet {
    pub fn new(name: String, codes: BTreeSet<EventKey>) -> Result<Self, EvalError> {
        if codes.is_empty() {
            return Err(EvalError::EmptyKnownSet { set: name });
        }
        Ok(KnownAdeSet { name, codes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn codes(&self) -> &BTreeSet<EventKey> {
        &self.codes
    }
}

/// Set-level confusion counts:
///
/// |              | known ADE set | other event code |
/// |--------------|---------------|------------------|
/// | signaled     | `detected`    | `false_positive` |
/// | not signaled | `missed`      | `true_negative`  |
///
/// `detected`/`missed` count known *sets*; `false_positive`/`true_negative`
/// count individual non-known codes of the universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub detected: usize,
    pub false_positive: usize,
    pub missed: usize,
    pub true_negative: usize,
    /// Number of known adverse-event sets.
    pub n_sets: usize,
}

impl ConfusionCounts {
    /// `detected / (detected + missed)`
    pub fn tpr(&self) -> f64 {
        self.detected as f64 / (self.detected + self.missed) as f64
    }

    /// `1 − true_negative / (false_positive + true_negative)`
    pub fn fpr(&self) -> f64 {
        1.0 - self.true_negative as f64 / (self.false_positive + self.true_negative) as f64
    }
}

fn check_universe(
    known: &[KnownAdeSet],
    universe: &BTreeSet<EventKey>,
) -> Result<BTreeSet<EventKey>, EvalError> {
    let mut union = BTreeSet::new();
    for set in known {
        for key in &set.codes {
            if !universe.contains(key) {
                return Err(EvalError::KnownCodeOutsideUniverse {
                    set: set.name.clone(),
                    key: key.to_string(),
                });
            }
            union.insert(key.clone());
        }
    }
    Ok(union)
}

/// Counts detections at one fixed signal set.
pub fn confusion(
    signaled: &BTreeSet<EventKey>,
    known: &[KnownAdeSet],
    universe: &BTreeSet<EventKey>,
) -> Result<ConfusionCounts, EvalError> {
    for key in signaled {
        if !universe.contains(key) {
            return Err(EvalError::SignaledOutsideUniverse {
                key: key.to_string(),
            });
        }
    }
    let union = check_universe(known, universe)?;
    let detected = known
        .iter()
        .filter(|set| set.codes.iter().any(|k| signaled.contains(k)))
        .count();
    let false_positive = signaled.iter().filter(|k| !union.contains(*k)).count();
    let non_known = universe.len() - union.len();
    Ok(ConfusionCounts {
        detected,
        false_positive,
        missed: known.len() - detected,
        true_negative: non_known - false_positive,
        n_sets: known.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// A threshold sweep: false and true positive rates are both nondecreasing
/// along the curve. The first point is the empty signal set at threshold
/// `+inf`; the last is the explicit everything-signaled point `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
    n_pos: usize,
    n_neg: usize,
}

impl RocCurve {
    /// Wraps externally produced points, checking monotonicity.
    pub fn from_points(
        points: Vec<RocPoint>,
        n_pos: usize,
        n_neg: usize,
    ) -> Result<Self, EvalError> {
        for (i, pair) in points.windows(2).enumerate() {
            if pair[1].fpr < pair[0].fpr || pair[1].tpr < pair[0].tpr {
                return Err(EvalError::NonMonotoneCurve { index: i + 1 });
            }
        }
        if points
            .iter()
            .any(|p| !(0.0..=1.0).contains(&p.fpr) || !(0.0..=1.0).contains(&p.tpr))
        {
            return Err(EvalError::NonMonotoneCurve { index: 0 });
        }
        Ok(RocCurve {
            points,
            n_pos,
            n_neg,
        })
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Number of known adverse-event sets behind the sweep.
    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    /// Number of non-known event codes in the universe.
    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    /// TSV export: `threshold<TAB>fpr<TAB>tpr`.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "threshold\tfpr\ttpr")?;
        for p in &self.points {
            writeln!(writer, "{}\t{}\t{}", p.threshold, p.fpr, p.tpr)?;
        }
        Ok(())
    }
}

/// Sweeps signal thresholds down through the distinct finite scores and
/// evaluates the confusion counts at each.
///
/// At threshold `t` the signal set is every event with `score >= t`. Events
/// missing from `scores` (or with a non-finite score) have no defined
/// estimate and are never signaled at any finite threshold; the curve is
/// closed by an explicit everything-signaled point at `(1, 1)`.
pub fn roc_curve(
    scores: &BTreeMap<EventKey, f64>,
    known: &[KnownAdeSet],
    universe: &BTreeSet<EventKey>,
) -> Result<RocCurve, EvalError> {
    for key in scores.keys() {
        if !universe.contains(key) {
            return Err(EvalError::ScoreOutsideUniverse {
                key: key.to_string(),
            });
        }
    }
    let union = check_universe(known, universe)?;
    let n_pos = known.len();
    let n_neg = universe.len() - union.len();
    if n_pos == 0 {
        return Err(EvalError::NoKnownSets);
    }
    if n_neg == 0 {
        return Err(EvalError::NoNegatives);
    }

    // Which sets each key belongs to (a key may record several known events).
    let mut membership: HashMap<&EventKey, Vec<usize>> = HashMap::new();
    for (j, set) in known.iter().enumerate() {
        for key in &set.codes {
            membership.entry(key).or_default().push(j);
        }
    }

    let mut scored: Vec<(&EventKey, f64)> = scores
        .iter()
        .filter(|(_, s)| s.is_finite())
        .map(|(k, s)| (k, *s))
        .collect();
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut hits_per_set = vec![0usize; n_pos];
    let mut detected = 0usize;
    let mut false_positive = 0usize;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].1;
        // absorb the whole tied group before emitting a point
        while i < scored.len() && scored[i].1 == threshold {
            let key = scored[i].0;
            match membership.get(key) {
                Some(sets) => {
                    for &j in sets {
                        if hits_per_set[j] == 0 {
                            detected += 1;
                        }
                        hits_per_set[j] += 1;
                    }
                }
                None => false_positive += 1,
            }
            i += 1;
        }
        let counts = ConfusionCounts {
            detected,
            false_positive,
            missed: n_pos - detected,
            true_negative: n_neg - false_positive,
            n_sets: n_pos,
        };
        points.push(RocPoint {
            threshold,
            fpr: counts.fpr(),
            tpr: counts.tpr(),
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    points.dedup_by(|later, earlier| later.fpr == earlier.fpr && later.tpr == earlier.tpr);

    Ok(RocCurve {
        points,
        n_pos,
        n_neg,
    })
}

fn clipped_trapezoid(curve: &RocCurve, fpr_limit: f64) -> f64 {
    let mut area = 0.0;
    let mut prev = RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    };
    let anchor = RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    };
    for p in curve.points.iter().chain(std::iter::once(&anchor)) {
        if p.fpr <= fpr_limit {
            area += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
            prev = *p;
        } else {
            if prev.fpr < fpr_limit {
                // interpolate the crossing of the limit
                let t = (fpr_limit - prev.fpr) / (p.fpr - prev.fpr);
                let tpr_at = prev.tpr + t * (p.tpr - prev.tpr);
                area += (fpr_limit - prev.fpr) * (tpr_at + prev.tpr) / 2.0;
            }
            break;
        }
    }
    area
}

/// Trapezoidal area under the curve over the full false-positive range,
/// with `(0,0)` and `(1,1)` anchors.
pub fn auc(curve: &RocCurve) -> f64 {
    clipped_trapezoid(curve, 1.0)
}

/// Trapezoidal area restricted to `fpr <= fpr_max`, interpolating the curve
/// at the cut. The value is *not* normalised: a perfect curve scores
/// `fpr_max`, not 1.
pub fn partial_auc(curve: &RocCurve, fpr_max: f64) -> Result<f64, EvalError> {
    if !(fpr_max > 0.0 && fpr_max <= 1.0) {
        return Err(EvalError::FprMaxOutOfRange(fpr_max));
    }
    Ok(clipped_trapezoid(curve, fpr_max))
}

/// An AUC with the standard error implied by its class sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    pub se: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl AucResult {
    pub fn from_curve(curve: &RocCurve) -> Result<Self, EvalError> {
        let auc = auc(curve);
        Ok(AucResult {
            auc,
            se: auc_se(auc, curve.n_pos, curve.n_neg)?,
            n_pos: curve.n_pos,
            n_neg: curve.n_neg,
        })
    }
}

/// Standard error of an AUC for `n_pos` positive and `n_neg` negative units:
///
/// `sqrt[(A(1−A) + (n_pos−1)(Q1−A²) + (n_neg−1)(Q2−A²)) / (n_pos·n_neg)]`
///
/// with `Q1 = A/(2−A)` and `Q2 = 2A²/(1+A)`. The error vanishes at the
/// degenerate values 0 and 1.
pub fn auc_se(auc: f64, n_pos: usize, n_neg: usize) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&auc) {
        return Err(EvalError::AucOutOfRange(auc));
    }
    if n_pos < 1 || n_neg < 1 {
        return Err(EvalError::EmptyClass);
    }
    let a = auc;
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let numerator =
        a * (1.0 - a) + (n_pos as f64 - 1.0) * (q1 - a * a) + (n_neg as f64 - 1.0) * (q2 - a * a);
    Ok((numerator.max(0.0) / (n_pos as f64 * n_neg as f64)).sqrt())
}

/// Two-sided z comparison of a pair of AUCs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucComparison {
    pub auc1: f64,
    pub se1: f64,
    pub auc2: f64,
    pub se2: f64,
    /// Correlation between the two estimates; 0 for independent datasets.
    pub r: f64,
    pub z: f64,
    pub p: f64,
}

/// `z = (auc1 − auc2) / sqrt(se1² + se2² − 2·r·se1·se2)` with the two-sided
/// normal tail probability. `r` is the correlation between the estimates;
/// pass 0 when the curves come from unrelated datasets.
pub fn compare_auc(a1: &AucResult, a2: &AucResult, r: f64) -> Result<AucComparison, EvalError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(EvalError::CorrelationOutOfRange(r));
    }
    // the cross term is grouped so that swapping the arguments yields a
    // bit-identical variance, keeping p exactly symmetric
    let variance = a1.se * a1.se + a2.se * a2.se - 2.0 * r * (a1.se * a2.se);
    if variance <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let z = (a1.auc - a2.auc) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(AucComparison {
        auc1: a1.auc,
        se1: a1.se,
        auc2: a2.auc,
        se2: a2.se,
        r,
        z,
        p,
    })
}
