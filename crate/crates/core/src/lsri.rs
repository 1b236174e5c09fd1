//! Scalability risk index: maps raw operational metrics onto unit-interval
//! risk scores, folds them into a weighted readiness index, and scales the
//! result by an integrity multiplier derived from measured security
//! violations.
//!
//! The index is `phi * (1 - sum(w_i * f_i(x_i)))` where each `f_i` is one of
//! the mapping families below and `phi` is the product of
//! `max(0, 1 - sensitivity * magnitude)` over violations. A multiplier of
//! zero forces the published score to zero no matter how good the
//! operational numbers are. All arithmetic runs at full `f64` precision;
//! rounding happens only in display layers.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Absolute tolerance for the weights-sum-to-one invariant.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// How a raw metric is normalized into a unit-interval risk score.
///
/// Units are fixed per variant: milliseconds for `Sigmoid`, requests/day for
/// `Exponential`, parameter count for `Step`, currency/day for `LinearCost`,
/// updates/day for `LinearFreq`. `LinearReg` consumes a compliance fraction
/// already in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingSpec {
    /// Risk stays low until the latency threshold `tau`, then climbs with
    /// gradient controlled by `sigma`.
    Sigmoid { tau: f64, sigma: f64 },
    /// Risk decays toward zero as throughput approaches the industrial-scale
    /// target `lambda`.
    Exponential { lambda: f64 },
    /// Hard capacity bound: zero at or below `threshold`, one above it.
    Step { threshold: f64 },
    /// Risk grows linearly with spend up to the budget `ceiling`.
    LinearCost { ceiling: f64 },
    /// Risk shrinks linearly as update cadence approaches `target`.
    LinearFreq { target: f64 },
    /// Risk is one minus the implemented fraction of required controls.
    LinearReg,
}

impl MappingSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MappingSpec::Sigmoid { .. } => "sigmoid",
            MappingSpec::Exponential { .. } => "exponential",
            MappingSpec::Step { .. } => "step",
            MappingSpec::LinearCost { .. } => "linear_cost",
            MappingSpec::LinearFreq { .. } => "linear_freq",
            MappingSpec::LinearReg => "linear_reg",
        }
    }

    pub fn validate(&self) -> Result<(), LsriError> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LsriError::InvalidSpec { kind: self.kind(), param: name, value: v })
            }
        };
        match *self {
            MappingSpec::Sigmoid { tau, sigma } => {
                if !tau.is_finite() {
                    return Err(LsriError::InvalidSpec {
                        kind: self.kind(),
                        param: "tau",
                        value: tau,
                    });
                }
                check("sigma", sigma)
            }
            MappingSpec::Exponential { lambda } => check("lambda", lambda),
            MappingSpec::Step { threshold } => check("threshold", threshold),
            MappingSpec::LinearCost { ceiling } => check("ceiling", ceiling),
            MappingSpec::LinearFreq { target } => check("target", target),
            MappingSpec::LinearReg => Ok(()),
        }
    }

    /// Maps an observed raw metric onto `[0, 1]`.
    ///
    /// The sigmoid accepts any finite metric; all other families require
    /// `x >= 0`, and the regulatory mapping additionally requires `x <= 1`.
    pub fn evaluate(&self, x: f64) -> Result<f64, LsriError> {
        self.validate()?;
        if !x.is_finite() {
            return Err(LsriError::DomainError { kind: self.kind(), value: x });
        }
        let nonneg = |v: f64| -> Result<f64, LsriError> {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(LsriError::DomainError { kind: self.kind(), value: v })
            }
        };
        Ok(match *self {
            MappingSpec::Sigmoid { tau, sigma } => 1.0 / (1.0 + libm::exp(-((x - tau) / sigma))),
            MappingSpec::Exponential { lambda } => libm::exp(-(nonneg(x)? / lambda)),
            MappingSpec::Step { threshold } => {
                if nonneg(x)? <= threshold {
                    0.0
                } else {
                    1.0
                }
            }
            MappingSpec::LinearCost { ceiling } => (nonneg(x)? / ceiling).min(1.0),
            MappingSpec::LinearFreq { target } => (1.0 - nonneg(x)? / target).max(0.0),
            MappingSpec::LinearReg => {
                if x >= 0.0 && x <= 1.0 {
                    1.0 - x
                } else {
                    return Err(LsriError::DomainError { kind: self.kind(), value: x });
                }
            }
        })
    }
}

/// One weighted risk factor: a mapping, its parameters, and the metric
/// observed for this deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskFactor {
    pub id: String,
    pub weight: f64,
    pub mapping: MappingSpec,
    pub observed: f64,
}

/// A measured security violation: the violation rate in `[0, 1]` and a
/// severity coefficient scaling how hard it pulls the multiplier down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrityViolation {
    pub category: String,
    pub magnitude: f64,
    pub sensitivity: f64,
}

impl IntegrityViolation {
    pub fn validate(&self) -> Result<(), LsriError> {
        if !(self.magnitude.is_finite() && (0.0..=1.0).contains(&self.magnitude)) {
            return Err(LsriError::InvalidViolation {
                category: self.category.clone(),
                field: "magnitude",
                value: self.magnitude,
            });
        }
        if !(self.sensitivity.is_finite() && self.sensitivity >= 0.0) {
            return Err(LsriError::InvalidViolation {
                category: self.category.clone(),
                field: "sensitivity",
                value: self.sensitivity,
            });
        }
        Ok(())
    }
}

/// A complete scoring input: at least one factor, weights summing to one,
/// and zero or more integrity violations.
#[derive(Debug, Clone, PartialEq)]
pub struct LsriProfile {
    factors: Vec<RiskFactor>,
    violations: Vec<IntegrityViolation>,
}

impl LsriProfile {
    /// Validates and constructs a profile. Weights must sum to one within
    /// [`WEIGHT_SUM_TOLERANCE`]; there is deliberately no renormalization, so
    /// a mistyped weight is an error rather than a silently rescaled input.
    pub fn new(
        factors: Vec<RiskFactor>,
        violations: Vec<IntegrityViolation>,
    ) -> Result<Self, LsriError> {
        if factors.is_empty() {
            return Err(LsriError::EmptyProfile);
        }
        let mut seen = BTreeSet::new();
        for f in &factors {
            if f.id.is_empty() {
                return Err(LsriError::EmptyFactorId);
            }
            if !seen.insert(f.id.clone()) {
                return Err(LsriError::DuplicateFactor { id: f.id.clone() });
            }
            if !(f.weight.is_finite() && f.weight >= 0.0) {
                return Err(LsriError::InvalidWeight { id: f.id.clone(), weight: f.weight });
            }
            f.mapping.validate()?;
        }
        let sum: f64 = factors.iter().map(|f| f.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(LsriError::WeightSum { sum });
        }
        for v in &violations {
            v.validate()?;
        }
        Ok(LsriProfile { factors, violations })
    }

    /// Equal-weighting constructor: assigns `1/n` to every factor.
    pub fn with_equal_weights(
        factors: Vec<(String, MappingSpec, f64)>,
        violations: Vec<IntegrityViolation>,
    ) -> Result<Self, LsriError> {
        if factors.is_empty() {
            return Err(LsriError::EmptyProfile);
        }
        let w = 1.0 / factors.len() as f64;
        let factors = factors
            .into_iter()
            .map(|(id, mapping, observed)| RiskFactor { id, weight: w, mapping, observed })
            .collect();
        LsriProfile::new(factors, violations)
    }

    pub fn factors(&self) -> &[RiskFactor] {
        &self.factors
    }

    pub fn violations(&self) -> &[IntegrityViolation] {
        &self.violations
    }

    /// Returns a copy with the named factor's observed metric replaced.
    pub fn with_observed(&self, factor_id: &str, x: f64) -> Result<Self, LsriError> {
        let mut copy = self.clone();
        let factor = copy
            .factors
            .iter_mut()
            .find(|f| f.id == factor_id)
            .ok_or_else(|| LsriError::UnknownFactor { id: factor_id.to_string() })?;
        factor.observed = x;
        Ok(copy)
    }

    /// Returns a copy with the violation list replaced.
    pub fn with_violations(&self, violations: Vec<IntegrityViolation>) -> Result<Self, LsriError> {
        LsriProfile::new(self.factors.clone(), violations)
    }
}

/// Scoring output: the per-factor risks, the integrity multiplier, and the
/// index both raw and clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsriReport {
    pub per_factor_risk: Vec<FactorRisk>,
    pub phi: f64,
    pub raw_score: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRisk {
    pub id: String,
    pub observed: f64,
    pub weight: f64,
    pub risk: f64,
}

impl LsriReport {
    pub fn risk_for(&self, id: &str) -> Option<f64> {
        self.per_factor_risk.iter().find(|r| r.id == id).map(|r| r.risk)
    }
}

/// Product of `max(0, 1 - sensitivity * magnitude)` over all violations;
/// one for an empty list. Terms are multiplied in sorted order so the result
/// is bit-identical under any permutation of the input.
pub fn integrity_multiplier(violations: &[IntegrityViolation]) -> Result<f64, LsriError> {
    let mut terms: Vec<f64> = Vec::with_capacity(violations.len());
    for v in violations {
        v.validate()?;
        terms.push((1.0 - v.sensitivity * v.magnitude).max(0.0));
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().product())
}

/// Evaluates the full index for a profile.
pub fn compute_lsri(profile: &LsriProfile) -> Result<LsriReport, LsriError> {
    let phi = integrity_multiplier(profile.violations())?;
    let mut per_factor_risk = Vec::with_capacity(profile.factors().len());
    let mut weighted = 0.0f64;
    for f in profile.factors() {
        let risk = f.mapping.evaluate(f.observed)?;
        weighted += f.weight * risk;
        per_factor_risk.push(FactorRisk {
            id: f.id.clone(),
            observed: f.observed,
            weight: f.weight,
            risk,
        });
    }
    let raw_score = phi * (1.0 - weighted);
    let score = if raw_score <= 0.0 {
        0.0
    } else if raw_score >= 1.0 {
        1.0
    } else {
        raw_score
    };
    Ok(LsriReport { per_factor_risk, phi, raw_score, score })
}

/// One point of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub observed: f64,
    pub risk: f64,
    pub score: f64,
}

/// Re-scores the profile for each substitute metric of one factor, holding
/// every other factor, all weights, and the multiplier fixed.
pub fn sensitivity_sweep(
    profile: &LsriProfile,
    factor_id: &str,
    values: &[f64],
) -> Result<Vec<SweepPoint>, LsriError> {
    let mut points = Vec::with_capacity(values.len());
    for &x in values {
        let substituted = profile.with_observed(factor_id, x)?;
        let report = compute_lsri(&substituted)?;
        let risk = report.risk_for(factor_id).expect("factor present after substitution");
        points.push(SweepPoint { observed: x, risk, score: report.score });
    }
    Ok(points)
}

/// Side-by-side factor risks and scores for two profiles. Rows follow the
/// first profile's factor order; factors only present in the second profile
/// are appended after, in its order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub rows: Vec<ComparisonRow>,
    pub phi_a: f64,
    pub phi_b: f64,
    pub score_a: f64,
    pub score_b: f64,
    /// `score_a - score_b`; positive when the first profile is more ready.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub id: String,
    pub risk_a: Option<f64>,
    pub risk_b: Option<f64>,
}

pub fn compare_profiles(
    a: &LsriProfile,
    b: &LsriProfile,
) -> Result<ProfileComparison, LsriError> {
    let report_a = compute_lsri(a)?;
    let report_b = compute_lsri(b)?;
    let mut rows: Vec<ComparisonRow> = report_a
        .per_factor_risk
        .iter()
        .map(|r| ComparisonRow {
            id: r.id.clone(),
            risk_a: Some(r.risk),
            risk_b: report_b.risk_for(&r.id),
        })
        .collect();
    for r in &report_b.per_factor_risk {
        if report_a.risk_for(&r.id).is_none() {
            rows.push(ComparisonRow { id: r.id.clone(), risk_a: None, risk_b: Some(r.risk) });
        }
    }
    Ok(ProfileComparison {
        rows,
        phi_a: report_a.phi,
        phi_b: report_b.phi,
        score_a: report_a.score,
        score_b: report_b.score,
        delta: report_a.score - report_b.score,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LsriError {
    #[error("invalid {kind} mapping: parameter {param} = {value}")]
    InvalidSpec { kind: &'static str, param: &'static str, value: f64 },
    #[error("metric {value} outside the domain of the {kind} mapping")]
    DomainError { kind: &'static str, value: f64 },
    #[error("profile must contain at least one factor")]
    EmptyProfile,
    #[error("factor id must be non-empty")]
    EmptyFactorId,
    #[error("duplicate factor id {id:?}")]
    DuplicateFactor { id: String },
    #[error("factor {id:?} has invalid weight {weight}")]
    InvalidWeight { id: String, weight: f64 },
    #[error("factor weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("violation {category:?} has invalid {field} = {value}")]
    InvalidViolation { category: String, field: &'static str, value: f64 },
    #[error("no factor with id {id:?}")]
    UnknownFactor { id: String },
}

// ---------------------------------------------------------------------------
// Serialization. Mappings appear as objects with a `kind` discriminator and
// exactly the parameters of that kind; unknown or missing parameters are
// rejected rather than ignored.
// ---------------------------------------------------------------------------

impl Serialize for MappingSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("kind", self.kind())?;
        match *self {
            MappingSpec::Sigmoid { tau, sigma } => {
                map.serialize_entry("sigma", &sigma)?;
                map.serialize_entry("tau", &tau)?;
            }
            MappingSpec::Exponential { lambda } => map.serialize_entry("lambda", &lambda)?,
            MappingSpec::Step { threshold } => map.serialize_entry("threshold", &threshold)?,
            MappingSpec::LinearCost { ceiling } => map.serialize_entry("ceiling", &ceiling)?,
            MappingSpec::LinearFreq { target } => map.serialize_entry("target", &target)?,
            MappingSpec::LinearReg => {}
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for MappingSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            kind: String,
            tau: Option<f64>,
            sigma: Option<f64>,
            lambda: Option<f64>,
            threshold: Option<f64>,
            ceiling: Option<f64>,
            target: Option<f64>,
        }

        let raw = Raw::deserialize(deserializer)?;
        let require = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| D::Error::custom(format_args!("missing parameter `{name}`")))
        };

        let mut extras: Vec<&str> = Vec::new();
        let mut note_extra = |name: &'static str, v: &Option<f64>| {
            if v.is_some() {
                extras.push(name);
            }
        };

        let spec = match raw.kind.as_str() {
            "sigmoid" => {
                note_extra("lambda", &raw.lambda);
                note_extra("threshold", &raw.threshold);
                note_extra("ceiling", &raw.ceiling);
                note_extra("target", &raw.target);
                MappingSpec::Sigmoid {
                    tau: require("tau", raw.tau)?,
                    sigma: require("sigma", raw.sigma)?,
                }
            }
            "exponential" => {
                note_extra("tau", &raw.tau);
                note_extra("sigma", &raw.sigma);
                note_extra("threshold", &raw.threshold);
                note_extra("ceiling", &raw.ceiling);
                note_extra("target", &raw.target);
                MappingSpec::Exponential { lambda: require("lambda", raw.lambda)? }
            }
            "step" => {
                note_extra("tau", &raw.tau);
                note_extra("sigma", &raw.sigma);
                note_extra("lambda", &raw.lambda);
                note_extra("ceiling", &raw.ceiling);
                note_extra("target", &raw.target);
                MappingSpec::Step { threshold: require("threshold", raw.threshold)? }
            }
            "linear_cost" => {
                note_extra("tau", &raw.tau);
                note_extra("sigma", &raw.sigma);
                note_extra("lambda", &raw.lambda);
                note_extra("threshold", &raw.threshold);
                note_extra("target", &raw.target);
                MappingSpec::LinearCost { ceiling: require("ceiling", raw.ceiling)? }
            }
            "linear_freq" => {
                note_extra("tau", &raw.tau);
                note_extra("sigma", &raw.sigma);
                note_extra("lambda", &raw.lambda);
                note_extra("threshold", &raw.threshold);
                note_extra("ceiling", &raw.ceiling);
                MappingSpec::LinearFreq { target: require("target", raw.target)? }
            }
            "linear_reg" => {
                note_extra("tau", &raw.tau);
                note_extra("sigma", &raw.sigma);
                note_extra("lambda", &raw.lambda);
                note_extra("threshold", &raw.threshold);
                note_extra("ceiling", &raw.ceiling);
                note_extra("target", &raw.target);
                MappingSpec::LinearReg
            }
            other => {
                return Err(D::Error::custom(format_args!("unknown mapping kind `{other}`")))
            }
        };
        if let Some(extra) = extras.first() {
            return Err(D::Error::custom(format_args!(
                "parameter `{extra}` is not valid for mapping kind `{}`",
                raw.kind
            )));
        }
        Ok(spec)
    }
}

/// On-disk profile document: `weight` may be omitted, but only all-or-none —
/// omitting every weight selects equal weighting, while a mix of explicit and
/// omitted weights is rejected as a configuration error.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    factors: Vec<FactorDoc>,
    #[serde(default)]
    violations: Vec<IntegrityViolation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    id: String,
    weight: Option<f64>,
    mapping: MappingSpec,
    observed: f64,
}

impl LsriProfile {
    /// Parses the JSON profile document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ProfileParseError> {
        let doc: ProfileDoc =
            serde_json::from_slice(bytes).map_err(|e| ProfileParseError::Json(e.to_string()))?;
        let explicit = doc.factors.iter().filter(|f| f.weight.is_some()).count();
        if explicit != 0 && explicit != doc.factors.len() {
            return Err(ProfileParseError::MixedWeights);
        }
        let n = doc.factors.len().max(1);
        let default_weight = 1.0 / n as f64;
        let factors = doc
            .factors
            .into_iter()
            .map(|f| RiskFactor {
                id: f.id,
                weight: f.weight.unwrap_or(default_weight),
                mapping: f.mapping,
                observed: f.observed,
            })
            .collect();
        LsriProfile::new(factors, doc.violations).map_err(ProfileParseError::Invalid)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            factors: &'a [RiskFactor],
            violations: &'a [IntegrityViolation],
        }
        serde_json::to_string(&Doc { factors: &self.factors, violations: &self.violations })
            .expect("profile serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileParseError {
    #[error("profile is not valid JSON: {0}")]
    Json(String),
    #[error("either all factor weights must be given or none (equal weighting)")]
    MixedWeights,
    #[error(transparent)]
    Invalid(LsriError),
}
