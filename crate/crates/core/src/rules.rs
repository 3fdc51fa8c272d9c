//! Fabrication rules for high-speed vias, post-fabrication audits against
//! them, and the matching fabrication-drawing notes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExtraRule {
    pub name: String,
    pub limit: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSet {
    pub pad_diameter_tolerance_mil: f64,
    pub max_layer_shift_mil: f64,
    pub max_wicking_mil: f64,
    pub extra_rules: Vec<ExtraRule>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self {
            pad_diameter_tolerance_mil: 0.5,
            max_layer_shift_mil: 2.0,
            max_wicking_mil: 1.0,
            extra_rules: Vec::new(),
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<()> {
        let limits = [
            ("pad_diameter_tolerance_mil", self.pad_diameter_tolerance_mil),
            ("max_layer_shift_mil", self.max_layer_shift_mil),
            ("max_wicking_mil", self.max_wicking_mil),
        ];
        for (name, v) in limits
            .into_iter()
            .chain(self.extra_rules.iter().map(|r| (r.name.as_str(), r.limit)))
        {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("rule limit {name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PadMeasurement {
    pub layer: String,
    pub designed_pad_mil: f64,
    pub measured_pad_mil: Option<f64>,
}

/// Layer shift as measured per layer or as a single worst value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum ShiftMeasurement {
    Max(f64),
    PerLayer(Vec<f64>),
}

impl ShiftMeasurement {
    fn values(&self) -> &[f64] {
        match self {
            Self::Max(v) => std::slice::from_ref(v),
            Self::PerLayer(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSource {
    pub vendor: Option<String>,
    pub lot: Option<String>,
    /// How shift from center was measured, e.g. "per_via" or "per_coupon".
    pub shift_reference: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryAudit {
    pub pads: Vec<PadMeasurement>,
    pub measured_layer_shift_mil: Option<ShiftMeasurement>,
    pub measured_wicking_mil: Option<f64>,
    /// Measurements for extra rules, keyed by rule name.
    pub extra_measurements: BTreeMap<String, f64>,
    pub source: AuditSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleStatus {
    Pass,
    Fail,
    NotEvaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub number: usize,
    pub name: String,
    pub status: RuleStatus,
    pub measured: Option<f64>,
    pub limit: f64,
    pub unit: String,
    /// `limit - measured`; negative when failing.
    pub margin: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub rules: Vec<RuleOutcome>,
    pub overall_pass: bool,
}

fn outcome(
    number: usize,
    name: &str,
    limit: f64,
    unit: &str,
    measured: std::result::Result<(f64, Option<String>), String>,
) -> RuleOutcome {
    match measured {
        Ok((m, detail)) => RuleOutcome {
            number,
            name: name.into(),
            status: if m <= limit { RuleStatus::Pass } else { RuleStatus::Fail },
            measured: Some(m),
            limit,
            unit: unit.into(),
            margin: Some(limit - m),
            detail,
        },
        Err(why) => RuleOutcome {
            number,
            name: name.into(),
            status: RuleStatus::NotEvaluated,
            measured: None,
            limit,
            unit: unit.into(),
            margin: None,
            detail: Some(why),
        },
    }
}

fn non_negative(v: f64, what: &str) -> std::result::Result<f64, String> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("invalid {what} measurement {v}"))
    }
}

fn pad_deviation(pads: &[PadMeasurement]) -> std::result::Result<(f64, Option<String>), String> {
    if pads.is_empty() {
        return Err("no pad measurements".into());
    }
    let mut worst: Option<(f64, &str)> = None;
    for p in pads {
        let measured = p
            .measured_pad_mil
            .ok_or_else(|| format!("pad on {} not measured", p.layer))?;
        let measured = non_negative(measured, "pad")?;
        let designed = non_negative(p.designed_pad_mil, "designed pad")?;
        let dev = (measured - designed).abs();
        if worst.map_or(true, |(w, _)| dev > w) {
            worst = Some((dev, &p.layer));
        }
    }
    let (dev, layer) = worst.expect("non-empty");
    Ok((dev, Some(format!("worst layer {layer}"))))
}

fn worst_shift(m: &Option<ShiftMeasurement>) -> std::result::Result<(f64, Option<String>), String> {
    let m = m.as_ref().ok_or("layer shift not measured")?;
    let values = m.values();
    if values.is_empty() {
        return Err("layer shift not measured".into());
    }
    let mut worst = 0.0f64;
    for &v in values {
        worst = worst.max(non_negative(v, "layer shift")?);
    }
    Ok((worst, None))
}

/// Audits measured geometry against `rules`. Limits are inclusive.
pub fn check_rules(audit: &GeometryAudit, rules: &RuleSet) -> RuleReport {
    let mut out = vec![
        outcome(
            1,
            "pad diameter unchanged",
            rules.pad_diameter_tolerance_mil,
            "mil",
            pad_deviation(&audit.pads),
        ),
        outcome(
            2,
            "layer shift from center",
            rules.max_layer_shift_mil,
            "mil",
            worst_shift(&audit.measured_layer_shift_mil),
        ),
        outcome(
            3,
            "copper wicking depth",
            rules.max_wicking_mil,
            "mil",
            audit
                .measured_wicking_mil
                .ok_or_else(|| "wicking not measured".to_string())
                .and_then(|w| non_negative(w, "wicking"))
                .map(|w| (w, None)),
        ),
    ];
    for (i, extra) in rules.extra_rules.iter().enumerate() {
        let measured = audit
            .extra_measurements
            .get(&extra.name)
            .copied()
            .ok_or_else(|| format!("{} not measured", extra.name))
            .and_then(|v| non_negative(v, &extra.name))
            .map(|v| (v, None));
        out.push(outcome(4 + i, &extra.name, extra.limit, &extra.unit, measured));
    }
    RuleReport {
        overall_pass: out.iter().all(|r| r.status == RuleStatus::Pass),
        rules: out,
    }
}

impl RuleReport {
    /// Human-readable summary, one line per rule.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            let status = match r.status {
                RuleStatus::Pass => "PASS",
                RuleStatus::Fail => "FAIL",
                RuleStatus::NotEvaluated => "NOT EVALUATED",
            };
            let _ = write!(s, "rule {} ({}): {status}", r.number, r.name);
            if let (Some(m), Some(margin)) = (r.measured, r.margin) {
                let _ = write!(
                    s,
                    ", measured {m:.3} {u}, limit {:.3} {u}, margin {margin:+.3} {u}",
                    r.limit,
                    u = r.unit
                );
            }
            if let Some(d) = &r.detail {
                let _ = write!(s, " [{d}]");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "overall: {}", if self.overall_pass { "PASS" } else { "FAIL" });
        s
    }
}

/// Numbered fabrication-drawing notes for `rules`.
pub fn emit_fab_notes(rules: &RuleSet) -> Result<String> {
    rules.validate()?;
    let mut s = String::from("HIGH-SPEED VIA FABRICATION NOTES\n");
    let _ = writeln!(
        s,
        "1. Via pad diameters shall not be changed from the drawing on any layer \
         (tolerance +/-{} mil). Do not add or enlarge pads.",
        rules.pad_diameter_tolerance_mil
    );
    let _ = writeln!(
        s,
        "2. Layer shifting shall not exceed {} mil from the drilled via center.",
        rules.max_layer_shift_mil
    );
    let _ = writeln!(
        s,
        "3. Copper wicking along the via barrel shall not exceed {} mil in depth.",
        rules.max_wicking_mil
    );
    for (i, r) in rules.extra_rules.iter().enumerate() {
        let _ = writeln!(s, "{}. {} shall not exceed {} {}.", 4 + i, r.name, r.limit, r.unit);
    }
    Ok(s)
}
