use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::{backwards_map, MeasurementError, MeasurementModel, REMAINDER};
use crate::histories::{EventLabel, HistoryError};
use crate::linalg::Ket;
use crate::objects::Observable;
use crate::Tolerances;

/// Pointer outcomes read as eigenvalue `value` of `A`. An outcome belongs to
/// the group when its label contains every atom of one of the patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGroup {
    pub value: f64,
    pub patterns: Vec<String>,
}

impl CoarseGroup {
    pub fn new(value: f64, patterns: Vec<String>) -> Self {
        Self { value, patterns }
    }

    fn matches(&self, label: &str) -> bool {
        let l = EventLabel::from(label);
        self.patterns
            .iter()
            .any(|p| l.contains_all(&EventLabel::from(p.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probe: Ket,
    /// `Pr(A = a)` per group under the first model.
    pub first: Vec<f64>,
    /// Same under the second model.
    pub second: Vec<f64>,
    /// `⟨ψ|P_a|ψ⟩` from the spectral projectors of `A`.
    pub born: Vec<f64>,
    pub max_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoncontextualityReport {
    pub values: Vec<f64>,
    pub probes: Vec<ProbeReport>,
    pub threshold: f64,
    pub passed: bool,
}

impl NoncontextualityReport {
    pub fn max_difference(&self) -> f64 {
        self.probes.iter().map(|p| p.max_difference).fold(0.0, f64::max)
    }
}

fn grouping(model: &MeasurementModel, groups: &[CoarseGroup]) -> Result<Vec<Vec<String>>, MeasurementError> {
    let mut members = alloc::vec![Vec::new(); groups.len()];
    for label in model.outcome_labels() {
        let hits: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].matches(label)).collect();
        match hits.as_slice() {
            [g] => members[*g].push(String::from(label)),
            [] => {
                return Err(MeasurementError::CoarseGrainMismatch(format!(
                    "outcome `{label}` is in no group"
                )))
            }
            _ => {
                return Err(MeasurementError::CoarseGrainMismatch(format!(
                    "outcome `{label}` is in {} groups",
                    hits.len()
                )))
            }
        }
    }
    Ok(members)
}

/// Compares the distribution of `A`'s eigenvalue, read off the pointer,
/// between two apparatus settings for each probe state.
pub fn noncontextuality_check(
    first: &MeasurementModel,
    second: &MeasurementModel,
    a: &Observable,
    probes: &[Ket],
    groups: &[CoarseGroup],
    tol: &Tolerances,
) -> Result<NoncontextualityReport, MeasurementError> {
    let n = a.matrix().rows();
    for m in [first, second] {
        if m.system_dim() != n {
            return Err(MeasurementError::DimensionMismatch {
                expected: n,
                actual: m.system_dim(),
            });
        }
    }
    let mut projectors = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        if groups[..i].iter().any(|h| Float::abs(h.value - g.value) <= tol.group) {
            return Err(MeasurementError::CoarseGrainMismatch(format!(
                "eigenvalue {} listed twice",
                g.value
            )));
        }
        let p = a
            .projector_for(g.value, tol.group)
            .ok_or_else(|| MeasurementError::CoarseGrainMismatch(format!("{} is not an eigenvalue of A", g.value)))?;
        projectors.push(p.clone());
    }
    if groups.iter().any(|g| g.patterns.iter().any(|p| p == REMAINDER)) {
        return Err(MeasurementError::CoarseGrainMismatch(
            "the remainder outcome cannot be grouped".into(),
        ));
    }
    let sides = [first, second]
        .into_iter()
        .map(|m| {
            let members = grouping(m, groups)?;
            members
                .into_iter()
                .map(|ls| {
                    let n = m.system_dim();
                    ls.iter().try_fold(crate::linalg::ComplexMatrix::zeros(n, n), |acc, l| {
                        Ok::<_, MeasurementError>(&acc + &backwards_map(m, l)?)
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let threshold = tol.derived();
    let mut reports = Vec::with_capacity(probes.len());
    for psi in probes {
        if psi.dim() != n {
            return Err(MeasurementError::DimensionMismatch {
                expected: n,
                actual: psi.dim(),
            });
        }
        if !psi.is_normalized(tol.derived()) {
            return Err(HistoryError::NotNormalized(psi.norm()).into());
        }
        let eval = |ops: &Vec<crate::linalg::ComplexMatrix>| -> Result<Vec<f64>, MeasurementError> {
            ops.iter().map(|q| Ok(psi.expectation(q)?.re)).collect()
        };
        let p1 = eval(&sides[0])?;
        let p2 = eval(&sides[1])?;
        let born = eval(&projectors)?;
        let max_difference = p1.iter().zip(&p2).map(|(x, y)| Float::abs(x - y)).fold(0.0, f64::max);
        reports.push(ProbeReport {
            probe: psi.clone(),
            first: p1,
            second: p2,
            born,
            max_difference,
        });
    }
    let passed = reports.iter().all(|r| r.max_difference <= threshold);
    Ok(NoncontextualityReport {
        values: groups.iter().map(|g| g.value).collect(),
        probes: reports,
        threshold,
        passed,
    })
}
