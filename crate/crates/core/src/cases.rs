//! Named verification cases: which immersion to build and what each check
//! is expected to show on it.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{Expectation, Verdict};
use crate::error::{LabError, Result};
use crate::gallery::ImmersionSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseName {
    /// Round sphere in the spacelike hyperplane `x1 = 0`.
    SphereHyperplane,
    /// `(cosh t, sinh t, y)` on the unit sphere.
    Counterexample,
    /// `alpha x S^{n-1}` for a hyperbola `alpha` in `L^2`.
    CylinderCurve,
    /// A Euclidean sphere lifted into the lightlike hyperplane `x1 = x_m`.
    LightlikeHyperplane,
    /// Immersion read from a JSON file.
    CustomSpecFile,
}

impl CaseName {
    pub const BUILT_IN: [CaseName; 4] = [
        CaseName::SphereHyperplane,
        CaseName::Counterexample,
        CaseName::CylinderCurve,
        CaseName::LightlikeHyperplane,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseName::SphereHyperplane => "sphere-hyperplane",
            CaseName::Counterexample => "counterexample",
            CaseName::CylinderCurve => "cylinder-curve",
            CaseName::LightlikeHyperplane => "lightlike-hyperplane",
            CaseName::CustomSpecFile => "custom-spec-file",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        CaseName::BUILT_IN
            .iter()
            .chain(std::iter::once(&CaseName::CustomSpecFile))
            .find(|c| c.as_str() == s)
            .copied()
            .ok_or_else(|| {
                LabError::Usage(format!(
                    "unknown case '{s}'; expected one of sphere-hyperplane, counterexample, cylinder-curve, \
                     lightlike-hyperplane, custom-spec-file"
                ))
            })
    }
}

/// How the causal-vector check should come out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalExpectation {
    /// `Q(ell, ell) = 0` for the case's `ell` and Reilly's inequality holds.
    KernelHit,
    /// No causal vector lies in the kernel of `Q`.
    NoCausalKernel,
    Informational,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseExpectations {
    pub reilly: Expectation,
    /// For bounds that become equalities on this case (E*, E, curvature quotient,
    /// position bounds, main lemma) with the reference direction.
    pub reference_bounds: Expectation,
    pub causal: CausalExpectation,
    /// Verdict at the reference direction.
    pub equality_reference: Option<Verdict>,
    /// Verdict at every sampled direction.
    pub equality_sampled: Option<Verdict>,
}

pub struct CaseDefinition {
    pub name: CaseName,
    pub spec: ImmersionSpec,
    pub expectations: CaseExpectations,
    /// `ell` for the causal-vector check; `None` leaves it to the kernel search.
    pub ell: Option<Vec<f64>>,
}

pub fn case_definition(
    name: CaseName,
    n: usize,
    m: Option<usize>,
    spec_file: Option<&Path>,
) -> Result<CaseDefinition> {
    if n == 0 {
        return Err(LabError::Usage("n must be at least 1".into()));
    }
    if m.is_some() && name != CaseName::SphereHyperplane {
        return Err(LabError::Usage(
            "--m applies to sphere-hyperplane only".into(),
        ));
    }
    if spec_file.is_some() && name != CaseName::CustomSpecFile {
        return Err(LabError::Usage(
            "--spec requires --case custom-spec-file".into(),
        ));
    }
    let def = match name {
        CaseName::SphereHyperplane => {
            let m = m.unwrap_or(n + 2);
            if m < n + 2 {
                return Err(LabError::Usage(format!(
                    "a sphere S^{n} in a spacelike hyperplane needs m >= {}",
                    n + 2
                )));
            }
            let mut a = vec![0.0; m];
            a[0] = 1.0;
            CaseDefinition {
                name,
                spec: ImmersionSpec::RoundSphere {
                    n,
                    radius: 1.0,
                    m: Some(m),
                    center: None,
                    normal: None,
                },
                expectations: CaseExpectations {
                    reilly: Expectation::Equality,
                    reference_bounds: Expectation::Equality,
                    causal: CausalExpectation::KernelHit,
                    equality_reference: Some(Verdict::EqualityCase),
                    equality_sampled: None,
                },
                ell: Some(a),
            }
        }
        CaseName::Counterexample => CaseDefinition {
            name,
            spec: ImmersionSpec::Counterexample { n },
            expectations: CaseExpectations {
                reilly: Expectation::Violated,
                reference_bounds: Expectation::Holds,
                causal: CausalExpectation::NoCausalKernel,
                equality_reference: Some(Verdict::Strict),
                equality_sampled: Some(Verdict::Strict),
            },
            ell: None,
        },
        CaseName::CylinderCurve => CaseDefinition {
            name,
            spec: ImmersionSpec::CylinderCurve { n, curvature: 0.5 },
            expectations: CaseExpectations {
                reilly: Expectation::Violated,
                reference_bounds: Expectation::Holds,
                causal: CausalExpectation::NoCausalKernel,
                equality_reference: None,
                equality_sampled: None,
            },
            ell: None,
        },
        CaseName::LightlikeHyperplane => {
            let mut ell = vec![0.0; n + 3];
            ell[0] = 1.0;
            ell[n + 2] = 1.0;
            CaseDefinition {
                name,
                spec: ImmersionSpec::LightlikeLift {
                    n,
                    radius: 1.0,
                    beta: 0.5,
                    gamma: 0.3,
                },
                expectations: CaseExpectations {
                    reilly: Expectation::Equality,
                    reference_bounds: Expectation::Holds,
                    causal: CausalExpectation::KernelHit,
                    equality_reference: None,
                    equality_sampled: None,
                },
                ell: Some(ell),
            }
        }
        CaseName::CustomSpecFile => {
            let path = spec_file
                .ok_or_else(|| LabError::Usage("custom-spec-file needs --spec <file>".into()))?;
            CaseDefinition {
                name,
                spec: ImmersionSpec::from_file(path)?,
                expectations: CaseExpectations {
                    reilly: Expectation::Informational,
                    reference_bounds: Expectation::Holds,
                    causal: CausalExpectation::Informational,
                    equality_reference: None,
                    equality_sampled: None,
                },
                ell: None,
            }
        }
    };
    Ok(def)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in CaseName::BUILT_IN {
            assert_eq!(c.as_str().parse::<CaseName>().unwrap(), c);
            assert_eq!(
                serde_json::to_string(&c).unwrap(),
                format!("\"{}\"", c.as_str())
            );
        }
        assert!(matches!(
            "nope".parse::<CaseName>(),
            Err(LabError::Usage(_))
        ));
    }

    #[test]
    fn argument_checks() {
        assert!(case_definition(CaseName::CustomSpecFile, 2, None, None).is_err());
        assert!(case_definition(CaseName::Counterexample, 0, None, None).is_err());
        assert!(case_definition(CaseName::Counterexample, 2, Some(5), None).is_err());
        assert!(case_definition(CaseName::SphereHyperplane, 2, Some(3), None).is_err());
        let d = case_definition(CaseName::SphereHyperplane, 2, Some(5), None).unwrap();
        assert_eq!(d.spec.build().unwrap().ambient_dim(), 5);
    }
}
