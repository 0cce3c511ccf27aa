//! Jenkins-Serrin solvability conditions for Scherk domains.

use serde::{Deserialize, Serialize};

use crate::domain::{enumerate_inscribed_polygons, InscribedPolygon, ScherkDomain};
use crate::Result;

/// Relative margin turning the strict inequalities into float decisions.
pub const STRICT_MARGIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "C-nonempty")]
    CNonempty,
    #[serde(rename = "C-empty")]
    CEmpty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Uniqueness {
    #[serde(rename = "unique")]
    Unique,
    #[serde(rename = "unique-up-to-constant")]
    UniqueUpToConstant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub solvable: bool,
    pub case: Case,
    pub uniqueness: Uniqueness,
    pub witness: Option<InscribedPolygon>,
}

/// Strict form of 2a < ℓ and 2b < ℓ for one polygon.
pub fn strict_condition_holds(p: &InscribedPolygon) -> bool {
    let margin = STRICT_MARGIN * p.l;
    2.0 * p.a < p.l - margin && 2.0 * p.b < p.l - margin
}

fn is_whole_domain(p: &InscribedPolygon, domain: &ScherkDomain) -> bool {
    domain.is_polygonal()
        && p.vertices.len() == domain.vertices.len()
        && (p.a + p.b - p.l).abs() <= STRICT_MARGIN * p.l
}

/// Decides solvability of the Dirichlet problem with the domain's infinite
/// data, returning the first violating polygon as witness.
pub fn check_conditions(domain: &ScherkDomain) -> Result<Verdict> {
    let polygons = enumerate_inscribed_polygons(domain)?;
    if domain.has_c_arcs() {
        let witness = polygons.into_iter().find(|p| !strict_condition_holds(p));
        return Ok(Verdict {
            solvable: witness.is_none(),
            case: Case::CNonempty,
            uniqueness: Uniqueness::Unique,
            witness,
        });
    }
    let mut witness = None;
    for p in polygons {
        if is_whole_domain(&p, domain) {
            if (p.a - p.b).abs() > STRICT_MARGIN * p.l {
                witness = Some(p);
                break;
            }
        } else if !strict_condition_holds(&p) {
            witness = Some(p);
            break;
        }
    }
    Ok(Verdict {
        solvable: witness.is_none(),
        case: Case::CEmpty,
        uniqueness: Uniqueness::UniqueUpToConstant,
        witness,
    })
}

/// The mean convex quadrilateral test ℓ(A₁) + ℓ(A₂) < ℓ(C₁) + ℓ(C₂) for a
/// quadrilateral whose arcs alternate A, C, A, C.
pub fn quadrilateral_condition(domain: &ScherkDomain) -> Option<bool> {
    use crate::domain::ArcKind;
    if domain.arcs.len() != 4 {
        return None;
    }
    let (mut la, mut lc) = (0.0, 0.0);
    for (k, arc) in domain.arcs.iter().enumerate() {
        match arc.kind {
            ArcKind::A => la += domain.arc_length(k),
            ArcKind::C => lc += domain.arc_length(k),
            ArcKind::B => return None,
        }
    }
    Some(la < lc)
}
