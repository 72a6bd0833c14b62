//! A single handle over the bipartite functionals the crate can evaluate.

use std::fmt;

use crate::boundary::boundary_matching_cost;
use crate::error::{Error, Result};
use crate::geometry::{BoxRegion, PointCloud};
use crate::graph::{generic_cost, tsp_heuristic, FamilyKind, GraphFamily};
use crate::matching::{m_p_cost, CostParams, SolveResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Functional {
    /// `M_p`.
    Matching,
    /// Exact minimum over a graph family.
    Graph(GraphFamily),
    /// Upper estimate of `T_p` by local search.
    TspHeuristic,
    /// `L_{∂S,eps}` for matchings on the given box.
    BoundaryMatching(BoxRegion),
}

impl Functional {
    pub fn solve(&self, x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<SolveResult> {
        match self {
            Functional::Matching => m_p_cost(x, y, params),
            Functional::Graph(f) => generic_cost(x, y, f, params),
            Functional::TspHeuristic => tsp_heuristic(x, y, params),
            Functional::BoundaryMatching(s) => boundary_matching_cost(x, y, params, s),
        }
    }

    pub fn cost(&self, x: &PointCloud, y: &PointCloud, params: &CostParams) -> Result<f64> {
        self.solve(x, y, params).map(|r| r.cost)
    }

    /// Constant `C` of the subadditivity inequality, when one is known.
    pub fn subadditivity_constant(&self) -> Option<f64> {
        match self {
            Functional::Matching => Some(0.5),
            Functional::Graph(f) => Some(f.subadditivity_constant()),
            Functional::TspHeuristic | Functional::BoundaryMatching(_) => None,
        }
    }

    /// Constant `C` of the regularity inequality. Matching has 1; for graph
    /// families one point insertion is a two-group instance of
    /// subadditivity, which gives twice that constant.
    pub fn regularity_constant(&self) -> Option<f64> {
        match self {
            Functional::Matching => Some(1.0),
            Functional::Graph(f) if f.kind() == FamilyKind::Matching => Some(1.0),
            Functional::Graph(f) => Some(2.0 * f.subadditivity_constant()),
            Functional::TspHeuristic => Some(2.0 * GraphFamily::tsp().subadditivity_constant()),
            Functional::BoundaryMatching(_) => None,
        }
    }

    /// The functional seen through `x -> shift + lambda x`; only the boundary
    /// variant depends on position.
    pub fn transformed(&self, shift: &[f64], lambda: f64) -> Result<Functional> {
        match self {
            Functional::BoundaryMatching(s) => Ok(Functional::BoundaryMatching(s.affine(shift, lambda)?)),
            other => Ok(other.clone()),
        }
    }

    pub fn region(&self) -> Option<&BoxRegion> {
        match self {
            Functional::BoundaryMatching(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Matching => write!(f, "matching"),
            Functional::Graph(g) => write!(f, "{g}"),
            Functional::TspHeuristic => write!(f, "tsp-heur"),
            Functional::BoundaryMatching(_) => write!(f, "boundary-matching"),
        }
    }
}

pub(crate) fn unknown_constant(functional: &Functional) -> Error {
    Error::InvalidParameter(format!("unknown functional constant for {functional}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(Functional::Matching.subadditivity_constant(), Some(0.5));
        assert_eq!(Functional::Graph(GraphFamily::tsp()).subadditivity_constant(), Some(10.0));
        assert_eq!(Functional::TspHeuristic.subadditivity_constant(), None);
        assert_eq!(Functional::Graph(GraphFamily::tsp()).regularity_constant(), Some(20.0));
    }

    #[test]
    fn matching_family_agrees() {
        let x = PointCloud::from_rows(2, [[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let y = PointCloud::from_rows(2, [[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let p = CostParams::with_p(1.0).unwrap();
        let a = Functional::Matching.cost(&x, &y, &p).unwrap();
        let b = Functional::Graph(GraphFamily::matching()).cost(&x, &y, &p).unwrap();
        assert_eq!(a, 2.0);
        assert_eq!(a, b);
        let t = Functional::Graph(GraphFamily::tsp()).cost(&x, &y, &p).unwrap();
        assert!((t - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn boundary_region_moves() {
        let f = Functional::BoundaryMatching(BoxRegion::unit(2));
        let g = f.transformed(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(g.region().unwrap(), &BoxRegion::from_bounds(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap());
        assert_eq!(g.to_string(), "boundary-matching");
    }
}
