//! Exhaustive search on a uniform, endpoint-inclusive grid over the design box.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cross_entropy::{fmt_num, OptimizationResult};
use crate::error::{Error, Result};
use crate::objective::{DesignSpace, Evaluation, Objective};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    /// Nodes per dimension, endpoints included.
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(resolution: Vec<usize>) -> Self {
        Self { resolution }
    }

    pub fn uniform(nodes: usize, dim: usize) -> Self {
        Self { resolution: vec![nodes; dim] }
    }

    pub fn total_points(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.resolution.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "grid has {} axes but the design space has {dim}",
                self.resolution.len()
            )));
        }
        if self.resolution.iter().any(|&r| r < 2) {
            return Err(Error::InvalidConfig("every grid axis needs at least 2 nodes".into()));
        }
        Ok(())
    }

    /// Row-major multi-index of a linear node index (last axis fastest).
    pub fn unravel(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.resolution.len()];
        for (slot, &r) in idx.iter_mut().zip(&self.resolution).rev() {
            *slot = linear % r;
            linear /= r;
        }
        idx
    }

    pub fn node<T: Scalar>(&self, space: &DesignSpace<T>, linear: usize) -> Vec<T> {
        self.unravel(linear)
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                let (lo, hi) = (space.lower()[i], space.upper()[i]);
                let last = self.resolution[i] - 1;
                if k == last {
                    hi
                } else {
                    lo + T::count(k) * (hi - lo) / T::count(last)
                }
            })
            .collect()
    }
}

/// Every node's evaluation in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    pub resolution: Vec<usize>,
    pub nodes: Vec<Evaluation<T>>,
}

impl<T: Scalar> GridField<T> {
    /// CSV with columns `x_1..x_d,P,K`, infeasible nodes included.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.resolution.len();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        header.push("P".into());
        header.push("K".into());
        writeln!(w, "{}", header.join(","))?;
        for e in &self.nodes {
            let mut row: Vec<String> = e.design.iter().map(|&v| fmt_num(v)).collect();
            row.push(fmt_num(e.power));
            row.push(fmt_num(e.k));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome<T> {
    pub result: OptimizationResult<T>,
    pub field: GridField<T>,
}

/// Evaluates every node and returns the feasible node of highest power
/// (lowest linear index on ties) together with the full field.
///
/// Node `k` receives the random stream `ChaCha8Rng::seed_from_u64(seed + k)`,
/// so results do not depend on evaluation order.
pub fn exhaustive_search<T: Scalar, O: Objective<T>>(
    objective: &O,
    space: &DesignSpace<T>,
    grid: &GridSpec,
    seed: u64,
) -> Result<GridOutcome<T>> {
    grid.validate(space.dim())?;
    let total = grid.total_points();
    let nodes: Vec<Evaluation<T>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let x = grid.node(space, k);
            objective.evaluate(&x, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64)))
        })
        .collect();

    let best = nodes
        .iter()
        .filter(|e| e.feasible)
        .fold(None::<&Evaluation<T>>, |acc, e| match acc {
            Some(b) if !(e.penalized > b.penalized) => Some(b),
            _ => Some(e),
        })
        .ok_or(Error::NoFeasiblePoint)?;

    Ok(GridOutcome {
        result: OptimizationResult::from_best(best, 0, total),
        field: GridField { resolution: grid.resolution.clone(), nodes },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HarvesterParams;
    use crate::objective::{FnObjective, ParamField};

    fn unit_square() -> DesignSpace<f64> {
        DesignSpace::new(
            vec![ParamField::F, ParamField::Omega],
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            HarvesterParams::baseline(0.1, 0.8),
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_picks_best_corner() {
        let obj = FnObjective::new(|x: &[f64]| 2.0 * x[0] - x[1]);
        let out = exhaustive_search(&obj, &unit_square(), &GridSpec::uniform(2, 2), 0).unwrap();
        assert_eq!(out.result.x_star, vec![1.0, 0.0]);
        assert_eq!(out.result.s_star, 2.0);
        assert_eq!(out.result.evaluations_used, 4);
        assert_eq!(obj.evaluations(), 4);
    }

    #[test]
    fn nodes_are_row_major_with_exact_ends() {
        let g = GridSpec::new(vec![3, 4]);
        let s = unit_square();
        assert_eq!(g.node(&s, 0), vec![0.0, 0.0]);
        assert_eq!(g.node(&s, 3), vec![0.0, 2.0]);
        assert_eq!(g.node(&s, 4), vec![0.5, 0.0]);
        assert_eq!(g.node(&s, 11), vec![1.0, 2.0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let obj = FnObjective::new(|_: &[f64]| 1.0);
        let out = exhaustive_search(&obj, &unit_square(), &GridSpec::uniform(3, 2), 0).unwrap();
        assert_eq!(out.result.x_star, vec![0.0, 0.0]);
    }

    #[test]
    fn bad_grids_rejected() {
        let obj = FnObjective::new(|_: &[f64]| 1.0);
        assert!(exhaustive_search(&obj, &unit_square(), &GridSpec::new(vec![1, 4]), 0).is_err());
        assert!(exhaustive_search(&obj, &unit_square(), &GridSpec::new(vec![4]), 0).is_err());
    }

    #[test]
    fn field_csv_layout() {
        let obj = FnObjective::new(|x: &[f64]| x[0]);
        let out = exhaustive_search(&obj, &unit_square(), &GridSpec::uniform(2, 2), 0).unwrap();
        let mut buf = Vec::new();
        out.field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_1,x_2,P,K");
        assert_eq!(lines.len(), 5);
    }
}
