//! Basis variants for projecting eigenfunction differences.
//!
//! Eigenfunction differences live in an infinite-dimensional space, so the
//! test projects them onto a few directions built from the pooled
//! eigensystem. Four constructions are supported for component `j` with
//! basis depth `p`:
//!
//! ```text
//! nu:        (phi^{j+1}, ..., phi^p)
//! nu_tilde:  (phi^1, ..., phi^{j-1}, phi^{j+1}, ..., phi^p)
//! nu_star:   (phi^1 + phi^j, ..., phi^{j-1} + phi^j,
//!             phi^{j+1} + phi^j, ..., phi^p + phi^j)
//! nu_star2:  (phi^{j+1} + phi^j, ..., phi^p + phi^j)
//! ```
//!
//! `nu_tilde` targets a single eigenfunction; it can have trivial power
//! when only the `j`-th eigenfunction differs, because the projections of
//! that difference onto the other eigenfunctions may vanish — the starred
//! variants add `phi^j` to every element as the remedy. Joint tests of the
//! first `c` eigenfunctions with `nu_star2` stack the blocks
//! `j = 1, ..., c-1` (for `p = 4` this gives stacked dimensions 3, 5, 6
//! for `c = 2, 3, 4`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::{EigenSystem, ProjectionBlock};

/// Which eigencomponents a test addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentTarget {
    /// A single component (1-based index).
    Component(usize),
    /// The leading `count` components jointly.
    Leading(usize),
}

impl ComponentTarget {
    /// Highest component index involved.
    pub fn max_index(&self) -> usize {
        match *self {
            ComponentTarget::Component(j) => j,
            ComponentTarget::Leading(c) => c,
        }
    }

    /// Number of components tested.
    pub fn count(&self) -> usize {
        match *self {
            ComponentTarget::Component(_) => 1,
            ComponentTarget::Leading(c) => c,
        }
    }

    /// 1-based component indices, in order.
    pub fn indices(&self) -> Vec<usize> {
        match *self {
            ComponentTarget::Component(j) => vec![j],
            ComponentTarget::Leading(c) => (1..=c).collect(),
        }
    }

    /// `Leading(1)` and `Component(1)` are the same hypothesis; normalize
    /// to the individual form so variant rules treat them alike.
    pub fn normalized(&self) -> ComponentTarget {
        match *self {
            ComponentTarget::Leading(1) => ComponentTarget::Component(1),
            t => t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_index() == 0 {
            return Err(Error::InvalidConfig("component indices are 1-based".into()));
        }
        Ok(())
    }
}

/// Basis construction used by the eigenfunction tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisVariant {
    Nu,
    NuTilde,
    NuStar,
    NuStar2,
}

impl BasisVariant {
    /// Default per target: starred individual basis, starred-2 joint basis.
    pub fn default_for(target: ComponentTarget) -> BasisVariant {
        match target.normalized() {
            ComponentTarget::Component(_) => BasisVariant::NuStar,
            ComponentTarget::Leading(_) => BasisVariant::NuStar2,
        }
    }

    pub fn parse(name: &str) -> Result<BasisVariant> {
        match name {
            "nu" => Ok(BasisVariant::Nu),
            "nu-tilde" | "nu_tilde" => Ok(BasisVariant::NuTilde),
            "nu-star" | "nu_star" => Ok(BasisVariant::NuStar),
            "nu-star2" | "nu_star2" => Ok(BasisVariant::NuStar2),
            other => Err(Error::InvalidConfig(format!("unknown basis variant '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BasisVariant::Nu => "nu",
            BasisVariant::NuTilde => "nu-tilde",
            BasisVariant::NuStar => "nu-star",
            BasisVariant::NuStar2 => "nu-star2",
        }
    }
}

/// Index sets (over pooled eigenfunctions, 1-based) for component `j`.
fn element_sets(variant: BasisVariant, j: usize, p: usize) -> Result<Vec<Vec<usize>>> {
    if j > p {
        return Err(Error::InvalidConfig(format!("component {j} exceeds basis depth p = {p}")));
    }
    let sets: Vec<Vec<usize>> = match variant {
        BasisVariant::Nu => (j + 1..=p).map(|a| vec![a]).collect(),
        BasisVariant::NuTilde => (1..=p).filter(|&a| a != j).map(|a| vec![a]).collect(),
        BasisVariant::NuStar => (1..=p).filter(|&a| a != j).map(|a| vec![a, j]).collect(),
        BasisVariant::NuStar2 => (j + 1..=p).map(|a| vec![a, j]).collect(),
    };
    Ok(sets)
}

/// Projection blocks for a full test target.
pub fn basis_blocks(
    variant: BasisVariant,
    target: ComponentTarget,
    p: usize,
) -> Result<Vec<ProjectionBlock>> {
    target.validate()?;
    let target = target.normalized();
    if target.max_index() > p {
        return Err(Error::InvalidConfig(format!(
            "target reaches component {} but basis depth is p = {p}",
            target.max_index()
        )));
    }
    let components: Vec<usize> = match (variant, target) {
        (BasisVariant::NuStar2, ComponentTarget::Leading(c)) => {
            if c < 2 {
                return Err(Error::InvalidConfig(
                    "joint nu-star2 tests need at least two components".into(),
                ));
            }
            (1..c).collect()
        }
        (_, t) => t.indices(),
    };
    let mut blocks = Vec::new();
    for j in components {
        let elements = element_sets(variant, j, p)?;
        if !elements.is_empty() {
            blocks.push(ProjectionBlock { component: j, elements });
        }
    }
    if blocks.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "variant {} with target {target:?} and p = {p} yields an empty basis",
            variant.name()
        )));
    }
    Ok(blocks)
}

/// Basis functions for component `j` on the grid (one row per element).
pub fn build_basis(
    pooled: &EigenSystem,
    variant: BasisVariant,
    j: usize,
    p: usize,
) -> Result<DMatrix<f64>> {
    if p > pooled.len() {
        return Err(Error::RankDeficient(format!(
            "basis depth p = {p} exceeds the pooled eigensystem rank {}",
            pooled.len()
        )));
    }
    let sets = element_sets(variant, j, p)?;
    if sets.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "variant {} at j = {j}, p = {p} yields an empty basis",
            variant.name()
        )));
    }
    let g = pooled.functions.ncols();
    let mut out = DMatrix::zeros(sets.len(), g);
    for (row, set) in sets.iter().enumerate() {
        for &idx in set {
            for t in 0..g {
                out[(row, t)] += pooled.functions[(idx - 1, t)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::sample_eigen;
    use crate::funcgrid::{FunctionalSample, Grid};
    use nalgebra::DMatrix as M;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn pooled_system() -> EigenSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let vals = M::from_fn(12, 24, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = FunctionalSample::new(vals, Grid::uniform(24), "b").unwrap();
        sample_eigen(&s, 12, 6).unwrap()
    }

    #[test]
    fn nu_basis_is_orthonormal_suffix() {
        let e = pooled_system();
        let b = build_basis(&e, BasisVariant::Nu, 1, 4).unwrap();
        assert_eq!(b.nrows(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let row_i: Vec<f64> = b.row(i).iter().copied().collect();
                let row_j: Vec<f64> = b.row(j).iter().copied().collect();
                let ip = e.grid.inner_product(&row_i, &row_j).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nu_star_elements_have_norm_two() {
        let e = pooled_system();
        let b = build_basis(&e, BasisVariant::NuStar, 1, 4).unwrap();
        assert_eq!(b.nrows(), 3);
        for i in 0..3 {
            let row: Vec<f64> = b.row(i).iter().copied().collect();
            assert!((e.grid.norm_sq(&row).unwrap() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn nu_tilde_skips_the_target_component() {
        let e = pooled_system();
        let b = build_basis(&e, BasisVariant::NuTilde, 2, 4).unwrap();
        assert_eq!(b.nrows(), 3);
        for &(row, idx) in [(0usize, 1usize), (1, 3), (2, 4)].iter() {
            for t in 0..b.ncols() {
                assert_eq!(b[(row, t)], e.functions[(idx - 1, t)]);
            }
        }
    }

    #[test]
    fn empty_bases_are_rejected() {
        let e = pooled_system();
        assert!(build_basis(&e, BasisVariant::Nu, 4, 4).is_err());
        assert!(build_basis(&e, BasisVariant::Nu, 5, 4).is_err());
        assert!(basis_blocks(BasisVariant::NuStar2, ComponentTarget::Component(4), 4).is_err());
    }

    #[test]
    fn joint_nu_star2_dimensions_match_the_stacked_count() {
        // p = 4: joint 2, 3, 4 components give stacked dimensions 3, 5, 6.
        for (c, want) in [(2usize, 3usize), (3, 5), (4, 6)] {
            let blocks = basis_blocks(BasisVariant::NuStar2, ComponentTarget::Leading(c), 4).unwrap();
            let dim: usize = blocks.iter().map(|b| b.elements.len()).sum();
            assert_eq!(dim, want, "c = {c}");
        }
        // The plain nu variant stacks all blocks: M(2p-M-1)/2.
        for m in 1..=4usize {
            let blocks = basis_blocks(BasisVariant::Nu, ComponentTarget::Leading(m), 4).unwrap();
            let dim: usize = blocks.iter().map(|b| b.elements.len()).sum();
            assert_eq!(dim, m * (8 - m - 1) / 2, "m = {m}");
        }
    }

    #[test]
    fn leading_one_normalizes_to_individual() {
        let a = basis_blocks(BasisVariant::NuStar2, ComponentTarget::Leading(1), 4).unwrap();
        let b = basis_blocks(BasisVariant::NuStar, ComponentTarget::Component(1), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(BasisVariant::default_for(ComponentTarget::Leading(1)), BasisVariant::NuStar);
    }
}
