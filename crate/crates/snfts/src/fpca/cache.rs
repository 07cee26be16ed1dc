//! Lazily computed, shared intermediates for one sample pair.
//!
//! Running several tests on the same pair repeats expensive pieces (Gram
//! matrices, the pooled eigensystem, the per-`k` recursive spectra). The
//! cache computes each piece on first use, growing the retained rank when a
//! later caller asks for more. Everything is deterministic, so recomputing
//! at a larger rank never changes already-returned values.
//!
//! All entry points assume the pair is centered.

use nalgebra::DMatrix;

use super::recursive::{
    cov_projection_track, recursive_spectra_from_parts, track_from_spectra, window_state,
    RecursiveSpectra, RecursiveTrack, TrackMode, WindowRows, WindowState,
};
use super::{align_signs, gram_matrix, gram_window_eigen, EigenSystem};
use crate::error::{Error, Result};
use crate::funcgrid::{FunctionalSample, SamplePair};

/// Score matrices required by per-window eigendecompositions: scores of
/// both samples against the pooled basis and against the sign-alignment
/// reference (the full-sample X eigensystem).
pub struct WindowPrep {
    pub(crate) scores_pool_x: DMatrix<f64>,
    pub(crate) scores_pool_y: DMatrix<f64>,
    pub(crate) scores_self_x: DMatrix<f64>,
    pub(crate) scores_self_y: DMatrix<f64>,
}

pub struct PairCache<'a> {
    pair: &'a SamplePair,
    gram_x: Option<DMatrix<f64>>,
    gram_y: Option<DMatrix<f64>>,
    cross_xy: Option<DMatrix<f64>>,
    x_full: Option<EigenSystem>,
    y_full: Option<EigenSystem>,
    pooled: Option<EigenSystem>,
    /// Scores of each sample against the pooled eigenfunctions.
    scores_pool: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Scores of each sample against the full-sample X eigenfunctions
    /// (the sign-alignment reference).
    scores_self: Option<(DMatrix<f64>, DMatrix<f64>)>,
    spectra: Option<RecursiveSpectra>,
}

impl<'a> PairCache<'a> {
    pub fn new(pair: &'a SamplePair) -> Self {
        PairCache {
            pair,
            gram_x: None,
            gram_y: None,
            cross_xy: None,
            x_full: None,
            y_full: None,
            pooled: None,
            scores_pool: None,
            scores_self: None,
            spectra: None,
        }
    }

    pub fn pair(&self) -> &SamplePair {
        self.pair
    }

    pub fn gram_x(&mut self) -> &DMatrix<f64> {
        if self.gram_x.is_none() {
            self.gram_x = Some(gram_matrix(&self.pair.x));
        }
        self.gram_x.as_ref().unwrap()
    }

    pub fn gram_y(&mut self) -> &DMatrix<f64> {
        if self.gram_y.is_none() {
            self.gram_y = Some(gram_matrix(&self.pair.y));
        }
        self.gram_y.as_ref().unwrap()
    }

    fn cross_xy(&mut self) -> &DMatrix<f64> {
        if self.cross_xy.is_none() {
            let y = &self.pair.y;
            let mut scaled = y.values().clone();
            for (j, &w) in y.grid().weights().iter().enumerate() {
                for i in 0..scaled.nrows() {
                    scaled[(i, j)] *= w;
                }
            }
            self.cross_xy = Some(self.pair.x.values() * scaled.transpose());
        }
        self.cross_xy.as_ref().unwrap()
    }

    /// Eigensystem of one sample's full covariance via its Gram matrix.
    fn full_eigen_of(sample: &FunctionalSample, gram: &DMatrix<f64>, rank: usize) -> Result<EigenSystem> {
        let n = sample.n();
        if rank > n {
            return Err(Error::RankDeficient(format!(
                "requested {rank} eigencomponents from a sample of {n} curves"
            )));
        }
        let ge = gram_window_eigen(gram, 0, n, rank);
        if let Some(j) = ge.rank_deficient_at(rank) {
            return Err(Error::RankDeficient(format!(
                "sample covariance has numerically zero component {}",
                j + 1
            )));
        }
        let mut functions = DMatrix::zeros(rank, sample.n_points());
        for j in 0..rank {
            let scale = 1.0 / (n as f64 * ge.values[j]).sqrt();
            for t in 0..sample.n_points() {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += ge.coeffs[(i, j)] * sample.values()[(i, t)];
                }
                functions[(j, t)] = acc * scale;
            }
        }
        let mut e = EigenSystem {
            values: ge.values,
            functions,
            grid: sample.grid().clone(),
            alignment_degenerate: Vec::new(),
        };
        super::canonicalize_rows(&mut e.functions);
        Ok(e)
    }

    /// Full-sample eigensystem of X, the sign-alignment reference.
    pub fn x_full_eigen(&mut self, rank: usize) -> Result<EigenSystem> {
        if self.x_full.as_ref().map_or(true, |e| e.len() < rank) {
            self.gram_x();
            let e = Self::full_eigen_of(&self.pair.x, self.gram_x.as_ref().unwrap(), rank)?;
            self.x_full = Some(e);
            // The reference changed depth; dependents must be rebuilt.
            self.scores_self = None;
            self.spectra = None;
        }
        Ok(self.x_full.as_ref().unwrap().clone())
    }

    /// Full-sample eigensystem of Y, sign-aligned to the X reference.
    pub fn y_full_eigen(&mut self, rank: usize) -> Result<EigenSystem> {
        if self.y_full.as_ref().map_or(true, |e| e.len() < rank) {
            let reference = self.x_full_eigen(rank)?;
            self.gram_y();
            let e = Self::full_eigen_of(&self.pair.y, self.gram_y.as_ref().unwrap(), rank)?;
            self.y_full = Some(align_signs(&e, &reference)?);
        }
        Ok(self.y_full.as_ref().unwrap().clone())
    }

    /// Pooled eigensystem, sign-aligned to the X reference.
    pub fn pooled_eigen(&mut self, rank: usize) -> Result<EigenSystem> {
        if self.pooled.as_ref().map_or(true, |e| e.len() < rank) {
            let (n1, n2) = (self.pair.n1(), self.pair.n2());
            let n = n1 + n2;
            if rank > n {
                return Err(Error::RankDeficient(format!(
                    "requested {rank} pooled eigencomponents from {n} curves"
                )));
            }
            self.gram_x();
            self.gram_y();
            self.cross_xy();
            let gx = self.gram_x.as_ref().unwrap();
            let gy = self.gram_y.as_ref().unwrap();
            let cxy = self.cross_xy.as_ref().unwrap();
            let mut gram = DMatrix::zeros(n, n);
            gram.view_mut((0, 0), (n1, n1)).copy_from(gx);
            gram.view_mut((n1, n1), (n2, n2)).copy_from(gy);
            gram.view_mut((0, n1), (n1, n2)).copy_from(cxy);
            gram.view_mut((n1, 0), (n2, n1)).copy_from(&cxy.transpose());
            let ge = gram_window_eigen(&gram, 0, n, rank);
            if let Some(j) = ge.rank_deficient_at(rank) {
                return Err(Error::RankDeficient(format!(
                    "pooled covariance has numerically zero component {}",
                    j + 1
                )));
            }
            let g = self.pair.grid().len();
            let mut functions = DMatrix::zeros(rank, g);
            let xv = self.pair.x.values();
            let yv = self.pair.y.values();
            for j in 0..rank {
                let scale = 1.0 / (n as f64 * ge.values[j]).sqrt();
                for t in 0..g {
                    let mut acc = 0.0;
                    for i in 0..n1 {
                        acc += ge.coeffs[(i, j)] * xv[(i, t)];
                    }
                    for i in 0..n2 {
                        acc += ge.coeffs[(n1 + i, j)] * yv[(i, t)];
                    }
                    functions[(j, t)] = acc * scale;
                }
            }
            let mut e = EigenSystem {
                values: ge.values,
                functions,
                grid: self.pair.grid().clone(),
                alignment_degenerate: Vec::new(),
            };
            super::canonicalize_rows(&mut e.functions);
            // Deterministic sign convention: align to the X reference where
            // it reaches; components beyond it keep the canonical sign.
            let ref_rank = rank.min(self.pair.n1());
            let reference = self.x_full_eigen(ref_rank)?;
            e = align_signs(&e, &reference)?;
            self.pooled = Some(e);
            self.scores_pool = None;
            self.spectra = None;
        }
        Ok(self.pooled.as_ref().unwrap().clone())
    }

    fn scores_against(sample: &FunctionalSample, e: &EigenSystem, depth: usize) -> DMatrix<f64> {
        let mut scaled = e.functions.rows(0, depth).into_owned();
        for (t, &w) in e.grid.weights().iter().enumerate() {
            for j in 0..depth {
                scaled[(j, t)] *= w;
            }
        }
        sample.values() * scaled.transpose()
    }

    /// Scores of both samples against the first `p` pooled eigenfunctions.
    pub fn pooled_scores(&mut self, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let rebuild = match (&self.scores_pool, &self.pooled) {
            (Some((sx, _)), Some(_)) => sx.ncols() < p,
            _ => true,
        };
        if rebuild {
            let pooled = self.pooled_eigen(p)?;
            let depth = pooled.len();
            let sx = Self::scores_against(&self.pair.x, &pooled, depth);
            let sy = Self::scores_against(&self.pair.y, &pooled, depth);
            self.scores_pool = Some((sx, sy));
        }
        let (sx, sy) = self.scores_pool.as_ref().unwrap();
        Ok((sx.columns(0, p).into_owned(), sy.columns(0, p).into_owned()))
    }

    fn self_scores(&mut self, rank: usize) -> Result<()> {
        let rebuild = match &self.scores_self {
            Some((sx, _)) => sx.ncols() < rank,
            None => true,
        };
        if rebuild {
            let reference = self.x_full_eigen(rank)?;
            let depth = reference.len();
            let sx = Self::scores_against(&self.pair.x, &reference, depth);
            let sy = Self::scores_against(&self.pair.y, &reference, depth);
            self.scores_self = Some((sx, sy));
        }
        Ok(())
    }

    /// Recursive spectra retaining at least `rank` eigencomponents and `p`
    /// pooled projections.
    pub fn spectra(&mut self, rank: usize, p: usize) -> Result<RecursiveSpectra> {
        let sufficient = self
            .spectra
            .as_ref()
            .map_or(false, |s| s.rank >= rank && s.p >= p);
        if !sufficient {
            let rank = rank.max(self.spectra.as_ref().map_or(0, |s| s.rank));
            let p = p.max(self.spectra.as_ref().map_or(0, |s| s.p));
            let (spx, spy) = if p > 0 {
                self.pooled_scores(p)?
            } else {
                (DMatrix::zeros(self.pair.n1(), 0), DMatrix::zeros(self.pair.n2(), 0))
            };
            self.self_scores(rank)?;
            let (ssx, ssy) = self.scores_self.as_ref().unwrap();
            let (ssx, ssy) = (ssx.clone(), ssy.clone());
            self.gram_x();
            self.gram_y();
            let spectra = recursive_spectra_from_parts(
                self.pair,
                rank,
                p,
                self.gram_x.as_ref().unwrap(),
                self.gram_y.as_ref().unwrap(),
                &spx,
                &spy,
                &ssx,
                &ssy,
            )?;
            self.spectra = Some(spectra);
        }
        Ok(self.spectra.as_ref().unwrap().clone())
    }

    /// Score matrices needed to eigensolve arbitrary row windows (blocks,
    /// bootstrap resamples) of either sample.
    pub fn window_prep(&mut self, rank: usize, p: usize) -> Result<WindowPrep> {
        let (spx, spy) = if p > 0 {
            self.pooled_scores(p)?
        } else {
            (DMatrix::zeros(self.pair.n1(), 0), DMatrix::zeros(self.pair.n2(), 0))
        };
        self.self_scores(rank)?;
        let (ssx, ssy) = self.scores_self.as_ref().unwrap();
        Ok(WindowPrep {
            scores_pool_x: spx,
            scores_pool_y: spy,
            scores_self_x: ssx.clone(),
            scores_self_y: ssy.clone(),
        })
    }

    /// Eigenvalues + aligned projections for a row window of the X sample.
    pub(crate) fn window_state_x(
        &mut self,
        rows: &[usize],
        rank: usize,
        p: usize,
        prep: &WindowPrep,
        degen: &mut Vec<usize>,
    ) -> WindowState {
        let gram = self.gram_x();
        window_state(
            gram,
            WindowRows::Gather(rows),
            rank,
            p,
            &prep.scores_pool_x,
            &prep.scores_self_x,
            degen,
        )
    }

    /// Eigenvalues + aligned projections for a row window of the Y sample.
    pub(crate) fn window_state_y(
        &mut self,
        rows: &[usize],
        rank: usize,
        p: usize,
        prep: &WindowPrep,
        degen: &mut Vec<usize>,
    ) -> WindowState {
        let gram = self.gram_y();
        window_state(
            gram,
            WindowRows::Gather(rows),
            rank,
            p,
            &prep.scores_pool_y,
            &prep.scores_self_y,
            degen,
        )
    }

    /// Recursive track for any mode, reusing every cached intermediate.
    pub fn track(&mut self, mode: &TrackMode) -> Result<RecursiveTrack> {
        match mode {
            TrackMode::CovProjection { k } => {
                let (sx, sy) = self.pooled_scores(*k)?;
                cov_projection_track(self.pair, *k, &sx, &sy)
            }
            _ => {
                let rank = mode.required_rank();
                let p = mode.required_pooled();
                let spectra = self.spectra(rank, p)?;
                track_from_spectra(&spectra, mode, self.pair.n())
            }
        }
    }
}
