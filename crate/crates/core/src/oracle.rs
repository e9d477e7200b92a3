//! Centralized reference precoders.
//!
//! The regularized zero-forcing precoder `x = H^H (H H^H + beta I)^{-1} s`
//! is also the posterior mean of `x` under the virtual observation model
//! `s = H x + z`, `z ~ CN(0, beta I)`, `x ~ CN(0, I)`. Both routes are
//! computed here independently so each can check the other. The
//! distributed solvers converge to the unnormalized precoder; power
//! normalization is a separate post-processing step.

use crate::channel::{assemble_global, ChannelSet};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_solve, ComplexMatrix};
use crate::topology::NetworkTopology;

/// Regularization `beta`, optionally overridden per UE.
#[derive(Clone, Debug, PartialEq)]
pub struct Regularization {
    beta: f64,
    per_user: Option<Vec<f64>>,
}

impl Regularization {
    pub fn uniform(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidBeta(beta));
        }
        Ok(Self { beta, per_user: None })
    }

    /// `beta_k` for each UE; `beta` is kept as the nominal value.
    pub fn per_user(beta: f64, per_user: Vec<f64>) -> Result<Self> {
        let mut reg = Self::uniform(beta)?;
        if let Some(&bad) = per_user.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidBeta(bad));
        }
        reg.per_user = Some(per_user);
        Ok(reg)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn per_user_values(&self) -> Option<&[f64]> {
        self.per_user.as_deref()
    }

    pub fn for_user(&self, k: usize) -> f64 {
        self.per_user.as_ref().map_or(self.beta, |b| b[k])
    }

    pub fn check(&self, topology: &NetworkTopology) -> Result<()> {
        match &self.per_user {
            Some(b) if b.len() != topology.num_ue() => Err(Error::DimensionMismatch(format!(
                "{} per-user regularizers for {} UEs",
                b.len(),
                topology.num_ue()
            ))),
            _ => Ok(()),
        }
    }

    /// One diagonal entry per receive antenna.
    pub fn row_diagonal(&self, topology: &NetworkTopology) -> Vec<f64> {
        topology
            .ue_antennas()
            .iter()
            .enumerate()
            .flat_map(|(k, &m)| std::iter::repeat_n(self.for_user(k), m))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSolution {
    /// Stacked per-BS blocks `x_l`.
    pub x: ComplexMatrix,
    pub block_sizes: Vec<usize>,
    /// Power normalization scale; `None` until [`power_normalize`] runs.
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl PrecoderSolution {
    pub fn blocks(&self) -> Vec<ComplexMatrix> {
        self.x.split_rows(&self.block_sizes)
    }
}

fn check_column(h: &ComplexMatrix, s: &ComplexMatrix) -> Result<()> {
    if s.cols() != 1 || s.rows() != h.rows() {
        return Err(Error::DimensionMismatch(format!(
            "symbols {}x{} against channel {}x{}",
            s.rows(),
            s.cols(),
            h.rows(),
            h.cols()
        )));
    }
    Ok(())
}

/// `H^H (H H^H + D)^{-1} s` with `D = diag(row_reg)`.
pub fn rzfbf_with_diagonal(h: &ComplexMatrix, s: &ComplexMatrix, row_reg: &[f64]) -> Result<ComplexMatrix> {
    check_column(h, s)?;
    let gram = (h * &h.adjoint()).shift_diagonal_by(row_reg).hermitian_part();
    let y = hermitian_solve(&gram, s)?;
    Ok(&h.adjoint() * &y)
}

/// Unnormalized RZF precoder for a global channel, as a single block.
///
/// `beta = 0` gives plain zero forcing and fails with
/// `NotPositiveDefinite` when `H H^H` is singular.
pub fn rzfbf_centralized(h: &ComplexMatrix, s: &ComplexMatrix, beta: f64) -> Result<PrecoderSolution> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    let x = rzfbf_with_diagonal(h, s, &vec![beta; h.rows()])?;
    Ok(PrecoderSolution {
        block_sizes: vec![x.rows()],
        x,
        alpha: None,
        beta,
    })
}

/// Unnormalized RZF precoder for a channel set, split into BS blocks.
pub fn rzfbf_for_channels(channels: &ChannelSet, s: &ComplexMatrix, reg: &Regularization) -> Result<PrecoderSolution> {
    let topo = channels.topology();
    reg.check(topo)?;
    let h = assemble_global(channels);
    let x = rzfbf_with_diagonal(&h, s, &reg.row_diagonal(topo))?;
    Ok(PrecoderSolution {
        x,
        block_sizes: topo.bs_antennas().to_vec(),
        alpha: None,
        beta: reg.beta(),
    })
}

/// Posterior mean of the virtual model in its primal form,
/// `((1/beta) H^H H + I)^{-1} (1/beta) H^H s`.
pub fn mmse_virtual(h: &ComplexMatrix, s: &ComplexMatrix, beta: f64) -> Result<ComplexMatrix> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    check_column(h, s)?;
    let inv_beta = 1.0 / beta;
    let precision = (&h.adjoint() * h).scale(inv_beta).shift_diagonal(1.0).hermitian_part();
    let rhs = (&h.adjoint() * s).scale(inv_beta);
    hermitian_solve(&precision, &rhs)
}

/// Scales `x` by `alpha = min_l sqrt(P_l / |x_l|^2)`, so the tightest BS
/// meets its budget with equality. Budgets bound the squared norm of each
/// block for this realization.
pub fn power_normalize(solution: &PrecoderSolution, budgets: &[f64]) -> Result<PrecoderSolution> {
    if budgets.len() != solution.block_sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} budgets for {} blocks",
            budgets.len(),
            solution.block_sizes.len()
        )));
    }
    if let Some(&bad) = budgets.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::InvalidParam(format!("power budget {bad} must be > 0")));
    }
    let alpha = solution
        .blocks()
        .iter()
        .zip(budgets)
        .filter(|(b, _)| b.norm_sqr() > 0.0)
        .map(|(b, p)| (p / b.norm_sqr()).sqrt())
        .fold(f64::INFINITY, f64::min);
    if !alpha.is_finite() {
        return Err(Error::ZeroPrecoder);
    }
    Ok(PrecoderSolution {
        x: solution.x.scale(alpha),
        block_sizes: solution.block_sizes.clone(),
        alpha: Some(alpha),
        beta: solution.beta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadraticSide {
    /// `E[X C X^H]`.
    XCXh,
    /// `E[X^H D X]`.
    XhDX,
}

/// Closed-form second moments of `X = Xbar + A^{1/2} W B^{1/2}` with
/// unit-variance i.i.d. `W` (`A` is `m x m`, `B` is `n x n`):
/// `E[X C X^H] = Xbar C Xbar^H + tr(B C) A` and
/// `E[X^H D X] = Xbar^H D Xbar + tr(A D) B`.
pub fn gaussian_second_moments(
    xbar: &ComplexMatrix,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    weight: &ComplexMatrix,
    side: QuadraticSide,
) -> Result<ComplexMatrix> {
    let (m, n) = xbar.shape();
    let dims_ok = a.shape() == (m, m)
        && b.shape() == (n, n)
        && match side {
            QuadraticSide::XCXh => weight.shape() == (n, n),
            QuadraticSide::XhDX => weight.shape() == (m, m),
        };
    if !dims_ok {
        return Err(Error::DimensionMismatch(format!(
            "Xbar {m}x{n}, A {:?}, B {:?}, weight {:?}",
            a.shape(),
            b.shape(),
            weight.shape()
        )));
    }
    Ok(match side {
        QuadraticSide::XCXh => {
            let mean = &(xbar * weight) * &xbar.adjoint();
            &mean + &a.scale_complex((b * weight).trace())
        }
        QuadraticSide::XhDX => {
            let mean = &(&xbar.adjoint() * weight) * xbar;
            &mean + &b.scale_complex((a * weight).trace())
        }
    })
}
