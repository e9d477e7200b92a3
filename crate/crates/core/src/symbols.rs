//! Data symbol vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, Rng, C64};
use crate::topology::NetworkTopology;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// Unit-variance circularly-symmetric complex Gaussian.
    Gaussian,
    /// Uniform on `(+-1 +-i) / sqrt 2`.
    #[default]
    Qpsk,
}

/// Stacked symbols `s = [s_1; ...; s_K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolVector {
    stacked: ComplexMatrix,
    block_sizes: Vec<usize>,
}

impl SymbolVector {
    pub fn new(stacked: ComplexMatrix, block_sizes: Vec<usize>) -> Result<Self> {
        if stacked.cols() != 1 || stacked.rows() != block_sizes.iter().sum::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "symbol vector {}x{} for blocks {block_sizes:?}",
                stacked.rows(),
                stacked.cols()
            )));
        }
        Ok(Self { stacked, block_sizes })
    }

    pub fn from_blocks(blocks: &[ComplexMatrix]) -> Result<Self> {
        Self::new(ComplexMatrix::vstack(blocks), blocks.iter().map(|b| b.rows()).collect())
    }

    pub fn zeros(topology: &NetworkTopology) -> Self {
        Self {
            stacked: ComplexMatrix::zeros(topology.total_rx(), 1),
            block_sizes: topology.ue_antennas().to_vec(),
        }
    }

    pub fn stacked(&self) -> &ComplexMatrix {
        &self.stacked
    }

    /// `s_k` for every UE.
    pub fn blocks(&self) -> Vec<ComplexMatrix> {
        self.stacked.split_rows(&self.block_sizes)
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }
}

pub fn draw_symbols(rng: &mut Rng, topology: &NetworkTopology, kind: SymbolKind) -> SymbolVector {
    let m = topology.total_rx();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let entries = (0..m)
        .map(|_| match kind {
            SymbolKind::Gaussian => rng.complex_normal(1.0),
            SymbolKind::Qpsk => {
                let bits = rng.next_u64();
                let re = if bits & 1 == 0 { h } else { -h };
                let im = if bits & 2 == 0 { h } else { -h };
                C64::new(re, im)
            }
        })
        .collect();
    SymbolVector {
        stacked: ComplexMatrix::column(entries),
        block_sizes: topology.ue_antennas().to_vec(),
    }
}
