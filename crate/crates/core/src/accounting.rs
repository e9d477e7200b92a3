//! Per-round message and operation counters reported by every solver.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Backhaul traffic of one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCount {
    /// Distinct messages created by nodes.
    pub originated: u64,
    /// Deliveries along graph edges (a broadcast to `d` neighbours counts `d`).
    pub edge_deliveries: u64,
    /// Complex scalars carried by all deliveries. Hermitian blocks count in full.
    pub scalars: u64,
}

impl AddAssign for MessageCount {
    fn add_assign(&mut self, rhs: Self) {
        self.originated += rhs.originated;
        self.edge_deliveries += rhs.edge_deliveries;
        self.scalars += rhs.scalars;
    }
}

/// Heavy operations performed in one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpAudit {
    /// Matrix factorizations or inversions whose operand depends on the
    /// instantaneous channel.
    pub csi_factorizations: u64,
    /// Factorizations whose operand depends only on channel statistics.
    pub statistics_factorizations: u64,
    /// Solves against a factor computed earlier.
    pub prefactored_solves: u64,
    /// Matrix-vector products involving a channel block.
    pub csi_matvecs: u64,
}

impl AddAssign for OpAudit {
    fn add_assign(&mut self, rhs: Self) {
        self.csi_factorizations += rhs.csi_factorizations;
        self.statistics_factorizations += rhs.statistics_factorizations;
        self.prefactored_solves += rhs.prefactored_solves;
        self.csi_matvecs += rhs.csi_matvecs;
    }
}

/// What a solver reports after each round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub messages: MessageCount,
    pub ops: OpAudit,
}
