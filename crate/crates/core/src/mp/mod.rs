//! Generic max-product message passing over binary factor graphs.

pub mod factors;
mod graph;
pub mod oracle;

pub use factors::{and_update, damped_assign, or_update, pool_update, pool_update_weighted, AndMessages};
pub use graph::{Beliefs, Clamp, FactorGraph, FactorId, Schedule, Targets, VarId, Visit};
pub use oracle::{oracle_factor_update, ORACLE_MAX_ARITY};

/// The factor types a graph can hold.
///
/// Slot layouts (order of the neighbor list):
/// - `And`: `[t1, t2, b]`
/// - `Or`: `[b, t_1, .., t_M]`
/// - `Pool`: `[t, b_1, .., b_M]`
/// - `AndOrTree`: `[r, s_1, w_1, .., s_K, w_K]`, i.e. `r = OR_k (s_k AND w_k)`
/// - `ClassTree`: `[c_1, .., c_K, s_11, .., s_JK]` with templates class-major;
///   exactly one class and one of its templates is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    And,
    Or,
    Pool,
    AndOrTree,
    ClassTree { classes: u32, templates: u32 },
}

impl FactorKind {
    /// Whether the neighbor in `slot` sits above the factor.
    ///
    /// Class-tree neighbors are all bottoms: its own top is clamped to 1.
    #[inline]
    pub fn is_top(self, slot: usize) -> bool {
        match self {
            FactorKind::And => slot < 2,
            FactorKind::Or | FactorKind::AndOrTree => slot > 0,
            FactorKind::Pool => slot == 0,
            FactorKind::ClassTree { .. } => false,
        }
    }

    pub fn check_arity(self, n: usize) -> bool {
        match self {
            FactorKind::And => n == 3,
            FactorKind::Or | FactorKind::Pool => n >= 2,
            FactorKind::AndOrTree => n >= 3 && n % 2 == 1,
            FactorKind::ClassTree { classes, templates } => {
                classes > 0 && templates > 0 && n == (classes + classes * templates) as usize
            }
        }
    }
}
