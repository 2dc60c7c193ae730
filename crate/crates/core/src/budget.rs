/// Limits on the exhaustive searches. Exceeding any of them is reported as
/// [`Error::BudgetExceeded`](crate::Error::BudgetExceeded) instead of
/// silently truncating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Nodes visited while expanding an allocation tree.
    pub tree_nodes: u64,
    /// Count-vector states alive after any single item of the Balanced Like DP.
    pub dp_states: u64,
    /// Bid profiles (or candidate bid vectors) evaluated by a strategy search.
    pub profiles: u64,
    /// Nodes visited by the egalitarian branch-and-bound.
    pub search_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { tree_nodes: 10_000_000, dp_states: 1_000_000, profiles: 1 << 22, search_nodes: 10_000_000 }
    }
}

impl Budget {
    pub fn with_profiles(self, profiles: u64) -> Self {
        Budget { profiles, ..self }
    }
}
