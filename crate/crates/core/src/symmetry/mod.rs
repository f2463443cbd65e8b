//! Space-group symmetry: operations, the group table and Wyckoff orbits.

mod group;
mod symop;
mod wyckoff;

pub use group::{load_space_group, space_group_table, GroupKey, SpaceGroup, SpaceGroupTable};
pub use symop::SymOp;
pub use wyckoff::{WyckoffDecomposition, WyckoffOrbit, DEFAULT_EPS};
