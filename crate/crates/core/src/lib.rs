//! Information-theoretic correlation measures on finite joint distributions:
//! mutual information, Gács-Körner and Wyner common information, tension
//! slices, rectangle discrepancy, and two-party protocol simulation, together
//! with mechanical verification suites for the inequalities connecting them.

pub mod bounds;
pub mod disc;
pub mod dist;
pub mod protocol;
pub mod region;
pub mod report;
pub mod tension;
pub mod util;

pub use dist::{Alphabet, Channel, DistError, JointDist};
pub use region::{RegionError, UpwardRegion};
pub use report::{BoundReport, BoundStatus, SuiteSummary};
