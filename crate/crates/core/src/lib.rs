//! Differentially-private two-party egocentric betweenness centrality.
//!
//! Two parties each own a disjoint part of a graph's node set. Party X wants the
//! egocentric betweenness centrality (EBC) of one of its nodes, but neither party
//! may learn the other's internal edges beyond what an ε-edge-differentially-private
//! release reveals. The protocol runs in three mechanisms:
//!
//!  - X releases a noisy copy `R` of the X-side ego network through the exponential
//!    mechanism, sampled with a two-stage stratified sampler ([`forward`]).
//!  - Y answers with Laplace-noised counts of spanning 2-paths and a Laplace-noised
//!    partial EBC sum ([`backward`]).
//!  - X assembles the final estimate ([`protocol`]).
//!
//! Log-space probability arithmetic is generic over [`LogScalar`]; `f32`/`f64` are
//! supported for testing and the production path runs on MPFR-backed [`Extended`]
//! reals at a configurable precision (300 bits by default).

pub mod backward;
pub mod forward;
pub mod graph;
pub mod numeric;
pub mod oracle;
pub mod protocol;

mod bits;

pub use backward::{backward_message, partial_ebc_y, spanning_counts, BackwardMsg, CountEntry};
pub use forward::{
    forward_message, inverse_transform_sample, pick_and_flip, quality, stratum_distribution,
    ForwardMsg, StratumDistribution, StratumSampler,
};
pub use graph::{
    ego_context, exact_ebc, load_edge_list, partition_nodes, two_path_count, Adjacency, EdgeClass,
    EdgeListFormat, EgoContext, Graph, GraphError, LoadReport, NodeId, NodeSet, PartitionedGraph,
    Party, XSide, XView, YSide, YView,
};
pub use numeric::{
    log_add, sample_laplace, sample_neg_exp1, Extended, LogScalar, PrecisionContext, PrivacyParams,
};
pub use protocol::{
    nonprivate_ebc_protocol, private_ebc, ClampMode, EbcAccumulator, EbcEstimate, MechMask,
    Protocol, ProtocolConfig,
};

/// Stratum distribution over MPFR reals; what the protocol uses.
pub type ExtStratumDistribution = StratumDistribution<Extended>;
/// Stratum distribution over native doubles.
pub type F64StratumDistribution = StratumDistribution<f64>;
/// Stratum distribution over native singles (tests and precision studies only).
pub type F32StratumDistribution = StratumDistribution<f32>;
/// Cached inverse-CDF sampler over MPFR reals.
pub type ExtStratumSampler = StratumSampler<Extended>;
/// Cached inverse-CDF sampler over native doubles.
pub type F64StratumSampler = StratumSampler<f64>;

/// Generator used for protocol sessions and experiment tasks.
pub type SessionRng = rand_chacha::ChaCha12Rng;
