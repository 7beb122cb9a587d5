//! The full two-party exchange: X's forward release, Y's backward reply, and X's
//! final assembly `S_X + S_XY + S_Y`.

mod net;
mod session;
pub mod wire;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};

use crate::backward::{BackwardError, BackwardMsg};
use crate::forward::{ForwardError, StratumDistribution, StratumSampler};
use crate::graph::{GraphError, NodeId, NodeSet, PartitionedGraph, Party, XView, YView};
use crate::numeric::{Extended, NumericError, PrecisionContext, PrivacyParams};
use crate::SessionRng;

pub use net::{run_party_x, run_party_y, run_two_process, PartyRole, TwoProcessOutcome};
pub use session::{respond_y, XSession};
pub use wire::{decode_msg, encode_msg, DecodeError, Message, MsgType};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Forward(#[from] ForwardError),

    #[error(transparent)]
    Backward(#[from] BackwardError),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("connection error: {0}")]
    Io(#[from] std::io::Error),

    #[error("handshake error: peer speaks wire version {0}, expected {ver}", ver = wire::WIRE_VERSION)]
    Handshake(u8),

    #[error(transparent)]
    Decode(DecodeError),

    #[error("unexpected {0} frame")]
    Unexpected(MsgType),

    #[error("malformed reply: {0}")]
    Malformed(String),

    #[error("{party} spent {spent} of a budget of {budget}")]
    Budget {
        party: Party,
        spent: f64,
        budget: f64,
    },
}

impl From<DecodeError> for ProtocolError {
    fn from(e: DecodeError) -> Self {
        match e.kind {
            wire::DecodeErrorKind::Version(v) => ProtocolError::Handshake(v),
            _ => ProtocolError::Decode(e),
        }
    }
}

/// What X does with a noisy count whose denominator could be non-positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ClampMode {
    /// Skip terms whose denominator is `≤ 0` and count them.
    Raw,
    /// Clamp the received count at 0 before adding X's own intermediates.
    #[default]
    ClampNonneg,
}

impl FromStr for ClampMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(ClampMode::Raw),
            "nonneg" | "clamp_nonneg" => Ok(ClampMode::ClampNonneg),
            _ => Err(format!("unknown clamp mode {s:?} (expected raw or nonneg)")),
        }
    }
}

impl fmt::Display for ClampMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClampMode::Raw => "raw",
            ClampMode::ClampNonneg => "nonneg",
        })
    }
}

/// Which of the three mechanisms run privately. A masked mechanism is replaced by
/// its exact counterpart (`R*`, exact counts, exact partial sum) and the run is
/// reported as non-private.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MechMask {
    /// mech1: X's exponential-mechanism release.
    pub forward: bool,
    /// mech2: Y's noisy spanning counts.
    pub counts: bool,
    /// mech3: Y's noisy partial sum.
    pub partial_sum: bool,
}

impl MechMask {
    pub const ALL: Self = Self {
        forward: true,
        counts: true,
        partial_sum: true,
    };
    pub const NONE: Self = Self {
        forward: false,
        counts: false,
        partial_sum: false,
    };

    pub fn is_all(&self) -> bool {
        *self == Self::ALL
    }
}

impl Default for MechMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl fmt::Display for MechMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("all");
        }
        let on: Vec<&str> = [
            (self.forward, "mech1"),
            (self.counts, "mech2"),
            (self.partial_sum, "mech3"),
        ]
        .iter()
        .filter_map(|&(b, n)| b.then_some(n))
        .collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join("+"))
        }
    }
}

impl FromStr for MechMask {
    type Err = String;

    /// `all`, `none`, or `+`-joined names out of `mech1`, `mech2`, `mech3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => return Ok(Self::ALL),
            "none" => return Ok(Self::NONE),
            _ => {}
        }
        let mut m = Self::NONE;
        for part in s.split('+') {
            match part.trim() {
                "mech1" => m.forward = true,
                "mech2" => m.counts = true,
                "mech3" => m.partial_sum = true,
                other => return Err(format!("unknown mechanism {other:?}")),
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    /// Budget spent by each party.
    pub epsilon: f64,
    pub precision: PrecisionContext,
    pub clamp: ClampMode,
    pub mechanisms: MechMask,
}

impl ProtocolConfig {
    pub fn new(epsilon: f64) -> Result<Self, NumericError> {
        PrivacyParams::new(epsilon)?;
        Ok(Self {
            epsilon,
            precision: PrecisionContext::default(),
            clamp: ClampMode::default(),
            mechanisms: MechMask::ALL,
        })
    }

    pub fn with_clamp(mut self, clamp: ClampMode) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_mechanisms(mut self, mechanisms: MechMask) -> Self {
        self.mechanisms = mechanisms;
        self
    }

    pub fn with_precision(mut self, precision: PrecisionContext) -> Self {
        self.precision = precision;
        self
    }

    pub fn params(&self) -> PrivacyParams {
        PrivacyParams::new(self.epsilon).expect("validated at construction")
    }
}

/// The three partial sums X adds up.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EbcAccumulator {
    /// Pairs inside `R*`.
    pub s_x: f64,
    /// Pairs across `R* × (N_a ∩ V_Y)`.
    pub s_xy: f64,
    /// Pairs inside `N_a ∩ V_Y`, as received from Y.
    pub s_y: f64,
}

impl EbcAccumulator {
    pub fn total(&self) -> f64 {
        self.s_x + self.s_xy + self.s_y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Forward,
    Counts,
    PartialSum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetEvent {
    pub party: Party,
    pub mechanism: Mechanism,
    pub epsilon: f64,
}

/// Record of every private release in a session, with its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetLedger {
    budget: f64,
    events: Vec<BudgetEvent>,
}

impl BudgetLedger {
    pub fn new(budget: f64) -> Self {
        Self {
            budget,
            events: Vec::new(),
        }
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn events(&self) -> &[BudgetEvent] {
        &self.events
    }

    pub(crate) fn charge(&mut self, party: Party, mechanism: Mechanism, epsilon: f64) {
        self.events.push(BudgetEvent {
            party,
            mechanism,
            epsilon,
        });
    }

    pub(crate) fn merge(&mut self, other: &BudgetLedger) {
        self.events.extend_from_slice(&other.events);
    }

    pub fn spent(&self, party: Party) -> f64 {
        self.events
            .iter()
            .filter(|e| e.party == party)
            .map(|e| e.epsilon)
            .sum()
    }

    /// Fails if either party spent more than the budget.
    pub fn check(&self) -> Result<(), ProtocolError> {
        for party in [Party::X, Party::Y] {
            let spent = self.spent(party);
            if spent > self.budget * (1.0 + 1e-12) {
                return Err(ProtocolError::Budget {
                    party,
                    spent,
                    budget: self.budget,
                });
            }
        }
        Ok(())
    }
}

/// One encoded frame and who sent it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptFrame {
    pub from: Party,
    pub bytes: Vec<u8>,
}

/// Outcome of one session, seen from X.
#[derive(Clone, Debug)]
pub struct EbcEstimate {
    pub value: f64,
    pub parts: EbcAccumulator,
    /// `|R|`, absent when no exchange happened.
    pub released: Option<usize>,
    /// Terms dropped under [`ClampMode::Raw`].
    pub skipped_terms: usize,
    /// Whether Y replied; false when `|N_a ∩ V_Y| ≤ 1`.
    pub exchanged: bool,
    /// Set when any mechanism was masked or the release was forced.
    pub non_private: bool,
    pub ledger: BudgetLedger,
    pub transcript: Vec<TranscriptFrame>,
}

/// Rewrites Y's reply before X sees it.
pub type TamperHook<'h> = Box<dyn FnMut(&mut BackwardMsg) + 'h>;

/// Test instrumentation. Forcing a release or tampering with the reply makes the
/// run non-private.
#[derive(Default)]
pub struct SessionHooks<'h> {
    pub forced_release: Option<NodeSet>,
    pub tamper_reply: Option<TamperHook<'h>>,
}

/// Session runner over one partitioned graph. Builds both party views once and
/// caches stratum samplers by `|X⁻|`; the cached law depends only on public values.
pub struct Protocol {
    x: XView,
    y: YView,
    config: ProtocolConfig,
    samplers: Mutex<HashMap<usize, Arc<StratumSampler<Extended>>>>,
    cache_samplers: bool,
}

impl Protocol {
    pub fn new(pg: &PartitionedGraph, config: ProtocolConfig) -> Self {
        Self {
            x: pg.x_view(),
            y: pg.y_view(),
            config,
            samplers: Mutex::new(HashMap::new()),
            cache_samplers: true,
        }
    }

    /// Every session builds and searches its stratum law from scratch, as a lone
    /// session would. Used for timing.
    pub fn without_sampler_cache(mut self) -> Self {
        self.cache_samplers = false;
        self
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn x_view(&self) -> &XView {
        &self.x
    }

    pub fn y_view(&self) -> &YView {
        &self.y
    }

    pub fn sampler(&self, n: usize) -> Arc<StratumSampler<Extended>> {
        let mut cache = self.samplers.lock().expect("sampler cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let dist =
                    StratumDistribution::new(n, &self.config.params(), self.config.precision);
                Arc::new(StratumSampler::new(&dist))
            })
            .clone()
    }

    /// One session for ego `a`. Two seeds are drawn from `rng`, one per party.
    pub fn run<R: Rng + ?Sized>(
        &self,
        a: NodeId,
        rng: &mut R,
    ) -> Result<EbcEstimate, ProtocolError> {
        self.run_with_hooks(a, SessionHooks::default(), rng)
    }

    pub fn run_with_hooks<R: Rng + ?Sized>(
        &self,
        a: NodeId,
        mut hooks: SessionHooks<'_>,
        rng: &mut R,
    ) -> Result<EbcEstimate, ProtocolError> {
        let (mut x_rng, mut y_rng) = party_rngs(rng);
        let mut x = XSession::open(&self.x, a, self.config)?;
        let mut transcript = Vec::new();
        let mut ledger = BudgetLedger::new(self.config.epsilon);

        let reply = if x.needs_exchange() {
            let fwd = match hooks.forced_release.take() {
                Some(r) => x.force_release(r)?,
                None if self.cache_samplers => {
                    let sampler = self.sampler(x.ego().x_minus.len());
                    x.release(Some(&sampler), &mut x_rng)?
                }
                None => x.release(None, &mut x_rng)?,
            };
            let frame = encode_msg(&Message::Forward(fwd));
            let Message::Forward(fwd) = decode_msg(&frame)? else {
                unreachable!("encoded a forward frame")
            };
            transcript.push(TranscriptFrame {
                from: Party::X,
                bytes: frame,
            });

            let (mut msg, y_ledger) = respond_y(&self.y, a, &fwd, &self.config, &mut y_rng)?;
            ledger.merge(&y_ledger);
            if let Some(tamper) = hooks.tamper_reply.as_mut() {
                tamper(&mut msg);
                x.mark_non_private();
            }
            let frame = encode_msg(&Message::Backward(msg));
            let Message::Backward(msg) = decode_msg(&frame)? else {
                unreachable!("encoded a backward frame")
            };
            transcript.push(TranscriptFrame {
                from: Party::Y,
                bytes: frame,
            });
            Some(msg)
        } else {
            None
        };

        let mut est = x.finish(reply.as_ref())?;
        ledger.merge(&est.ledger);
        ledger.check()?;
        est.ledger = ledger;
        est.transcript = transcript;
        Ok(est)
    }
}

pub(crate) fn party_rngs<R: Rng + ?Sized>(rng: &mut R) -> (SessionRng, SessionRng) {
    let x_seed = rng.next_u64();
    let y_seed = rng.next_u64();
    (
        SessionRng::seed_from_u64(x_seed),
        SessionRng::seed_from_u64(y_seed),
    )
}

/// One private session for ego `a`; returns the raw estimate.
pub fn private_ebc<R: Rng + ?Sized>(
    pg: &PartitionedGraph,
    a: NodeId,
    config: ProtocolConfig,
    rng: &mut R,
) -> Result<f64, ProtocolError> {
    Protocol::new(pg, config).run(a, rng).map(|e| e.value)
}

/// The exchange with every mechanism replaced by its exact counterpart: `R = R*`,
/// exact counts and exact partial sum.
pub fn nonprivate_ebc_protocol(pg: &PartitionedGraph, a: NodeId) -> Result<f64, ProtocolError> {
    let config = ProtocolConfig::new(1.0)?.with_mechanisms(MechMask::NONE);
    let (x_view, y_view) = (pg.x_view(), pg.y_view());
    let mut x = XSession::open(&x_view, a, config)?;
    let reply = if x.needs_exchange() {
        let fwd = x.release(None, &mut NoDraws)?;
        Some(respond_y(&y_view, a, &fwd, &config, &mut NoDraws)?.0)
    } else {
        None
    };
    Ok(x.finish(reply.as_ref())?.value)
}

/// Generator for code paths that must not draw; any draw is a bug.
struct NoDraws;

impl rand::RngCore for NoDraws {
    fn next_u32(&mut self) -> u32 {
        unreachable!("noiseless path drew a random number")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("noiseless path drew a random number")
    }

    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("noiseless path drew a random number")
    }

    fn try_fill_bytes(&mut self, _: &mut [u8]) -> Result<(), rand::Error> {
        unreachable!("noiseless path drew a random number")
    }
}
