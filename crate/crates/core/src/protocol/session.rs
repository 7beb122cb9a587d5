//! Per-party session state. Each side only ever touches its own view type.

use rand::Rng;

use super::{
    BudgetLedger, ClampMode, EbcAccumulator, EbcEstimate, Mechanism, ProtocolConfig, ProtocolError,
};
use crate::backward::{backward_message_masked, BackwardMsg, BackwardNoise};
use crate::bits::BitRows;
use crate::forward::{
    inverse_transform_sample, pick_and_flip, ForwardError, ForwardMsg, StratumDistribution,
    StratumSampler,
};
use crate::graph::{ego_context, EgoContext, NodeId, NodeSet, Party, XSide, YSide};
use crate::numeric::Extended;

/// X's side of one session: open, optionally release `R`, then assemble the estimate
/// from Y's reply.
pub struct XSession<'v, G: XSide + ?Sized> {
    view: &'v G,
    ego: EgoContext,
    config: ProtocolConfig,
    released: Option<NodeSet>,
    ledger: BudgetLedger,
    non_private: bool,
}

impl<'v, G: XSide + ?Sized> XSession<'v, G> {
    pub fn open(view: &'v G, a: NodeId, config: ProtocolConfig) -> Result<Self, ProtocolError> {
        Ok(Self {
            view,
            ego: ego_context(view, a)?,
            config,
            released: None,
            ledger: BudgetLedger::new(config.epsilon),
            non_private: !config.mechanisms.is_all(),
        })
    }

    pub fn ego(&self) -> &EgoContext {
        &self.ego
    }

    /// With at most one Y-side neighbour there are no Y-internal pairs and no
    /// spanning paths to count, so neither message is sent.
    pub fn needs_exchange(&self) -> bool {
        self.ego.y_neighbours.len() >= 2
    }

    pub(crate) fn mark_non_private(&mut self) {
        self.non_private = true;
    }

    /// Samples `R`. Without a prepared sampler the stratum law is built and searched
    /// in streaming form.
    pub fn release<R: Rng + ?Sized>(
        &mut self,
        sampler: Option<&StratumSampler<Extended>>,
        rng: &mut R,
    ) -> Result<ForwardMsg, ProtocolError> {
        let nodes = if !self.config.mechanisms.forward {
            self.ego.x_neighbours.clone()
        } else {
            let n = self.ego.x_minus.len();
            let index = match sampler {
                Some(s) => {
                    assert_eq!(s.n(), n, "sampler built for another |X⁻|");
                    s.sample(rng)
                }
                None => {
                    let dist = StratumDistribution::<Extended>::new(
                        n,
                        &self.config.params(),
                        self.config.precision,
                    );
                    inverse_transform_sample(&dist, rng)
                }
            };
            self.ledger
                .charge(Party::X, Mechanism::Forward, self.config.epsilon);
            pick_and_flip(&self.ego.x_minus, &self.ego.x_neighbours, index, rng)?
        };
        self.released = Some(nodes.clone());
        Ok(ForwardMsg { nodes })
    }

    /// Releases a chosen `R` instead of sampling one. Test instrumentation only.
    pub fn force_release(&mut self, nodes: NodeSet) -> Result<ForwardMsg, ProtocolError> {
        if !nodes.is_subset(&self.ego.x_minus) {
            return Err(ForwardError::NotSubset.into());
        }
        self.non_private = true;
        self.released = Some(nodes.clone());
        Ok(ForwardMsg { nodes })
    }

    pub fn finish(self, reply: Option<&BackwardMsg>) -> Result<EbcEstimate, ProtocolError> {
        let released = match (&self.released, reply) {
            (Some(r), Some(msg)) => {
                let want = r.len() * self.ego.y_neighbours.len();
                if msg.counts.len() != want {
                    return Err(ProtocolError::Malformed(format!(
                        "{} counts, expected {want}",
                        msg.counts.len()
                    )));
                }
                Some(r)
            }
            (None, None) => None,
            (Some(_), None) => {
                return Err(ProtocolError::Malformed("no reply to a release".into()))
            }
            (None, Some(_)) => return Err(ProtocolError::Malformed("unsolicited reply".into())),
        };
        let (mut parts, skipped) =
            assemble(self.view, &self.ego, released.zip(reply), self.config.clamp)?;
        parts.s_y = reply.map_or(0.0, |m| m.partial_sum);
        Ok(EbcEstimate {
            value: parts.total(),
            parts,
            released: released.map(NodeSet::len),
            skipped_terms: skipped,
            exchanged: reply.is_some(),
            non_private: self.non_private,
            ledger: self.ledger,
            transcript: Vec::new(),
        })
    }
}

/// `S_X` and `S_XY` from X's knowledge. Rows index the ego network plus `a` itself,
/// restricted to the edges X knows, so a Y node's row holds only its X neighbours.
fn assemble<G: XSide + ?Sized>(
    g: &G,
    ego: &EgoContext,
    reply: Option<(&NodeSet, &BackwardMsg)>,
    clamp: ClampMode,
) -> Result<(EbcAccumulator, usize), ProtocolError> {
    let na = &ego.neighbourhood;
    let d = na.len();
    let mut rows = BitRows::new(d, d + 1);
    for (p, v) in na.iter().enumerate() {
        for &w in g.neighbours(v) {
            if let Some(q) = na.position(w) {
                rows.set(p, q);
            } else if w == ego.ego {
                rows.set(p, d);
            }
        }
    }
    let pos = |v: NodeId| na.position(v).expect("ego neighbour");
    let xs: Vec<usize> = ego.x_neighbours.iter().map(pos).collect();
    let ys: Vec<usize> = ego.y_neighbours.iter().map(pos).collect();

    let mut acc = EbcAccumulator::default();
    let mut skipped = 0;
    for (s, &p) in xs.iter().enumerate() {
        for &q in &xs[s + 1..] {
            if !rows.get(p, q) {
                acc.s_x += 1.0 / rows.and_count(p, &rows, q) as f64;
            }
        }
        let i = na.as_slice()[p];
        let in_release = reply.is_some_and(|(r, _)| r.contains(i));
        for &q in &ys {
            if rows.get(p, q) {
                continue;
            }
            let j = na.as_slice()[q];
            let own = rows.and_count(p, &rows, q) as f64;
            let received = match reply {
                Some((_, msg)) if in_release => msg.get(i, j).ok_or_else(|| {
                    ProtocolError::Malformed(format!("missing count for ({i}, {j})"))
                })?,
                _ => 0.0,
            };
            match clamp {
                ClampMode::ClampNonneg => acc.s_xy += 1.0 / (received.max(0.0) + own),
                ClampMode::Raw => {
                    let denom = received + own;
                    if denom > 0.0 {
                        acc.s_xy += 1.0 / denom;
                    } else {
                        skipped += 1;
                    }
                }
            }
        }
    }
    Ok((acc, skipped))
}

/// Y's side of one session: answers a forward message, charging `ε/2` per private
/// half.
pub fn respond_y<G: YSide + ?Sized, R: Rng + ?Sized>(
    view: &G,
    a: NodeId,
    fwd: &ForwardMsg,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(BackwardMsg, BudgetLedger), ProtocolError> {
    let noise = BackwardNoise {
        counts: config.mechanisms.counts,
        partial_sum: config.mechanisms.partial_sum,
    };
    let msg = backward_message_masked(view, a, &fwd.nodes, &config.params(), noise, rng)?;
    let mut ledger = BudgetLedger::new(config.epsilon);
    let half = config.epsilon / 2.0;
    if noise.counts {
        ledger.charge(Party::Y, Mechanism::Counts, half);
    }
    if noise.partial_sum {
        ledger.charge(Party::Y, Mechanism::PartialSum, half);
    }
    Ok((msg, ledger))
}
