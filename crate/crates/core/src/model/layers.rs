//! Message-passing building blocks recorded on a [`Tape`].

use rand_chacha::ChaCha8Rng;

use crate::diffcore::params::glorot_uniform;
use crate::diffcore::{Mlp, MlpInput, MlpSpec, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::meshgraph::{CrossGraphEdges, EdgeIndex, REST_FEATURES};

/// One Re-MP step: edge, optional hidden and node MLPs.
#[derive(Clone, Debug)]
pub struct RempStep {
    pub edge: Mlp,
    pub hidden: Option<Mlp>,
    pub node: Mlp,
}

impl RempStep {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        c: usize,
        recurrent: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let edge = Mlp::register(store, &format!("{prefix}.edge"), MlpSpec::standard(4 * c, c, c, true), rng)?;
        let hidden = if recurrent {
            Some(Mlp::register(store, &format!("{prefix}.hidden"), MlpSpec::standard(4 * c, c, c, true), rng)?)
        } else {
            None
        };
        let node = Mlp::register(store, &format!("{prefix}.node"), MlpSpec::standard(2 * c, c, c, true), rng)?;
        Ok(RempStep { edge, hidden, node })
    }
}

/// Output of a message-passing step or layer.
#[derive(Clone, Copy, Debug)]
pub struct RempOut {
    pub nodes: Var,
    pub edges: Var,
    /// `None` stands for an all-zero hidden state.
    pub hidden: Option<Var>,
}

/// `X_E' = X_E + MLP_e(x_s, x_r, x_e, h)`, `H' = MLP_h(...)`,
/// `X_V' = X_V + MLP_v(x_v, Σ_in X_E')`. The aggregate at each receiver sums
/// incoming edges in edge-list order; a node without incoming edges gets zero.
pub fn remp_step(
    tape: &mut Tape<'_>,
    step: &RempStep,
    nodes: Var,
    edges_feat: Var,
    hidden: Option<Var>,
    edges: &EdgeIndex,
) -> Result<RempOut> {
    let n = tape.value(nodes).rows();
    let c = tape.value(nodes).cols();
    let m = tape.value(edges_feat).rows();
    if m != edges.len() || hidden.is_some_and(|h| tape.value(h).rows() != m) {
        return Err(Error::shape(
            "remp_step",
            format!("{m} edge rows / hidden rows for {} edges", edges.len()),
        ));
    }
    let h_part = match hidden {
        Some(h) => MlpInput::Rows(h),
        None => MlpInput::Zero(c),
    };
    let h_part2 = match hidden {
        Some(h) => MlpInput::Rows(h),
        None => MlpInput::Zero(c),
    };
    let inputs = [
        MlpInput::Gathered(nodes, edges.senders.clone()),
        MlpInput::Gathered(nodes, edges.receivers.clone()),
        MlpInput::Rows(edges_feat),
        h_part,
    ];
    let de = step.edge.forward_parts(tape, &inputs)?;
    let new_hidden = match &step.hidden {
        Some(mlp) => {
            let [a, b, e, _] = inputs;
            Some(mlp.forward_parts(tape, &[a, b, e, h_part2])?)
        }
        None => None,
    };
    let new_edges = tape.add(edges_feat, de)?;
    let agg = tape.scatter_add_rows(new_edges, edges.receivers.clone(), n)?;
    let dv = step
        .node
        .forward_parts(tape, &[MlpInput::Rows(nodes), MlpInput::Rows(agg)])?;
    let new_nodes = tape.add(nodes, dv)?;
    Ok(RempOut {
        nodes: new_nodes,
        edges: new_edges,
        hidden: new_hidden,
    })
}

/// Applies the steps in order, threading one hidden state. Zero steps is the identity.
pub fn remp_layer(
    tape: &mut Tape<'_>,
    steps: &[RempStep],
    nodes: Var,
    edges_feat: Var,
    hidden: Option<Var>,
    edges: &EdgeIndex,
) -> Result<RempOut> {
    let mut out = RempOut {
        nodes,
        edges: edges_feat,
        hidden,
    };
    for s in steps {
        let next = remp_step(tape, s, out.nodes, out.edges, out.hidden, edges)?;
        // non-recurrent steps keep whatever hidden state came in (always zero in practice)
        out = RempOut {
            hidden: if s.hidden.is_some() { next.hidden } else { out.hidden },
            ..next
        };
    }
    Ok(out)
}

/// Cross-graph message passing (DS-MP, or US-MP on reversed edges):
/// `out[r] = MLP_v(Σ_{e -> r} MLP_e(x_s, enc(rest_e)))`, no residual.
#[derive(Clone, Debug)]
pub struct CrossMp {
    pub rest: Mlp,
    pub edge: Mlp,
    pub node: Mlp,
}

impl CrossMp {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        cin: usize,
        cout: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(CrossMp {
            rest: Mlp::register(store, &format!("{prefix}.rest"), MlpSpec::standard(REST_FEATURES, cin, cin, true), rng)?,
            edge: Mlp::register(store, &format!("{prefix}.edge"), MlpSpec::standard(2 * cin, cout, cout, true), rng)?,
            node: Mlp::register(store, &format!("{prefix}.node"), MlpSpec::standard(cout, cout, cout, true), rng)?,
        })
    }

    /// Encodes the 4-channel rest features of `cross`.
    pub fn encode_rest(&self, tape: &mut Tape<'_>, cross: &CrossGraphEdges) -> Result<Var> {
        let r = tape.leaf(cross.rest_features.clone());
        self.rest.forward(tape, r)
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        x: Var,
        cross: &CrossGraphEdges,
        rest_encoded: Var,
        n_out: usize,
    ) -> Result<Var> {
        cross_mp_forward(tape, &self.edge, &self.node, x, cross, rest_encoded, n_out)
    }
}

/// DS-MP / US-MP with explicit MLPs; see [`CrossMp`].
pub fn cross_mp_forward(
    tape: &mut Tape<'_>,
    edge: &Mlp,
    node: &Mlp,
    x: Var,
    cross: &CrossGraphEdges,
    rest_encoded: Var,
    n_out: usize,
) -> Result<Var> {
    if tape.value(rest_encoded).rows() != cross.len() {
        return Err(Error::shape("cross_mp", "encoded rest rows differ from cross-edge count"));
    }
    let msg = edge.forward_parts(
        tape,
        &[
            MlpInput::Gathered(x, cross.edges.senders.clone()),
            MlpInput::Rows(rest_encoded),
        ],
    )?;
    let agg = tape.scatter_add_rows(msg, cross.edges.receivers.clone(), n_out)?;
    node.forward(tape, agg)
}

/// Per-edge weights `W in R^{M x (C_in * C_out)}` for DS-NW / US-NW.
#[derive(Clone, Copy, Debug)]
pub struct NonSharedWeights {
    pub w: ParamId,
    pub cin: usize,
    pub cout: usize,
}

impl NonSharedWeights {
    /// Glorot-uniform with the fan-in scaled by the mean receiver in-degree.
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        cross: &CrossGraphEdges,
        n_out: usize,
        cin: usize,
        cout: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let m = cross.len();
        let deg = (m as f64 / n_out.max(1) as f64).max(1.0);
        let fan_in = ((cin as f64) * deg).round() as usize;
        let w = store.add(name, glorot_uniform(m, cin * cout, fan_in.max(1), cout, rng))?;
        Ok(NonSharedWeights { w, cin, cout })
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        x: Var,
        cross: &CrossGraphEdges,
        n_out: usize,
        alpha: f64,
    ) -> Result<Var> {
        nw_forward(tape, x, &cross.edges, self.w, self.cout, n_out, alpha)
    }
}

/// `out[r] = LeakyReLU(Σ_{e=(s,r)} x_s W_e)` with the sum taken before the activation.
pub fn nw_forward(
    tape: &mut Tape<'_>,
    x: Var,
    edges: &EdgeIndex,
    w: ParamId,
    cout: usize,
    n_out: usize,
    alpha: f64,
) -> Result<Var> {
    let wrows = tape.params().value(w).rows();
    if wrows != edges.len() {
        return Err(Error::Config(format!(
            "non-shared weight has {wrows} edge rows but the graph has {} cross edges",
            edges.len()
        )));
    }
    let msg = tape.edge_transform(x, w, edges.senders.clone(), cout)?;
    let agg = tape.scatter_add_rows(msg, edges.receivers.clone(), n_out)?;
    Ok(tape.leaky_relu(agg, alpha))
}
