use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{GUNetConfig, ModelVariant};
use super::graphs::{ModelGraphs, SampleContext};
use super::layers::{remp_layer, CrossMp, NonSharedWeights, RempStep};
use super::norm::NormStats;
use crate::diffcore::checkpoint::{read_tensors, write_tensors};
use crate::diffcore::{Matrix, Mlp, MlpSpec, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::meshgraph::{
    compute_node_features, edge_features_from_displacement, GraphHierarchy, Point,
    EDGE_FEATURES, NODE_FEATURES, REST_FEATURES,
};

const VARIANT_KEY: &str = "__variant";
const CONFIG_KEY: &str = "__config";
const HIERARCHY_KEY: &str = "__hierarchy";

/// Multi-scale parts of a GUNet block.
#[derive(Clone, Debug)]
struct UNet {
    graphs: Arc<ModelGraphs>,
    fine_pre: Vec<RempStep>,
    down_mp: CrossMp,
    down_nw: Vec<NonSharedWeights>,
    coarse_edge_enc: Mlp,
    coarse: Vec<RempStep>,
    up_nw: Vec<NonSharedWeights>,
    up_mp: CrossMp,
    fine_post: Vec<RempStep>,
}

#[derive(Clone, Debug)]
enum Body {
    UNet(Box<UNet>),
    /// Single-scale processor of baselines 1 and 2.
    Flat(Vec<RempStep>),
}

/// Recorded hidden states; `None` stands for zeros.
#[derive(Clone, Copy, Debug, Default)]
pub struct HiddenVars {
    pub fine: Option<Var>,
    pub coarse: Option<Var>,
}

/// Hidden-state values carried between time steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HiddenState {
    pub fine: Option<Matrix>,
    pub coarse: Option<Matrix>,
}

impl HiddenState {
    pub fn to_vars(&self, tape: &mut Tape<'_>) -> HiddenVars {
        HiddenVars {
            fine: self.fine.clone().map(|m| tape.leaf(m)),
            coarse: self.coarse.clone().map(|m| tape.leaf(m)),
        }
    }

    pub fn from_vars(tape: &Tape<'_>, h: HiddenVars) -> Self {
        HiddenState {
            fine: h.fine.map(|v| tape.value(v).clone()),
            coarse: h.coarse.map(|v| tape.value(v).clone()),
        }
    }

    /// True when every stored entry is zero (or nothing is stored).
    pub fn is_zero(&self) -> bool {
        [&self.fine, &self.coarse]
            .into_iter()
            .flatten()
            .all(|m| m.as_slice().iter().all(|v| *v == 0.0))
    }
}

/// Normalized per-step network inputs.
#[derive(Clone, Debug)]
pub struct StepInputs {
    pub nodes: Matrix,
    pub edges: Matrix,
}

/// Parameter-dependent per-sequence constants (encoded rest geometry).
#[derive(Clone, Copy, Debug)]
pub struct BlockConsts {
    down_rest: Var,
    up_rest: Var,
    coarse_edges: Var,
}

/// A trainable model of one variant.
#[derive(Clone, Debug)]
pub struct Model {
    pub variant: ModelVariant,
    pub config: GUNetConfig,
    pub params: ParamStore,
    pub norm: NormStats,
    node_enc: Mlp,
    edge_enc: Mlp,
    body: Body,
    decoder: Mlp,
}

fn register_steps(
    store: &mut ParamStore,
    prefix: &str,
    n: usize,
    c: usize,
    recurrent: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RempStep>> {
    (0..n)
        .map(|p| RempStep::register(store, &format!("{prefix}.s{p}"), c, recurrent, rng))
        .collect()
}

/// Builds a freshly initialized model. Parameters are drawn from ChaCha8
/// seeded with `seed`; registration order is fixed.
pub fn build_model(
    variant: ModelVariant,
    hierarchy: Option<Arc<GraphHierarchy>>,
    config: &GUNetConfig,
    seed: u64,
) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let c0 = if variant.is_multiscale() {
        config.channels[0]
    } else {
        config.baseline_channels
    };
    let node_enc = Mlp::register(&mut store, "enc.node", MlpSpec::standard(NODE_FEATURES, c0, c0, true), &mut rng)?;
    let edge_enc = Mlp::register(&mut store, "enc.edge", MlpSpec::standard(EDGE_FEATURES, c0, c0, true), &mut rng)?;
    let recurrent = variant.is_recurrent();
    let body = if variant.is_multiscale() {
        let Some(h) = hierarchy else {
            return Err(Error::Config(format!("{variant} needs a graph hierarchy")));
        };
        if h.depth() != config.levels {
            return Err(Error::Config(format!(
                "hierarchy has {} coarse levels, model expects {}",
                h.depth(),
                config.levels
            )));
        }
        let graphs = Arc::new(ModelGraphs::new(h)?);
        if graphs.k() != config.k {
            return Err(Error::Config(format!(
                "hierarchy cross edges use k = {}, model expects {}",
                graphs.k(),
                config.k
            )));
        }
        let ch = &config.channels;
        let l_max = config.levels;
        let fine_pre = register_steps(&mut store, "fine_pre", config.fine_steps, ch[0], recurrent, &mut rng)?;
        let down_mp = CrossMp::register(&mut store, "down.mp", ch[0], ch[1], &mut rng)?;
        let mut down_nw = Vec::new();
        for l in 1..l_max {
            down_nw.push(NonSharedWeights::register(
                &mut store,
                &format!("down.nw{l}.w"),
                &graphs.nw_down[l - 1],
                graphs.level_nodes(l + 1),
                ch[l],
                ch[l + 1],
                &mut rng,
            )?);
        }
        let cl = ch[l_max];
        let coarse_edge_enc = Mlp::register(&mut store, "coarse.edge_enc", MlpSpec::standard(REST_FEATURES, cl, cl, true), &mut rng)?;
        let coarse = register_steps(&mut store, "coarse", config.coarse_steps, cl, recurrent, &mut rng)?;
        let mut up_nw = Vec::new();
        for l in (1..l_max).rev() {
            up_nw.push(NonSharedWeights::register(
                &mut store,
                &format!("up.nw{l}.w"),
                &graphs.nw_up[l - 1],
                graphs.level_nodes(l),
                ch[l + 1],
                ch[l],
                &mut rng,
            )?);
        }
        let up_mp = CrossMp::register(&mut store, "up.mp", ch[1], ch[0], &mut rng)?;
        let fine_post = register_steps(&mut store, "fine_post", config.fine_steps, ch[0], recurrent, &mut rng)?;
        Body::UNet(Box::new(UNet {
            graphs,
            fine_pre,
            down_mp,
            down_nw,
            coarse_edge_enc,
            coarse,
            up_nw,
            up_mp,
            fine_post,
        }))
    } else {
        Body::Flat(register_steps(&mut store, "proc", config.baseline_steps, c0, recurrent, &mut rng)?)
    };
    let decoder = Mlp::register(&mut store, "dec", MlpSpec::standard(c0, c0, NODE_FEATURES, false), &mut rng)?;
    Ok(Model {
        variant,
        config: config.clone(),
        params: store,
        norm: NormStats::default(),
        node_enc,
        edge_enc,
        body,
        decoder,
    })
}

impl Model {
    pub fn graphs(&self) -> Option<&ModelGraphs> {
        match &self.body {
            Body::UNet(u) => Some(&u.graphs),
            Body::Flat(_) => None,
        }
    }

    /// Fine latent width.
    pub fn latent_channels(&self) -> usize {
        self.node_enc.spec.output
    }

    pub fn context(&self, seq: &crate::meshgraph::GraphSequence) -> Result<SampleContext> {
        SampleContext::new(seq, self.graphs())
    }

    /// Normalized inputs for the step from displacement `curr` (with
    /// previous displacement `prev`, both relative to `ctx.init`).
    pub fn step_inputs(&self, ctx: &SampleContext, prev: &[Point], curr: &[Point]) -> Result<StepInputs> {
        let mut nodes = compute_node_features(prev, curr)?;
        let mut edges = edge_features_from_displacement(&ctx.init, curr, &ctx.edges)?;
        self.norm.normalize_nodes(&mut nodes);
        self.norm.normalize_edges(&mut edges);
        Ok(StepInputs { nodes, edges })
    }

    /// Encodes per-sequence constants on `tape`.
    pub fn constants(&self, tape: &mut Tape<'_>, ctx: &SampleContext) -> Result<Option<BlockConsts>> {
        let Body::UNet(u) = &self.body else {
            return Ok(None);
        };
        let (Some(down), Some(up)) = (&ctx.down, &ctx.up) else {
            return Err(Error::Config("sample context lacks cross-graph edges".into()));
        };
        let coarse = tape.leaf(u.graphs.coarse_rest.clone());
        Ok(Some(BlockConsts {
            down_rest: u.down_mp.encode_rest(tape, down)?,
            up_rest: u.up_mp.encode_rest(tape, up)?,
            coarse_edges: u.coarse_edge_enc.forward(tape, coarse)?,
        }))
    }

    /// One block application. Returns normalized increments (fixed rows
    /// zeroed) and the hidden state for the next step.
    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        ctx: &SampleContext,
        consts: Option<&BlockConsts>,
        inputs: &StepInputs,
        hidden: HiddenVars,
    ) -> Result<(Var, HiddenVars)> {
        if inputs.nodes.rows() != ctx.num_nodes() || inputs.edges.rows() != ctx.edges.len() {
            return Err(Error::shape("model step", "inputs do not match the sample graph"));
        }
        let xv = tape.leaf(inputs.nodes.clone());
        let xe = tape.leaf(inputs.edges.clone());
        let xv = self.node_enc.forward(tape, xv)?;
        let xe = self.edge_enc.forward(tape, xe)?;
        let n = ctx.num_nodes();
        let (x, next) = match &self.body {
            Body::Flat(steps) => {
                let out = remp_layer(tape, steps, xv, xe, hidden.fine, &ctx.edges)?;
                (out.nodes, HiddenVars { fine: out.hidden, coarse: None })
            }
            Body::UNet(u) => {
                let consts = consts.ok_or_else(|| Error::Config("missing block constants".into()))?;
                let (Some(down), Some(up)) = (&ctx.down, &ctx.up) else {
                    return Err(Error::Config("sample context lacks cross-graph edges".into()));
                };
                let g = &u.graphs;
                let depth = g.depth();
                let alpha = self.config.leaky_slope;
                let pre = remp_layer(tape, &u.fine_pre, xv, xe, hidden.fine, &ctx.edges)?;
                let mut saved = Vec::with_capacity(depth + 1);
                saved.push(pre.nodes);
                let mut x = u.down_mp.forward(tape, pre.nodes, down, consts.down_rest, g.level_nodes(1))?;
                saved.push(x);
                for (i, nw) in u.down_nw.iter().enumerate() {
                    x = nw.forward(tape, x, &g.nw_down[i], g.level_nodes(i + 2), alpha)?;
                    saved.push(x);
                }
                let coarse = remp_layer(tape, &u.coarse, x, consts.coarse_edges, hidden.coarse, g.coarse_edges())?;
                x = tape.add(coarse.nodes, saved[depth])?;
                for (j, nw) in u.up_nw.iter().enumerate() {
                    // level depth - j -> depth - j - 1
                    let to = depth - j - 1;
                    x = nw.forward(tape, x, &g.nw_up[to - 1], g.level_nodes(to), alpha)?;
                    x = tape.add(x, saved[to])?;
                }
                x = u.up_mp.forward(tape, x, up, consts.up_rest, n)?;
                x = tape.add(x, saved[0])?;
                let post = remp_layer(tape, &u.fine_post, x, pre.edges, pre.hidden, &ctx.edges)?;
                (post.nodes, HiddenVars { fine: pre.hidden, coarse: coarse.hidden })
            }
        };
        let y = self.decoder.forward(tape, x)?;
        let y = tape.zero_rows(y, ctx.fixed.clone())?;
        Ok((y, next))
    }

    /// Inference step without gradient bookkeeping beyond one throwaway tape.
    /// Returns physical increments and updates `hidden`.
    pub fn predict_step(
        &self,
        ctx: &SampleContext,
        inputs: &StepInputs,
        hidden: &mut HiddenState,
    ) -> Result<Matrix> {
        let mut tape = Tape::new(&self.params);
        let consts = self.constants(&mut tape, ctx)?;
        let hv = hidden.to_vars(&mut tape);
        let (y, next) = self.step(&mut tape, ctx, consts.as_ref(), inputs, hv)?;
        *hidden = HiddenState::from_vars(&tape, next);
        let mut out = tape.value(y).clone();
        self.norm.denormalize_targets(&mut out);
        if !out.is_finite() {
            return Err(Error::NonFinite("model prediction".into()));
        }
        Ok(out)
    }

    /// Checkpoint tensors: parameters, optimizer moments, normalization,
    /// variant, configuration and hierarchy signature.
    pub fn to_tensors(&self) -> Vec<(String, Matrix)> {
        let mut t = self.params.to_tensors();
        t.extend(self.norm.to_tensors());
        t.push((VARIANT_KEY.into(), Matrix::filled(1, 1, self.variant.code())));
        let c = self.config.to_vec();
        t.push((CONFIG_KEY.into(), Matrix::from_vec(1, c.len(), c)));
        if let Some(g) = self.graphs() {
            let s = g.signature();
            t.push((HIERARCHY_KEY.into(), Matrix::from_vec(1, s.len(), s)));
        }
        t
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_tensors(path, &self.to_tensors())
    }

    /// Rebuilds a model from checkpoint tensors, checking that the stored
    /// hierarchy signature matches `hierarchy`.
    pub fn from_tensors(
        tensors: &BTreeMap<String, Matrix>,
        hierarchy: Option<Arc<GraphHierarchy>>,
    ) -> Result<Self> {
        let (variant, config) = checkpoint_header(tensors)?;
        let mut model = build_model(variant, hierarchy, &config, 0)?;
        if let Some(g) = model.graphs() {
            let stored = tensors.get(HIERARCHY_KEY).map(|m| m.as_slice().to_vec());
            if stored.as_deref() != Some(g.signature().as_slice()) {
                return Err(Error::Config(
                    "checkpoint was trained on a different graph hierarchy".into(),
                ));
            }
        }
        let params: BTreeMap<String, Matrix> = tensors
            .iter()
            .filter(|(k, _)| !k.starts_with("__"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        model.params.load_tensors(&params)?;
        model.norm = NormStats::from_tensors(tensors)?;
        Ok(model)
    }

    pub fn load(path: &Path, hierarchy: Option<Arc<GraphHierarchy>>) -> Result<Self> {
        let t: BTreeMap<_, _> = read_tensors(path)?.into_iter().collect();
        Self::from_tensors(&t, hierarchy)
    }
}

/// Variant and configuration stored in a checkpoint.
pub fn checkpoint_header(tensors: &BTreeMap<String, Matrix>) -> Result<(ModelVariant, GUNetConfig)> {
    let get = |k: &str| {
        tensors
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks {k}")))
    };
    let variant = ModelVariant::from_code(get(VARIANT_KEY)?.get(0, 0))?;
    let config = GUNetConfig::from_vec(get(CONFIG_KEY)?.as_slice())?;
    Ok((variant, config))
}
