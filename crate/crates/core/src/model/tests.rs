use std::sync::Arc;

use super::*;
use crate::diffcore::Tape;
use crate::meshgraph::{GraphSequence, Point};
use crate::synthdata::{benchmark_hierarchy, generate_split, DatasetSpec, PerSplit, ScenarioConfig, Split};

pub(crate) fn small_scenario(nx: usize, ny: usize, levels: usize, t: usize) -> ScenarioConfig {
    ScenarioConfig {
        grid_nx: nx,
        grid_ny: ny,
        levels,
        snapshot_count: t,
        ..Default::default()
    }
}

pub(crate) fn small_config(levels: usize, k: usize) -> GUNetConfig {
    GUNetConfig {
        channels: GUNetConfig::schedule(4, levels),
        fine_steps: 1,
        coarse_steps: 2,
        k,
        levels,
        leaky_slope: 0.01,
        baseline_channels: 4,
        baseline_steps: 2,
    }
}

pub(crate) fn samples(cfg: &ScenarioConfig, n: usize) -> Vec<GraphSequence> {
    let spec = DatasetSpec {
        scenario: cfg.clone(),
        counts: PerSplit { train: n, val: 1, test: 1 },
        ..Default::default()
    };
    generate_split(&spec, Split::Train)
        .unwrap()
        .into_iter()
        .map(|s| s.sequence)
        .collect()
}

fn setup() -> (Arc<crate::meshgraph::GraphHierarchy>, GUNetConfig, Vec<GraphSequence>) {
    let sc = small_scenario(9, 5, 2, 4);
    let h = Arc::new(benchmark_hierarchy(&sc, 2, 3).unwrap());
    (h, small_config(2, 3), samples(&sc, 2))
}

fn models(h: &Arc<crate::meshgraph::GraphHierarchy>, cfg: &GUNetConfig) -> Vec<Model> {
    ModelVariant::ALL
        .iter()
        .map(|&v| build_model(v, Some(h.clone()), cfg, 11).unwrap())
        .collect()
}

fn shift(seq: &GraphSequence, d: Point) -> GraphSequence {
    let mut s = seq.clone();
    for snap in &mut s.positions {
        for p in snap {
            *p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
        }
    }
    s
}

#[test]
fn zero_parameters_predict_zero_everywhere() {
    let (h, cfg, seqs) = setup();
    for mut m in models(&h, &cfg) {
        m.params.zero_values();
        for mode in [RolloutMode::TeacherForced, RolloutMode::Autoregressive] {
            let r = rollout(&m, &seqs[0], mode).unwrap();
            assert_eq!(r.increments.len(), 3);
            assert!(r.increments.iter().flatten().flatten().all(|v| *v == 0.0));
            if mode == RolloutMode::Autoregressive {
                assert!(r.positions.iter().all(|p| p == &seqs[0].positions[0]));
            }
        }
        // hidden states stay zero
        let ctx = m.context(&seqs[0]).unwrap();
        let u = displacements(&seqs[0]);
        let mut hidden = HiddenState::default();
        for i in 0..3usize {
            let inp = m.step_inputs(&ctx, &u[i.saturating_sub(1)], &u[i]).unwrap();
            m.predict_step(&ctx, &inp, &mut hidden).unwrap();
            assert!(hidden.is_zero());
            assert_eq!(hidden.fine.is_some(), m.variant.is_recurrent());
        }
    }
}

#[test]
fn translation_leaves_increments_bit_identical() {
    let (h, cfg, seqs) = setup();
    let moved = shift(&seqs[1], [17.0, -5.0, 3.0]);
    for m in models(&h, &cfg) {
        for mode in [RolloutMode::TeacherForced, RolloutMode::Autoregressive] {
            let a = rollout(&m, &seqs[1], mode).unwrap();
            let b = rollout(&m, &moved, mode).unwrap();
            assert_eq!(a.increments, b.increments, "{} {mode:?}", m.variant);
            assert!(a.increments.iter().flatten().flatten().any(|v| *v != 0.0));
        }
    }
}

#[test]
fn relabeling_permutes_outputs_exactly() {
    let sc = small_scenario(5, 3, 1, 3);
    let h = Arc::new(benchmark_hierarchy(&sc, 1, 4).unwrap());
    let cfg = small_config(1, 4);
    let seq = &samples(&sc, 1)[0];
    let u = displacements(seq);
    let n = seq.num_nodes();
    let perm: Vec<usize> = (0..n).map(|i| (i * 4 + 3) % n).collect();
    let permute = |v: &[Point]| {
        let mut out = vec![[0.0; 3]; n];
        for (o, &p) in perm.iter().enumerate() {
            out[p] = v[o];
        }
        out
    };
    for m in models(&h, &cfg) {
        let ctx = m.context(seq).unwrap();
        let pctx = ctx.relabel(&perm).unwrap();
        let (mut ha, mut hb) = (HiddenState::default(), HiddenState::default());
        for i in 0..2usize {
            let (prev, curr) = (&u[i.saturating_sub(1)], &u[i]);
            let a = m.step_inputs(&ctx, prev, curr).unwrap();
            let b = m.step_inputs(&pctx, &permute(prev), &permute(curr)).unwrap();
            let ya = rollout::matrix_to_points(&m.predict_step(&ctx, &a, &mut ha).unwrap());
            let yb = rollout::matrix_to_points(&m.predict_step(&pctx, &b, &mut hb).unwrap());
            assert_eq!(permute(&ya), yb, "{}", m.variant);
        }
    }
}

#[test]
fn fixed_rows_are_zero_and_rollouts_reset() {
    let (h, cfg, seqs) = setup();
    for m in models(&h, &cfg) {
        let a = rollout(&m, &seqs[0], RolloutMode::Autoregressive).unwrap();
        for inc in &a.increments {
            for (d, &f) in inc.iter().zip(&seqs[0].fixed) {
                if f {
                    assert_eq!(*d, [0.0; 3]);
                }
            }
        }
        let b = rollout(&m, &seqs[0], RolloutMode::Autoregressive).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn stub_is_exact_in_both_modes() {
    let (_, _, seqs) = setup();
    let tf = rollout(&GroundTruthStub, &seqs[0], RolloutMode::TeacherForced).unwrap();
    let ar = rollout(&GroundTruthStub, &seqs[0], RolloutMode::Autoregressive).unwrap();
    assert_eq!(tf, ar);
    assert_eq!(tf.positions, seqs[0].positions);
}

#[test]
fn block_invocations_per_sequence() {
    use std::cell::Cell;
    struct Counting<'a>(&'a Model, Cell<usize>);
    struct Sess<'a>(Box<dyn StepSession + 'a>, &'a Cell<usize>);
    impl StepSession for Sess<'_> {
        fn step(&mut self, i: usize, p: &[Point], c: &[Point]) -> crate::Result<Vec<Point>> {
            self.1.set(self.1.get() + 1);
            self.0.step(i, p, c)
        }
    }
    impl Predictor for Counting<'_> {
        fn start<'a>(&'a self, seq: &GraphSequence) -> crate::Result<Box<dyn StepSession + 'a>> {
            Ok(Box::new(Sess(self.0.start(seq)?, &self.1)))
        }
    }
    let sc = small_scenario(5, 3, 1, 12);
    let h = Arc::new(benchmark_hierarchy(&sc, 1, 2).unwrap());
    let m = build_model(ModelVariant::ReGUNet, Some(h), &small_config(1, 2), 1).unwrap();
    let c = Counting(&m, Cell::new(0));
    rollout(&c, &samples(&sc, 1)[0], RolloutMode::Autoregressive).unwrap();
    assert_eq!(c.1.get(), 11);
}

#[test]
fn baseline_parameter_relations() {
    let (h, cfg, seqs) = setup();
    let ms = models(&h, &cfg);
    let names = |m: &Model| m.params.names().map(String::from).collect::<std::collections::BTreeSet<_>>();
    let (re, b1, b2, b3) = (&ms[0], &ms[1], &ms[2], &ms[3]);
    assert!(names(b3).is_subset(&names(re)) && names(b3) != names(re));
    assert!(names(re).difference(&names(b3)).all(|n| n.contains(".hidden.")));
    let c = cfg.baseline_channels;
    let hidden_mlp = crate::diffcore::MlpSpec::standard(4 * c, c, c, true).num_params();
    assert_eq!(
        b2.params.num_scalars() - b1.params.num_scalars(),
        cfg.baseline_steps * hidden_mlp
    );

    // baseline 1 has no memory: same inputs after different histories give the same output
    let ctx = b1.context(&seqs[0]).unwrap();
    let u = displacements(&seqs[0]);
    let inp = b1.step_inputs(&ctx, &u[1], &u[2]).unwrap();
    let mut h1 = HiddenState::default();
    let first = b1.predict_step(&ctx, &inp, &mut h1).unwrap();
    let other = b1.step_inputs(&ctx, &u[0], &u[1]).unwrap();
    b1.predict_step(&ctx, &other, &mut h1).unwrap();
    assert_eq!(b1.predict_step(&ctx, &inp, &mut h1).unwrap(), first);
    // baseline 2 does remember
    let mut h2 = HiddenState::default();
    let first = b2.predict_step(&ctx, &inp, &mut h2).unwrap();
    assert_ne!(b2.predict_step(&ctx, &inp, &mut h2).unwrap(), first);
}

#[test]
fn channel_schedule_shapes() {
    let sc = small_scenario(33, 9, 3, 2);
    let h = Arc::new(benchmark_hierarchy(&sc, 3, 6).unwrap());
    let cfg = GUNetConfig::default();
    let m = build_model(ModelVariant::ReGUNet, Some(h.clone()), &cfg, 0).unwrap();
    let shape = |n: &str| m.params.value(m.params.id(n).unwrap()).shape();
    let cross = |l: usize| h.cross_edges[l].len();
    assert_eq!(shape("down.nw1.w"), (cross(1), 32 * 64));
    assert_eq!(shape("down.nw2.w"), (cross(2), 64 * 128));
    assert_eq!(shape("up.nw2.w"), (cross(2), 128 * 64));
    assert_eq!(shape("up.nw1.w"), (cross(1), 64 * 32));
    assert_eq!(shape("coarse.s9.edge.l0.w"), (4 * 128, 128));
    assert_eq!(shape("fine_pre.s1.hidden.l3.w"), (32, 32));
    assert_eq!(shape("down.mp.edge.l3.w"), (32, 32));
    assert_eq!(shape("dec.l3.w"), (32, 3));
    assert!(m.params.id("fine_post.s2.edge.l0.w").is_none());

    let seq = &samples(&sc, 1)[0];
    let ctx = m.context(seq).unwrap();
    let mut t = Tape::new(&m.params);
    let consts = m.constants(&mut t, &ctx).unwrap();
    let u = displacements(seq);
    let inp = m.step_inputs(&ctx, &u[0], &u[1]).unwrap();
    let (y, hv) = m.step(&mut t, &ctx, consts.as_ref(), &inp, HiddenVars::default()).unwrap();
    assert_eq!(t.value(y).shape(), (297, 3));
    assert_eq!(t.value(hv.fine.unwrap()).shape(), (seq.edges.len(), 32));
    assert_eq!(t.value(hv.coarse.unwrap()).shape(), (h.levels[3].graph.edges.len(), 128));
}

#[test]
fn mismatched_hierarchy_rejected() {
    let sc = small_scenario(9, 5, 2, 2);
    let h2 = Arc::new(benchmark_hierarchy(&sc, 2, 3).unwrap());
    let h1 = Arc::new(benchmark_hierarchy(&sc, 1, 3).unwrap());
    let cfg = small_config(2, 3);
    assert!(matches!(
        build_model(ModelVariant::ReGUNet, Some(h1.clone()), &cfg, 0),
        Err(crate::Error::Config(_))
    ));
    let m = build_model(ModelVariant::ReGUNet, Some(h2), &cfg, 0).unwrap();
    let t: std::collections::BTreeMap<_, _> = m.to_tensors().into_iter().collect();
    let h2k = Arc::new(benchmark_hierarchy(&sc, 2, 2).unwrap());
    assert!(Model::from_tensors(&t, Some(h2k)).is_err());
    assert!(build_model(ModelVariant::Baseline3, None, &cfg, 0).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (h, cfg, seqs) = setup();
    let dir = tempfile::tempdir().unwrap();
    for mut m in models(&h, &cfg) {
        m.norm.target_scale = vec![0.5, 0.25, 2.0];
        let p = dir.path().join(format!("{}.rgck", m.variant));
        m.save(&p).unwrap();
        let back = Model::load(&p, Some(h.clone())).unwrap();
        assert_eq!(back.variant, m.variant);
        assert_eq!(
            rollout(&back, &seqs[0], RolloutMode::Autoregressive).unwrap(),
            rollout(&m, &seqs[0], RolloutMode::Autoregressive).unwrap()
        );
    }
}

