use std::f64::consts::PI;

use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::meshgraph::{
    build_coarse_hierarchy, grid_mesh, GraphHierarchy, Mesh, MorphParams, Point,
};

/// Position resolution of generated data, mm (2^-20).
pub const POSITION_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

/// Rounds to the nearest multiple of [`POSITION_QUANTUM`].
#[inline]
pub fn quantize(v: f64) -> f64 {
    (v * (1u64 << 20) as f64).round() * POSITION_QUANTUM
}

#[inline]
pub(crate) fn quantize_point(p: Point) -> Point {
    [quantize(p[0]), quantize(p[1]), quantize(p[2])]
}

/// Arched plate `z = h sin(pi x / L)` on an `n_x x n_y` grid, clamped along
/// `x = 0` and `x = L`.
pub fn generate_benchmark_mesh(cfg: &ScenarioConfig) -> Result<Mesh> {
    cfg.validate()?;
    let (nx, ny) = (cfg.grid_nx, cfg.grid_ny);
    let mesh = grid_mesh(
        cfg.grid(),
        |i, j| {
            let x = cfg.length * i as f64 / (nx - 1) as f64;
            let y = cfg.width * j as f64 / (ny - 1) as f64;
            quantize_point([x, y, cfg.arch_height * (PI * x / cfg.length).sin()])
        },
        |i, _| i == 0 || i == nx - 1,
    );
    Ok(mesh)
}

/// Benchmark mesh coarsened `levels` times, with `k`-NN cross edges.
pub fn benchmark_hierarchy(cfg: &ScenarioConfig, levels: usize, k: usize) -> Result<GraphHierarchy> {
    let mesh = generate_benchmark_mesh(cfg)?;
    let mut h = build_coarse_hierarchy(&mesh, cfg.grid(), levels)?;
    h.connect(k)?;
    Ok(h)
}

/// Largest admissible `|amplitude|`, mm.
pub fn morph_bound(cfg: &ScenarioConfig) -> f64 {
    0.08 * cfg.arch_height
}

/// Control-point x positions, mm.
pub fn control_points(cfg: &ScenarioConfig) -> [f64; 3] {
    [0.25 * cfg.length, 0.5 * cfg.length, 0.75 * cfg.length]
}

/// Gaussian bump `A exp(-(x - x_c)^2 / (2 sigma^2))` in z, `sigma = L/10`.
pub fn morph_geometry(mesh: &Mesh, params: MorphParams, cfg: &ScenarioConfig) -> Result<Mesh> {
    let bound = morph_bound(cfg);
    let a = params.amplitude;
    if !a.is_finite() || a.abs() > bound * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "morph amplitude {a} mm exceeds the bound {bound} mm"
        )));
    }
    let Some(&xc) = control_points(cfg).get(params.control_point as usize) else {
        return Err(Error::InvalidInput(format!(
            "control point {} not in {{0, 1, 2}}",
            params.control_point
        )));
    };
    let sigma = cfg.length / 10.0;
    let mut out = mesh.clone();
    for p in &mut out.positions {
        let dx = p[0] - xc;
        p[2] = quantize(p[2] + a * (-(dx * dx) / (2.0 * sigma * sigma)).exp());
    }
    Ok(out)
}

/// Maps a unit-cube design point to morph parameters.
pub fn sample_to_morph(u: [f64; 2], cfg: &ScenarioConfig) -> MorphParams {
    MorphParams {
        control_point: ((3.0 * u[0]).floor().max(0.0) as u32).min(2),
        amplitude: (2.0 * u[1] - 1.0) * morph_bound(cfg),
    }
}
