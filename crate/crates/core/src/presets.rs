//! Named initial conditions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::euler2d::CouetteMode;
use crate::spectral::{storage_index, Grid1, Grid2, SpectralField1, SpectralField2, C64};

/// `ω = -2 cos x cos y`, optionally perturbed by `eps (cos(2x + y) + sin(x - 2y))`.
pub fn taylor_green(grid: Grid2, eps: f64) -> SpectralField2 {
    SpectralField2::from_fn(grid, |x, y| {
        -2.0 * x.cos() * y.cos() + eps * ((2.0 * x + y).cos() + (x - 2.0 * y).sin())
    })
}

/// Vorticity `-amp cos y` of the shear `u = (amp sin y, 0)`.
pub fn shear(grid: Grid2, amp: f64) -> SpectralField2 {
    SpectralField2::from_fn(grid, |_, y| -amp * y.cos())
}

/// Mean-free random field with modes `0 < |m| ≤ kmax`, amplitudes decaying like `|m|⁻¹`,
/// rescaled to root-mean-square value `rms`.
pub fn random_bandlimited(grid: Grid2, seed: u64, kmax: usize, rms: f64) -> Result<SpectralField2> {
    let k = kmax as i64;
    if kmax == 0 || 3 * kmax > grid.nx.min(grid.ny) {
        return Err(Error::Precondition(format!("kmax = {kmax} must be positive and below the 2/3 cutoff")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![C64::new(0.0, 0.0); grid.len()];
    for my in -k..=k {
        for mx in -k..=k {
            let in_half = my > 0 || (my == 0 && mx > 0);
            let r2 = (mx * mx + my * my) as f64;
            if !in_half || r2 > (k * k) as f64 {
                continue;
            }
            let a: f64 = rng.random_range(0.0..1.0) / r2.sqrt();
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            let c = C64::from_polar(0.5 * a, phase);
            let idx = |mx: i64, my: i64| storage_index(my, grid.ny) * grid.nx + storage_index(mx, grid.nx);
            coeffs[idx(mx, my)] = c;
            coeffs[idx(-mx, -my)] = c.conj();
        }
    }
    let f = SpectralField2::from_coeffs(grid, coeffs)?;
    let current = f.l2_norm() / grid.cell_area().sqrt();
    Ok(f.scaled(rms / current))
}

/// Smoothed sawtooth `2 atan2(r sin y, 1 + r cos y)`, odd and `2π`-periodic.
pub fn smoothed_sawtooth(y: f64, r: f64) -> f64 {
    2.0 * (r * y.sin()).atan2(1.0 + r * y.cos())
}

/// Density with slope `+2r/(1-r)` at `y = 0` (heavy fluid above light) plus `eps cos x`;
/// `stable = true` flips the stratification.
pub fn stratified_with_bump(grid: Grid2, eps: f64, r: f64, stable: bool) -> SpectralField2 {
    let sign = if stable { 1.0 } else { -1.0 };
    SpectralField2::from_fn(grid, |x, y| sign * smoothed_sawtooth(y + PI, r) + eps * x.cos())
}

pub fn heavy_over_light(grid: Grid2, eps: f64) -> SpectralField2 {
    stratified_with_bump(grid, eps, 0.6, false)
}

pub fn clm_cosine(grid: Grid1, amp: f64, shift: f64) -> SpectralField1 {
    SpectralField1::from_fn(grid, |x| shift + amp * x.cos())
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialField {
    /// Vorticity, density or passive scalar on the torus.
    Plane(SpectralField2),
    Line(SpectralField1),
    Modes(Vec<CouetteMode>),
}

#[derive(Clone, Copy, Debug)]
pub enum Domain {
    Plane(Grid2),
    Line(Grid1),
    Fourier,
}

pub struct PresetInfo {
    pub name: &'static str,
    pub domain: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub description: &'static str,
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "taylor_green",
        domain: "plane",
        params: &[("eps", 0.0)],
        description: "vorticity -2 cos x cos y + eps (cos(2x+y) + sin(x-2y))",
    },
    PresetInfo { name: "shear", domain: "plane", params: &[("amp", 1.0)], description: "vorticity -amp cos y, velocity (amp sin y, 0)" },
    PresetInfo {
        name: "random_bandlimited",
        domain: "plane",
        params: &[("kmax", 8.0), ("rms", 1.0)],
        description: "mean-free random modes with |m| <= kmax, seeded by the config seed",
    },
    PresetInfo { name: "cos_x", domain: "plane", params: &[("amp", 1.0)], description: "amp cos x" },
    PresetInfo { name: "stratified", domain: "plane", params: &[], description: "density cos y + 0.3 sin 2y (rest state)" },
    PresetInfo {
        name: "heavy_over_light",
        domain: "plane",
        params: &[("eps", 0.01), ("r", 0.6)],
        description: "density -S(y+pi) + eps cos x with S(y) = 2 atan2(r sin y, 1 + r cos y)",
    },
    PresetInfo {
        name: "light_over_heavy",
        domain: "plane",
        params: &[("eps", 0.01), ("r", 0.6)],
        description: "density S(y+pi) + eps cos x",
    },
    PresetInfo {
        name: "clm_cosine",
        domain: "line",
        params: &[("amp", 1.0), ("shift", 0.0)],
        description: "shift + amp cos x",
    },
    PresetInfo { name: "sine", domain: "line", params: &[("amp", 1.0)], description: "amp sin x" },
    PresetInfo {
        name: "couette",
        domain: "fourier",
        params: &[("kx", 1.0), ("eta0", 0.0), ("amp", 1.0)],
        description: "single vorticity mode around the Couette flow (y, 0)",
    },
];

fn param(name: &str, params: &BTreeMap<String, f64>, info: &PresetInfo, key: &str) -> Result<f64> {
    if let Some(v) = params.get(key) {
        return Ok(*v);
    }
    info.params
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Precondition(format!("preset {name} has no parameter {key}")))
}

/// Builds the named preset on the given domain. Unknown names and parameters are rejected.
pub fn init_library(name: &str, params: &BTreeMap<String, f64>, domain: Domain, seed: u64) -> Result<InitialField> {
    let info = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    for key in params.keys() {
        if !info.params.iter().any(|(k, _)| k == key) {
            return Err(Error::Precondition(format!("preset {name} has no parameter {key}")));
        }
    }
    let p = |key: &str| param(name, params, info, key);
    let wrong = || Error::Precondition(format!("preset {name} lives on the {} domain", info.domain));
    Ok(match (name, domain) {
        ("taylor_green", Domain::Plane(g)) => InitialField::Plane(taylor_green(g, p("eps")?)),
        ("shear", Domain::Plane(g)) => InitialField::Plane(shear(g, p("amp")?)),
        ("random_bandlimited", Domain::Plane(g)) => {
            let kmax = p("kmax")?;
            if kmax < 1.0 || kmax.fract() != 0.0 {
                return Err(Error::Precondition(format!("kmax = {kmax} must be a positive integer")));
            }
            InitialField::Plane(random_bandlimited(g, seed, kmax as usize, p("rms")?)?)
        }
        ("cos_x", Domain::Plane(g)) => {
            let a = p("amp")?;
            InitialField::Plane(SpectralField2::from_fn(g, |x, _| a * x.cos()))
        }
        ("stratified", Domain::Plane(g)) => {
            InitialField::Plane(SpectralField2::from_fn(g, |_, y| y.cos() + 0.3 * (2.0 * y).sin()))
        }
        ("heavy_over_light", Domain::Plane(g)) => InitialField::Plane(stratified_with_bump(g, p("eps")?, p("r")?, false)),
        ("light_over_heavy", Domain::Plane(g)) => InitialField::Plane(stratified_with_bump(g, p("eps")?, p("r")?, true)),
        ("clm_cosine", Domain::Line(g)) => InitialField::Line(clm_cosine(g, p("amp")?, p("shift")?)),
        ("sine", Domain::Line(g)) => {
            let a = p("amp")?;
            InitialField::Line(SpectralField1::from_fn(g, |x| a * x.sin()))
        }
        ("couette", Domain::Fourier) => {
            InitialField::Modes(vec![CouetteMode { kx: p("kx")?, eta0: p("eta0")?, amplitude: p("amp")? }])
        }
        _ => return Err(wrong()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_green_matches_formula() {
        let g = Grid2::square(16).unwrap();
        let f = init_library("taylor_green", &BTreeMap::new(), Domain::Plane(g), 0).unwrap();
        let InitialField::Plane(f) = f else { panic!() };
        let expect = g.sample(|x, y| -2.0 * x.cos() * y.cos());
        let got = f.to_physical();
        assert!(got.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn random_field_is_reproducible_and_mean_free() {
        let g = Grid2::square(32).unwrap();
        let mut params = BTreeMap::new();
        params.insert("kmax".to_string(), 8.0);
        let a = init_library("random_bandlimited", &params, Domain::Plane(g), 7).unwrap();
        let b = init_library("random_bandlimited", &params, Domain::Plane(g), 7).unwrap();
        assert_eq!(a, b);
        let c = init_library("random_bandlimited", &params, Domain::Plane(g), 8).unwrap();
        assert_ne!(a, c);
        let InitialField::Plane(f) = a else { panic!() };
        assert!(f.is_mean_free());
        assert!(f.hermitian_defect() == 0.0);
        assert!((f.l2_norm() / (2.0 * PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_over_light_is_odd_with_steep_unstable_layer() {
        let g = Grid2::square(64).unwrap();
        let rho = heavy_over_light(g, 0.0);
        for &y in &[0.3, 1.1, 2.9] {
            assert!((rho.eval_at(0.0, y) + rho.eval_at(0.0, -y)).abs() < 1e-12);
        }
        let h = 1e-5;
        let slope = (smoothed_sawtooth(PI + h, 0.6) - smoothed_sawtooth(PI - h, 0.6)) / (2.0 * h);
        assert!((slope + 3.0).abs() < 1e-6);
    }

    #[test]
    fn unknown_names_and_params_are_rejected() {
        let g = Grid2::square(16).unwrap();
        assert!(matches!(init_library("vortex_sheet", &BTreeMap::new(), Domain::Plane(g), 0), Err(Error::UnknownPreset(_))));
        let mut p = BTreeMap::new();
        p.insert("width".to_string(), 1.0);
        assert!(init_library("taylor_green", &p, Domain::Plane(g), 0).is_err());
        assert!(init_library("clm_cosine", &BTreeMap::new(), Domain::Plane(g), 0).is_err());
    }
}
