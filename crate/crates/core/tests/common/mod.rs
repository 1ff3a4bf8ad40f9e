#![allow(dead_code)]

use loadcert::{Bases, Branch, Bus, KernelMatrix, LoadFlowCase, NetworkDescription};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bases() -> Bases {
    Bases {
        power_mva: 1.0,
        voltage_kv: 1.0,
    }
}

fn series_admittance(rng: &mut impl Rng) -> C {
    let z = c(rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.2));
    z.inv()
}

#[derive(Debug, Clone, Copy)]
pub struct NetworkShape {
    pub transformers: bool,
    pub shunts: bool,
    pub meshed: bool,
}

impl NetworkShape {
    pub const MIXED: NetworkShape = NetworkShape {
        transformers: true,
        shunts: true,
        meshed: true,
    };
    pub const RADIAL_LINES: NetworkShape = NetworkShape {
        transformers: false,
        shunts: false,
        meshed: false,
    };
}

/// Random connected network with `n_load` load buses: a random spanning
/// tree, optionally with extra branches, transformers and shunts.
pub fn random_network_with<R: Rng>(
    rng: &mut R,
    n_load: usize,
    shape: NetworkShape,
) -> NetworkDescription {
    let ids: Vec<String> = (0..=n_load).map(|i| format!("b{i}")).collect();
    let mut buses = vec![Bus::slack(ids[0].clone())];
    for id in &ids[1..] {
        let mut bus = Bus::load(id.clone());
        if shape.shunts && rng.gen_bool(0.3) {
            bus = bus.with_shunt(c(rng.gen_range(0.0..0.01), rng.gen_range(-0.05..0.1)));
        }
        buses.push(bus);
    }
    let mut branches = Vec::new();
    let mut add = |rng: &mut R, a: usize, b: usize| {
        let y = series_admittance(rng);
        if shape.transformers && rng.gen_bool(0.2) {
            let ratio = C::from_polar(rng.gen_range(0.95..1.05), rng.gen_range(-0.1..0.1));
            branches.push(Branch::transformer(
                ids[a].clone(),
                ids[b].clone(),
                y,
                ratio,
            ));
        } else {
            branches.push(Branch::line(ids[a].clone(), ids[b].clone(), y));
        }
    };
    for k in 1..=n_load {
        let parent = rng.gen_range(0..k);
        add(rng, parent, k);
    }
    if shape.meshed && n_load >= 2 {
        for _ in 0..rng.gen_range(0..=n_load / 3) {
            let a = rng.gen_range(0..=n_load);
            let b = rng.gen_range(0..=n_load);
            if a != b {
                add(rng, a, b);
            }
        }
    }
    NetworkDescription::new(buses, branches, bases()).expect("generated network is valid")
}

pub fn random_network(rng: &mut impl Rng, n_load: usize) -> NetworkDescription {
    random_network_with(rng, n_load, NetworkShape::MIXED)
}

pub fn random_case(seed: u64, max_load: usize) -> LoadFlowCase {
    let mut r = rng(seed);
    let n = r.gen_range(1..=max_load);
    LoadFlowCase::new(random_network(&mut r, n)).expect("generated case factorizes")
}

pub fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<C> {
    (0..n)
        .map(|_| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
        .collect()
}

/// Random injections rescaled so that `xi(s) = target`.
pub fn injections_at_xi(rng: &mut impl Rng, kernel: &KernelMatrix, target: f64) -> Vec<C> {
    let s = random_vector(rng, kernel.n(), 1.0);
    let x = kernel.xi(&s);
    s.iter().map(|z| z * (target / x)).collect()
}

pub fn to_dense(m: &loadcert::CscMatrix) -> DMatrix<C> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.iter() {
        d[(i, j)] += v;
    }
    d
}

/// `W^-1 Y_LL^-1 conj(W)^-1` by dense inversion.
pub fn dense_kernel(case: &LoadFlowCase) -> DMatrix<C> {
    let inv = to_dense(&case.system().y_ll)
        .try_inverse()
        .expect("Y_LL invertible");
    let w = case.zero_load().as_slice();
    DMatrix::from_fn(inv.nrows(), inv.ncols(), |i, j| {
        inv[(i, j)] / (w[i] * w[j].conj())
    })
}

/// `max_i sum_j |K_ij| |s_j|` on a dense matrix.
pub fn dense_xi(k: &DMatrix<C>, s: &[C]) -> f64 {
    (0..k.nrows())
        .map(|i| {
            (0..k.ncols())
                .map(|j| k[(i, j)].norm() * s[j].norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn inf_dist(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Radial chain of `n` load buses with identical lines.
pub fn chain(n: usize) -> NetworkDescription {
    let mut buses = vec![Bus::slack("0")];
    let mut branches = Vec::new();
    for k in 1..=n {
        buses.push(Bus::load(k.to_string()));
        branches.push(Branch::line(
            (k - 1).to_string(),
            k.to_string(),
            c(1.0, -2.0) * 100.0,
        ));
    }
    NetworkDescription::new(buses, branches, bases()).unwrap()
}

/// Single load bus behind admittance `y` from a slack at `v0`.
pub fn single_bus(y: C, v0: C) -> NetworkDescription {
    NetworkDescription::new(
        vec![Bus::slack("0"), Bus::load("1")],
        vec![Branch::line("0", "1", y)],
        bases(),
    )
    .unwrap()
    .with_slack_voltage(v0)
}

/// Closed-form high-voltage solution of `v = w + conj(s) / (y conj(v))`
/// for one load bus with `w = v0`.
///
/// With `u = v / w` and `c = conj(s) / (y |w|^2)` the equation reads
/// `u conj(u) = conj(u) + c`. Taking `m = |u|^2` real, `u = m - conj(c)`, so
/// `m^2 - (1 + 2 Re c) m + |c|^2 = 0`.
pub fn scalar_oracle(y: C, v0: C, s: C) -> C {
    let cc = s.conj() / (y * v0.norm_sqr());
    let b = 1.0 + 2.0 * cc.re;
    let m = (b + (b * b - 4.0 * cc.norm_sqr()).sqrt()) / 2.0;
    v0 * (m - cc.conj())
}
