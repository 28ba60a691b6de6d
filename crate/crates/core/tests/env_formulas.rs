use hamq_core::envs::cartpole::cartpole_mdp;
use hamq_core::envs::ocean::{measurement_states, ocean_reward, OceanField};
use hamq_core::envs::*;
use hamq_core::{make_env, EnvName, EnvOptions};

const STATES4: [[f64; 4]; 10] = [
    [0.0, 0.0, 0.0, 0.0],
    [0.1, 0.5, 0.0, 0.0],
    [-0.3, 1.2, 0.7, -0.4],
    [0.9, -2.1, -1.5, 2.2],
    [-1.4, 0.3, 2.0, 3.1],
    [1.5, 2.9, -2.3, -3.4],
    [0.05, -0.05, 1.0, 1.0],
    [-0.7, -1.7, 0.2, 0.9],
    [1.2, 0.0, -0.8, -1.1],
    [-1.0, 2.5, 1.3, 0.0],
];
const FORCES: [f64; 10] = [0.0, 2.0, -10.0, 10.0, 3.3, -7.5, 0.1, 5.0, -2.2, 8.8];

fn cartpole_oracle(s: &[f64; 4], f: f64) -> (f64, f64) {
    let (m, mc, l, g) = (0.1, 1.0, 0.5, 9.8);
    let th = s[0];
    let thd = s[1];
    let num = g * th.sin() + th.cos() * (-f - m * l * thd.powi(2) * th.sin()) / (mc + m);
    let den = l * (4.0 / 3.0 - m * th.cos().powi(2) / (mc + m));
    let thdd = num / den;
    let xdd = (f + m * l * (thd.powi(2) * th.sin() - thdd * th.cos())) / (mc + m);
    (thdd, xdd)
}

#[test]
fn cartpole_accel_matches_oracle() {
    let p = CartPoleParams::default();
    for (s, f) in STATES4.iter().zip(FORCES) {
        let (a, b) = cartpole_accel(s, f, &p);
        let (ea, eb) = cartpole_oracle(s, f);
        assert!((a - ea).abs() <= 1e-10 * ea.abs().max(1.0), "{s:?} {f}");
        assert!((b - eb).abs() <= 1e-10 * eb.abs().max(1.0), "{s:?} {f}");
    }
}

#[test]
fn cartpole_one_step_vector() {
    let p = CartPoleParams::default();
    let s = [0.1, 0.5, 0.0, 0.0];
    let (thdd, xdd) = cartpole_oracle(&s, 2.0);
    let expect = [0.1 + 0.5 * 0.02, 0.5 + thdd * 0.02, 0.0, xdd * 0.02];
    let got = cartpole_mean_next(&s, 2.0, &p);
    for (g, e) in got.iter().zip(expect) {
        assert!((g - e).abs() < 1e-12);
    }
}

fn acrobot_oracle(s: &[f64; 4], tau: f64) -> (f64, f64) {
    // upright-referenced angles: θ = φ − π for the hanging-referenced form
    let (m1, m2, l1, lc1, lc2, i1, i2, g) = (1.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 9.8);
    let pi = std::f64::consts::PI;
    let (t1, w1, t2, w2) = (s[0], s[1], s[2], s[3]);
    let h1 = t1 - pi;
    let d11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d12 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let d22 = m2 * lc2 * lc2 + i2;
    let c1 = -m2 * l1 * lc2 * t2.sin() * (w2 * w2 + 2.0 * w1 * w2);
    let c2 = m2 * l1 * lc2 * t2.sin() * w1 * w1;
    let g1 = (m1 * lc1 + m2 * l1) * g * (h1 - pi / 2.0).cos()
        + m2 * lc2 * g * (h1 + t2 - pi / 2.0).cos();
    let g2 = m2 * lc2 * g * (h1 + t2 - pi / 2.0).cos();
    // [d11 d12; d12 d22] q̈ = [-c1-g1; tau-c2-g2]
    let (r1, r2) = (-c1 - g1, tau - c2 - g2);
    let det = d11 * d22 - d12 * d12;
    ((d22 * r1 - d12 * r2) / det, (d11 * r2 - d12 * r1) / det)
}

#[test]
fn acrobot_accel_matches_oracle() {
    let p = AcrobotParams::default();
    for (s, f) in STATES4.iter().zip(FORCES) {
        let (a, b) = acrobot_accel(s, f, &p);
        let (ea, eb) = acrobot_oracle(s, f);
        assert!(
            (a - ea).abs() <= 1e-10 * ea.abs().max(1.0),
            "{s:?} {f}: {a} vs {ea}"
        );
        assert!(
            (b - eb).abs() <= 1e-10 * eb.abs().max(1.0),
            "{s:?} {f}: {b} vs {eb}"
        );
    }
}

#[test]
fn acrobot_one_step_matches_oracle() {
    let p = AcrobotParams::default();
    let s = [2.0, -0.5, 0.4, 1.0];
    let (a1, a2) = acrobot_oracle(&s, 3.0);
    let expect = [
        2.0 - 0.5 * 0.02,
        -0.5 + a1 * 0.02,
        0.4 + 0.02,
        1.0 + a2 * 0.02,
    ];
    for (g, e) in acrobot_mean_next(&s, 3.0, &p).iter().zip(expect) {
        assert!((g - e).abs() < 1e-12);
    }
}

const STATES6: [[f64; 6]; 10] = [
    [1.0, 1.0, 2.0, -1.0, 0.3, 0.5],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-3.0, 4.0, 10.0, 5.0, -1.0, -2.0],
    [5.0, -5.0, -20.0, 12.0, 2.5, 1.5],
    [0.0, 0.0, 1.0, 1.0, 3.0, -3.0],
    [9.0, 9.0, -0.5, -0.5, -3.1, 0.1],
    [2.0, -7.0, 24.0, -24.0, 0.7, 2.9],
    [-1.0, -1.0, 0.0, 3.0, 1.57, -0.8],
    [4.4, 0.2, -6.0, 0.0, -2.2, 0.0],
    [-8.0, 6.0, 15.0, -9.0, 0.0, 1.0],
];
const CONTROLS: [f64; 10] = [0.5, 0.0, -1.0, 1.0, 0.25, -0.5, 0.75, -0.25, 0.9, -0.9];

fn glider_oracle(s: &[f64; 6], a: f64) -> [f64; 3] {
    let (m, iin, iout) = (1.03, 0.5, 0.174);
    let (af, ab, mf) = (0.062, 0.005, 0.0074);
    let (beta, psi) = (30f64.to_radians(), 20f64.to_radians());
    let w = s[5];
    let sg = if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    };
    let ff = [
        af * w * w * sg * (beta + psi).sin(),
        af * w * w * (beta + psi).cos(),
    ];
    let th = s[4];
    let rot = [[th.cos(), -th.sin()], [th.sin(), th.cos()]];
    let v = (s[2] * s[2] + s[3] * s[3]).sqrt();
    let rhs = [
        rot[0][0] * ff[0] + rot[0][1] * ff[1] - ab * v * s[2],
        rot[1][0] * ff[0] + rot[1][1] * ff[1] - ab * v * s[3],
        -mf * sg * w * w - iin * a,
    ];
    [rhs[0] / m, rhs[1] / m, rhs[2] / (iin + iout)]
}

#[test]
fn glider_accel_matches_oracle() {
    let p = GliderParams::default();
    for (s, a) in STATES6.iter().zip(CONTROLS) {
        let got = glider_accel(s, a, &p);
        let expect = glider_oracle(s, a);
        for (g, e) in got.iter().zip(expect) {
            assert!(
                (g - e).abs() <= 1e-10 * e.abs().max(1.0),
                "{s:?}: {g} vs {e}"
            );
        }
    }
    assert_eq!(glider_accel(&STATES6[1], 0.0, &p), [0.0, 0.0, 0.0]);
}

fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        inv.swap(c, piv);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for j in 0..n {
                    a[r][j] -= f * a[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

fn corr(p: [f64; 2], q: [f64; 2], sigma: f64) -> f64 {
    (-((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)) / sigma.powi(2)).exp()
}

fn double_sum(z: &[[f64; 2]], eval: &[[f64; 2]], sigma: f64, eta: f64) -> f64 {
    let w: Vec<Vec<f64>> = z
        .iter()
        .enumerate()
        .map(|(i, p)| {
            z.iter()
                .enumerate()
                .map(|(j, q)| corr(*p, *q, sigma) + if i == j { eta } else { 0.0 })
                .collect()
        })
        .collect();
    let winv = invert(w);
    let mut total = 0.0;
    for q in eval {
        for (i, zi) in z.iter().enumerate() {
            for (j, zj) in z.iter().enumerate() {
                total += corr(*q, *zi, sigma) * winv[i][j] * corr(*zj, *q, sigma);
            }
        }
    }
    total
}

fn field(eval: Vec<[f64; 2]>, eta: f64) -> OceanField {
    OceanField {
        decorrelation_scale: 2.5,
        noise_variance: eta,
        retrieval_cost: [[1.0, 0.0], [0.0, 0.0]],
        tradeoff: 0.1,
        evaluation_points: eval,
    }
}

#[test]
fn two_point_explicit_inverse() {
    let z = [[0.0, 0.0], [1.5, -1.0]];
    let eval = vec![[0.0, 1.0], [2.0, 2.0], [-1.0, 0.5]];
    let eta = 0.01;
    let b12 = corr(z[0], z[1], 2.5);
    let det = (1.0 + eta) * (1.0 + eta) - b12 * b12;
    let expect: f64 = eval
        .iter()
        .map(|q| {
            let (u, v) = (corr(*q, z[0], 2.5), corr(*q, z[1], 2.5));
            ((1.0 + eta) * (u * u + v * v) - 2.0 * b12 * u * v) / det
        })
        .sum();
    let got = uncertainty_reduction(&z, &field(eval, eta)).unwrap();
    assert!((got - expect).abs() < 1e-10);
}

#[test]
fn uncertainty_matches_dense_oracle_at_ten_inputs() {
    let eval: Vec<[f64; 2]> = (0..5)
        .flat_map(|i| (0..5).map(move |j| [-10.0 + 5.0 * i as f64, -10.0 + 5.0 * j as f64]))
        .collect();
    for k in 0..10 {
        let n = 1 + k % 6;
        let z: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = (k * 7 + i * 3) as f64;
                [(t * 1.37).sin() * 9.0, (t * 0.71).cos() * 9.0]
            })
            .collect();
        let eta = [0.01, 0.1, 0.5][k % 3];
        let got = uncertainty_reduction(&z, &field(eval.clone(), eta)).unwrap();
        let expect = double_sum(&z, &eval, 2.5, eta);
        assert!(
            (got - expect).abs() <= 1e-10 * expect.max(1.0),
            "{k}: {got} vs {expect}"
        );
    }
}

#[test]
fn glider_reward_matches_dense_oracle() {
    let opts = EnvOptions::default();
    let mdp = make_env(EnvName::Glider, &opts).unwrap();
    let f = OceanField::on_grid(&mdp, opts.noise_variance);
    let grid = mdp.state_space();
    for s in [0, 3124, 7812, 15624, 9001] {
        let z: Vec<[f64; 2]> = measurement_states(&mdp, s)
            .unwrap()
            .into_iter()
            .map(|j| {
                let p = grid.point(j).unwrap();
                [p[0], p[1]]
            })
            .collect();
        let q = grid.point(s).unwrap();
        let expect = -0.1 * q[0] * q[0] + double_sum(&z, &f.evaluation_points, 2.5, 0.01);
        for a in 0..mdp.num_actions() {
            assert!((ocean_reward(&mdp, s, a, &f).unwrap() - expect).abs() < 1e-10);
            assert!((mdp.reward(s, a) - expect).abs() < 1e-10);
        }
    }
}

#[test]
fn environment_sizes() {
    let opts = EnvOptions::default();
    for (name, shape) in [
        (EnvName::CartPole, (625, 10)),
        (EnvName::Acrobot, (625, 10)),
        (EnvName::Glider, (15625, 5)),
    ] {
        assert_eq!(make_env(name, &opts).unwrap().shape(), shape);
    }
    assert!(hamq_core::envs::make_env_by_name("pendulum", &opts).is_err());
}

#[test]
fn cartpole_kernel_mean_is_euler_step() {
    let mdp = cartpole_mdp(&CartPoleParams::default(), 0.9).unwrap();
    let s = 312;
    let x = mdp.state_space().point(s).unwrap();
    let a = mdp.action_space().point(4).unwrap();
    let expect = cartpole_mean_next(&[x[0], x[1], x[2], x[3]], a[0], &CartPoleParams::default());
    assert_eq!(mdp.mean(s, 4), expect.as_slice());
}
