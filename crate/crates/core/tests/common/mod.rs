//! Oracles shared by the integration tests.
#![allow(dead_code)]

use quantmimo::linalg::RMat;
use quantmimo::sdp::{LmiBlock, SdpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three variables, a random 3×3 pencil anchored at `I` and the box
/// `|y_i| ≤ 1` written as two diagonal 3×3 blocks.
pub fn random_three_var_problem(seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = SdpProblem::new(objective);
    let mut pencil = LmiBlock::new(3);
    for i in 0..3 {
        pencil.add_constant(i, i, 1.0);
    }
    for var in 0..3 {
        for i in 0..3 {
            for j in 0..=i {
                pencil.add(var, i, j, rng.random_range(-1.0..1.0));
            }
        }
    }
    p.blocks.push(pencil);
    for sign in [1.0, -1.0] {
        let mut b = LmiBlock::new(3);
        for i in 0..3 {
            b.add_constant(i, i, 1.0);
            b.add(i, i, i, sign);
        }
        p.blocks.push(b);
    }
    p
}

type M3 = [[f64; 3]; 3];

/// Each 3×3 block as its constant term and one coefficient per variable,
/// read off by evaluating the affine map at the origin and the unit vectors.
struct Blocks(Vec<[M3; 4]>);

impl Blocks {
    fn new(p: &SdpProblem) -> Self {
        let dense = |m: RMat| -> M3 { std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])) };
        Blocks(
            p.blocks
                .iter()
                .map(|b| {
                    let f0 = dense(b.eval(&[0.0; 3]));
                    std::array::from_fn(|k| {
                        if k == 0 {
                            return f0;
                        }
                        let mut y = [0.0; 3];
                        y[k - 1] = 1.0;
                        let fk = dense(b.eval(&y));
                        std::array::from_fn(|i| std::array::from_fn(|j| fk[i][j] - f0[i][j]))
                    })
                })
                .collect(),
        )
    }

    /// Strict feasibility by Sylvester's criterion on each block.
    fn feasible(&self, y: &[f64]) -> bool {
        self.0.iter().all(|f| {
            let m: M3 = std::array::from_fn(|i| {
                std::array::from_fn(|j| f[0][i][j] + y[0] * f[1][i][j] + y[1] * f[2][i][j] + y[2] * f[3][i][j])
            });
            let d1 = m[0][0];
            let d2 = d1 * m[1][1] - m[0][1] * m[1][0];
            d1 > 0.0 && d2 > 0.0 && det3(&m) > 0.0
        })
    }
}

fn det3(m: &M3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Grid search over the plane orthogonal to `c`, with an exact bisection for
/// the lowest feasible point on each line parallel to `c`, refined by
/// repeated zooming around the best grid point.
pub fn grid_oracle(p: &SdpProblem) -> f64 {
    let blocks = Blocks::new(p);
    let c = &p.objective;
    let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: Vec<f64> = c.iter().map(|x| x / cn).collect();
    let seed = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(&sub(&seed, &scale(&u, dot(&seed, &u))));
    let e2 = cross(&u, &e1);
    let point = |alpha: f64, a: f64, b: f64| -> [f64; 3] { std::array::from_fn(|i| alpha * u[i] + a * e1[i] + b * e2[i]) };
    let lowest = |a: f64, b: f64| -> Option<f64> {
        let steps = 800;
        let (lo, hi) = (-2.0, 2.0);
        let mut prev = lo;
        for k in 0..=steps {
            let alpha = lo + (hi - lo) * k as f64 / steps as f64;
            if blocks.feasible(&point(alpha, a, b)) {
                if k == 0 {
                    return Some(alpha);
                }
                let (mut bad, mut good) = (prev, alpha);
                for _ in 0..60 {
                    let mid = 0.5 * (bad + good);
                    if blocks.feasible(&point(mid, a, b)) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                return Some(good);
            }
            prev = alpha;
        }
        None
    };
    let mut center = (0.0, 0.0);
    let mut half = 3f64.sqrt();
    let mut best = f64::INFINITY;
    let n = 40;
    for _round in 0..8 {
        let h = 2.0 * half / n as f64;
        let mut round_best = (f64::INFINITY, center);
        for i in 0..=n {
            for j in 0..=n {
                let (a, b) = (center.0 - half + i as f64 * h, center.1 - half + j as f64 * h);
                if let Some(alpha) = lowest(a, b) {
                    if alpha < round_best.0 {
                        round_best = (alpha, (a, b));
                    }
                }
            }
        }
        best = best.min(round_best.0);
        center = round_best.1;
        half = 3.0 * h;
    }
    best * cn
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}
fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
fn normalize(a: &[f64]) -> Vec<f64> {
    let n = dot(a, a).sqrt();
    scale(a, 1.0 / n)
}
fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
