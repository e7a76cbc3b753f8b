//! No-regret building blocks: Follow the Perturbed Leader over binary action
//! vectors and online projected gradient descent on a Euclidean ball.

use rand::Rng;

/// Picks the action minimizing `<cumulative, a> + <xi, a> / eta` with
/// `xi ~ Uniform[0, 1]^n`. Ties go to the lowest index.
pub fn ftpl_choose(cumulative: &[f64], actions: &[Vec<f64>], eta: f64, rng: &mut impl Rng) -> usize {
    let xi: Vec<f64> = (0..cumulative.len()).map(|_| rng.random::<f64>()).collect();
    let mut best = (f64::INFINITY, 0);
    for (idx, a) in actions.iter().enumerate() {
        let v: f64 = a
            .iter()
            .zip(cumulative.iter().zip(&xi))
            .map(|(a, (l, x))| a * (l + x / eta))
            .sum();
        if v < best.0 {
            best = (v, idx);
        }
    }
    best.1
}

/// Plays FTPL against a fixed loss sequence; returns the chosen action indices.
pub fn ftpl_play(losses: &[Vec<f64>], actions: &[Vec<f64>], eta: f64, rng: &mut impl Rng) -> Vec<usize> {
    let n = losses.first().map_or(0, Vec::len);
    let mut cumulative = vec![0.0; n];
    let mut chosen = Vec::with_capacity(losses.len());
    for loss in losses {
        chosen.push(ftpl_choose(&cumulative, actions, eta, rng));
        for (c, l) in cumulative.iter_mut().zip(loss) {
            *c += l;
        }
    }
    chosen
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Realized loss minus the loss of the best fixed action in hindsight.
pub fn ftpl_regret(losses: &[Vec<f64>], actions: &[Vec<f64>], chosen: &[usize]) -> f64 {
    let realized: f64 = losses.iter().zip(chosen).map(|(l, &a)| dot(l, &actions[a])).sum();
    let n = losses.first().map_or(0, Vec::len);
    let mut total = vec![0.0; n];
    for l in losses {
        for (t, v) in total.iter_mut().zip(l) {
            *t += v;
        }
    }
    let best = actions.iter().map(|a| dot(&total, a)).fold(f64::INFINITY, f64::min);
    realized - best
}

/// Learning rate `1 / (M sqrt(n T))` for losses in `[-M, M]^n`.
pub fn ftpl_rate(bound: f64, n: usize, rounds: usize) -> f64 {
    1.0 / (bound * ((n * rounds) as f64).sqrt())
}

/// Expected-regret bound `2 M n^{3/2} sqrt(T)`.
pub fn ftpl_regret_bound(bound: f64, n: usize, rounds: usize) -> f64 {
    2.0 * bound * (n as f64).powf(1.5) * (rounds as f64).sqrt()
}

/// Scales `v` onto the closed ball of the given radius when outside it.
pub fn project_ball(v: &mut [f64], radius: f64) {
    let norm = dot(v, v).sqrt();
    if norm > radius {
        let s = radius / norm;
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

/// Online projected gradient descent from the origin.
#[derive(Debug, Clone)]
pub struct ProjectedGradient {
    pub theta: Vec<f64>,
    pub radius: f64,
}

impl ProjectedGradient {
    pub fn new(dim: usize, radius: f64) -> Self {
        Self {
            theta: vec![0.0; dim],
            radius,
        }
    }

    pub fn step(&mut self, gradient: &[f64], eta: f64) {
        for (t, g) in self.theta.iter_mut().zip(gradient) {
            *t -= eta * g;
        }
        project_ball(&mut self.theta, self.radius);
    }
}

/// Regret bound `G D sqrt(T)`.
pub fn ogd_regret_bound(gradient_bound: f64, diameter: f64, rounds: usize) -> f64 {
    gradient_bound * diameter * (rounds as f64).sqrt()
}

/// The isotropic quadratic `a/2 |theta - c|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub curvature: f64,
    pub center: Vec<f64>,
}

impl Quadratic {
    pub fn value(&self, theta: &[f64]) -> f64 {
        let d2: f64 = theta.iter().zip(&self.center).map(|(t, c)| (t - c).powi(2)).sum();
        0.5 * self.curvature * d2
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| self.curvature * (t - c))
            .collect()
    }
}

/// Runs OGD with `eta = D / (G sqrt(T))` on a ball of diameter `D` and
/// returns its regret against the best point of the ball.
pub fn ogd_quadratic_regret(losses: &[Quadratic], diameter: f64, gradient_bound: f64) -> f64 {
    let dim = losses.first().map_or(0, |q| q.center.len());
    let radius = diameter / 2.0;
    let eta = diameter / (gradient_bound * (losses.len() as f64).sqrt());
    let mut ogd = ProjectedGradient::new(dim, radius);
    let mut realized = 0.0;
    for q in losses {
        realized += q.value(&ogd.theta);
        let g = q.gradient(&ogd.theta);
        ogd.step(&g, eta);
    }
    // A sum of isotropic quadratics is minimized on the ball by projecting
    // the curvature-weighted mean of the centers.
    let total: f64 = losses.iter().map(|q| q.curvature).sum();
    let mut best: Vec<f64> = (0..dim)
        .map(|c| losses.iter().map(|q| q.curvature * q.center[c]).sum::<f64>() / total)
        .collect();
    project_ball(&mut best, radius);
    realized - losses.iter().map(|q| q.value(&best)).sum::<f64>()
}

/// Largest gradient norm of `q` over the ball of the given radius.
pub fn quadratic_gradient_bound(q: &Quadratic, radius: f64) -> f64 {
    q.curvature * (radius + dot(&q.center, &q.center).sqrt())
}
